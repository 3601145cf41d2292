#!/usr/bin/env python
# -*- coding: utf-8 -*-

# paths.py
"""
A collection of directories used as defaults by the command line interface
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

from os.path import join, dirname, expanduser

SCRIPT_DIR = dirname(__file__)
APPS_DIR = join(expanduser('~'), 'Apps')
APP_DIR = join(APPS_DIR, 'binn')
DATA_DIR = join(APP_DIR, 'data')
RUNS_DIR = join(APP_DIR, 'runs')
ANALYSIS_DIR = join(APP_DIR, 'analysis')

DATASET_META_FILE = 'meta.json'
DATASET_BLOB_FILE = 'data.f32'
MANIFEST_FILE = 'manifest.json'
METRICS_FILE = 'metrics.csv'
BEST_CHECKPOINT_FILE = 'best.ckpt'
LAST_CHECKPOINT_FILE = 'last.ckpt'
CONFIG_FILE = 'config.json'

SPLITS = ('train', 'val', 'test')
