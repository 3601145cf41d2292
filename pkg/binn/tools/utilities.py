#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tools.utilities.py
"""
General utilities: worker counts, progress messages, CSV helpers, and run manifests
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from os.path import isdir, isfile, join
import pandas as pd
from dateutil import parser as date_parser
from pubsub import pub
from binn import __version__
from binn.paths import MANIFEST_FILE
from binn.tools.errors import ConfigError, DatasetFormatError


logger = logging.getLogger(__name__)


def get_worker_count():
    """
    :return: worker count from the BINN_THREADS environment variable, 1 when unset
    :rtype: int
    """
    value = os.environ.get('BINN_THREADS')
    if value in (None, ''):
        return 1
    try:
        count = int(value)
    except ValueError:
        raise ConfigError("BINN_THREADS must be a positive integer, got '%s'" % value)
    if count < 1:
        raise ConfigError("BINN_THREADS must be a positive integer, got '%s'" % value)
    return count


def ordered_map(func, items, workers=1):
    """
    Map func over items, in parallel when workers > 1; results keep the order of items
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def send_progress(topic, **msg):
    pub.sendMessage(topic, msg=msg)


def initialize_directories(*directories):
    for directory in directories:
        if not isdir(directory):
            os.makedirs(directory)


def get_elapsed_time(start_time, end_time):
    """
    Human readable run duration; hours are not folded into days
    """
    minutes, s = divmod(int((end_time - start_time).total_seconds()), 60)
    h, m = divmod(minutes, 60)
    if h:
        return "%d hrs %d min %d sec" % (h, m, s)
    if m:
        return "%d min %d sec" % (m, s)
    return "%d sec" % s


def write_csv(abs_file_path, columns, rows):
    """
    :param columns: column names
    :type columns: list
    :param rows: one sequence per row, in column order
    """
    pd.DataFrame(list(rows), columns=list(columns)).to_csv(abs_file_path, index=False)


def read_csv(abs_file_path, required_columns=None):
    """
    :param required_columns: columns that must be present
    :return: the table
    :rtype: pd.DataFrame
    """
    if not isfile(abs_file_path):
        raise DatasetFormatError("CSV file not found: %s" % abs_file_path)
    table = pd.read_csv(abs_file_path)
    missing = [c for c in required_columns or [] if c not in table.columns]
    if missing:
        raise DatasetFormatError("CSV file %s is missing columns: %s" % (abs_file_path, ', '.join(missing)))
    return table


class RunManifest:
    def __init__(self, command, config=None, seed=None, inputs=None, outputs=None, version=__version__,
                 started=None, finished=None, argv=None):
        """
        Record of one CLI invocation, serialized next to the artifacts it produced
        :param command: subcommand name
        :type command: str
        :param config: resolved configuration
        :type config: dict
        :param seed: RNG seed
        :param inputs: input paths keyed by role
        :type inputs: dict
        :param outputs: output paths keyed by role
        :type outputs: dict
        :param argv: command-line arguments, sys.argv[1:] by default
        """
        self.command = command
        self.config = config or {}
        self.seed = seed
        self.inputs = inputs or {}
        self.outputs = outputs or {}
        self.version = version
        self.started = started or datetime.now()
        self.finished = finished
        self.argv = list(sys.argv[1:] if argv is None else argv)

    @property
    def duration(self):
        if self.finished is None:
            return None
        return (self.finished - self.started).total_seconds()

    def finish(self):
        self.finished = datetime.now()

    def to_dict(self):
        return {'command': self.command,
                'argv': self.argv,
                'config': self.config,
                'seed': self.seed,
                'inputs': self.inputs,
                'outputs': self.outputs,
                'version': self.version,
                'started': self.started.isoformat(),
                'finished': self.finished.isoformat() if self.finished else None,
                'duration_sec': self.duration}

    def save(self, out_dir, file_name=MANIFEST_FILE):
        initialize_directories(out_dir)
        abs_file_path = join(out_dir, file_name)
        with open(abs_file_path, 'w') as document:
            json.dump(self.to_dict(), document, indent=2, sort_keys=True, default=str)
        logger.debug("Run manifest written to %s", abs_file_path)
        return abs_file_path

    @classmethod
    def load(cls, abs_file_path):
        with open(abs_file_path, 'r') as document:
            data = json.load(document)
        finished = data.get('finished')
        return cls(data['command'], config=data.get('config'), seed=data.get('seed'), inputs=data.get('inputs'),
                   outputs=data.get('outputs'), version=data.get('version'),
                   started=date_parser.parse(data['started']),
                   finished=date_parser.parse(finished) if finished else None, argv=data.get('argv', []))
