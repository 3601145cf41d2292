#!/usr/bin/env python
# -*- coding: utf-8 -*-

# __init__.py
"""
Package initialization for BINN
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution


__author__ = 'The BINN developers'
__version__ = '0.1.0'
__version_info__ = (0, 1, 0)
