#!/usr/bin/env python
# -*- coding: utf-8 -*-

# binn_app.py
"""
Script to start the BINN command line tool
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution


import binn.main


if __name__ == "__main__":
    binn.main.start()
