#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tools.errors.py
"""
Classes for BINN specific error handling
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution


class BinnError(Exception):
    def __init__(self, error_message):
        """
        Base class of all errors raised by BINN
        :param error_message: the message to be displayed by the command line tool
        :type error_message: str
        """
        Exception.__init__(self, error_message)
        self.message = error_message

    def __str__(self):
        return self.message


class ShapeError(BinnError):
    pass


class TapeError(BinnError):
    pass


class NonFiniteError(BinnError):
    def __init__(self, error_message, op=None, node_id=None, step=None):
        """
        Raised when NaN or Inf is produced, so the current step can be aborted
        :param error_message: description of where the value appeared
        :type error_message: str
        :param op: the operation kind that produced the value (diffcore)
        :type op: str
        :param node_id: tape node id of the failing operation, None if not recorded
        :type node_id: int
        :param step: integration or rollout step index, if applicable
        :type step: int
        """
        BinnError.__init__(self, error_message)
        self.op = op
        self.node_id = node_id
        self.step = step


class ConvergenceError(BinnError):
    pass


class DegenerateTraceError(BinnError):
    pass


class PreconditionError(BinnError):
    pass


class DatasetFormatError(BinnError):
    pass


class ConfigError(BinnError):
    pass


class UsageError(BinnError):
    def __init__(self, error_message, usage=''):
        """
        Invalid command line arguments
        :param usage: the usage line of the offending parser
        """
        BinnError.__init__(self, error_message)
        self.usage = usage


# Errors the command line tool reports as validation failures (exit code 1)
VALIDATION_ERRORS = (ConfigError, PreconditionError, ShapeError, DatasetFormatError, UsageError)
