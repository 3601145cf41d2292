#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tools.stats.py
"""
Statistics used by the exclusivity analysis and the evaluation metrics
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import numpy as np
from scipy import stats
from sklearn.metrics import mean_squared_error
from binn.tools.errors import DegenerateTraceError, ShapeError


def pooled_pair(z_trace, j, l):
    """
    Pool the preferences of two categories over all timesteps and agents
    :param z_trace: preferences [T x N_a x N_o]
    :type z_trace: np.ndarray
    :return: pooled z_j and z_l, flattened
    """
    z_trace = np.asarray(z_trace, dtype=np.float64)
    if z_trace.ndim != 3:
        raise ShapeError("Preference trace must be [T x N_a x N_o], got shape %s" % (z_trace.shape,))
    return z_trace[:, :, j].reshape(-1), z_trace[:, :, l].reshape(-1)


def exclusivity_scale(z_j, z_l):
    """
    Least squares scale c minimizing sum (z_j + c z_l)^2
    :return: c = -sum(z_j z_l) / sum(z_l^2)
    :rtype: float
    """
    denominator = float(np.dot(z_l, z_l))
    if denominator == 0.:
        raise DegenerateTraceError("Category trace is identically zero")
    return -float(np.dot(z_j, z_l)) / denominator


def pearson(x, y):
    """
    Pearson correlation that reports zero variance as a degenerate trace
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0. or np.ptp(y) == 0.:
        raise DegenerateTraceError("Zero variance in a category trace, correlation is undefined")
    rho, _ = stats.pearsonr(x, y)
    return float(np.clip(rho, -1., 1.))


def mse(truth, prediction):
    """
    Mean squared error over every element
    """
    truth, prediction = np.asarray(truth), np.asarray(prediction)
    if truth.shape != prediction.shape:
        raise ShapeError("Shape mismatch: %s and %s" % (truth.shape, prediction.shape))
    if truth.size == 0:
        return 0.
    return float(mean_squared_error(truth.reshape(-1, 1), prediction.reshape(-1, 1)))
