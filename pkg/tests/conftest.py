#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tests.conftest.py
"""
Shared fixtures; desk-scale runs are marked slow and need BINN_RUN_SLOW=1
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import os
import numpy as np
import pytest
from binn.data.dataset import TrajectoryDataset
from binn.data.sims import SimConfig, generate_dataset
from binn.models.network import BinnModel


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale training runs (set BINN_RUN_SLOW=1)')


def pytest_collection_modifyitems(config, items):
    if os.environ.get('BINN_RUN_SLOW') == '1':
        return
    skip = pytest.mark.skip(reason='set BINN_RUN_SLOW=1 to run desk-scale tests')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    return BinnModel(n_agents=2, state_dim=4, latent_dim=2, hidden=8, activation='tanh', dt=0.1, seed=3)


@pytest.fixture
def tiny_batch(rng):
    """Random trajectories [B=3 x T=4 x N_a=2 x d=4]"""
    return rng.normal(0., 0.5, (3, 4, 2, 4))


@pytest.fixture
def tiny_dataset(tiny_batch):
    return TrajectoryDataset(tiny_batch, 0.1, name='tiny')


@pytest.fixture
def linear_dataset():
    """Two agents moving at constant velocity"""
    dt, frames = 0.1, 6
    p0 = np.array([[0., 0.], [1., -1.]])
    v = np.array([[1., 2.], [-0.5, 0.25]])
    t = dt * np.arange(frames)[:, np.newaxis, np.newaxis]
    positions = p0 + t * v
    velocities = np.broadcast_to(v, positions.shape)
    data = np.concatenate([positions, velocities], axis=-1)[np.newaxis]
    return TrajectoryDataset(data, dt, name='linear')


@pytest.fixture(scope='session')
def pendulum_dataset():
    cfg = SimConfig.preset('pendulum', seed=11, steps=1000)
    return generate_dataset(cfg, 16)
