#!/usr/bin/env python
# -*- coding: utf-8 -*-

# setup.py
"""
A setuptools setup file for BINN
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

from setuptools import setup, find_packages
from binn.options import DefaultOptions

requires = [
    'pypubsub',
    'numpy',
    'scipy',
    'pandas',
    'bokeh >= 1.2',
    'python-dateutil',
    'scikit-learn'
]

setup(
    name='binn',
    include_package_data=True,
    packages=find_packages(exclude=['tests']),
    version=DefaultOptions().VERSION,
    description='Behavior-inspired neural networks: opinion dynamics as the latent model of multi-agent trajectories',
    author='The BINN developers',
    license="BSD License",
    keywords=['opinion dynamics', 'relational inference', 'message passing', 'trajectory prediction',
              'bifurcation', 'autodiff'],
    classifiers=[],
    install_requires=requires,
    extras_require={'test': ['pytest']},
    entry_points={
        'console_scripts': [
            'binn=binn.main:start',
        ],
    },
    long_description="""Behavior-Inspired Neural Networks

    BINN learns multi-agent dynamics with a latent model built from nonlinear opinion dynamics. Message passing
    encoders map observed agent states to preferences and environmental inputs, the preferences evolve under
    opinion dynamics with learned damping, attention, self-reinforcement, and belief couplings, and a message
    passing decoder maps them back to states. The package also simulates the benchmark systems, trains the network
    with its own reverse-mode differentiation engine, and analyzes the learned dynamics (mutual exclusivity,
    bifurcations, hysteresis).
    """
)
