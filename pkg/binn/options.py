#!/usr/bin/env python
# -*- coding: utf-8 -*-

# options.py
"""
Default numerical options, simulation presets, and the JSON-backed training configuration
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
from copy import deepcopy
from os.path import isfile
from binn import __version__
from binn.tools.errors import ConfigError


COMM_VARIANTS = ('squared_distance', 'inverse_distance', 'learned_multiplier')
COMM_ALIASES = {'sqdist': 'squared_distance',
                'invdist': 'inverse_distance',
                'learned': 'learned_multiplier'}
SYSTEMS = ('pendulum', 'double_pendulum', 'mass_spring', 'kuramoto')


class DefaultOptions:
    """
    Constants shared across the package, plus per-system presets
    """
    def __init__(self):
        self.VERSION = __version__

        # Equilibrium search
        self.EQUILIBRIUM_TOL = 1e-8  # on the sup-norm of the rhs
        self.EQUILIBRIUM_DEDUPE_TOL = 1e-6
        self.NEWTON_SWITCH_TOL = 1e-4  # integration hands over to Newton below this residual
        self.NEWTON_MAX_ITER = 100
        self.INTEGRATION_MAX_STEPS = 1000000
        self.INTEGRATION_DT = 0.05
        self.JACOBIAN_STEP = 1e-6
        self.STABILITY_TOL = 1e-9  # eigenvalues within this of 0 are decided by integration

        # Mutual exclusivity
        self.EXCLUSIVITY_RHO_MAX = -0.95

        # Model
        self.INVERSE_DISTANCE_EPS = 1e-6
        self.INIT_D = 0.5
        self.INIT_U = 1.0
        self.INIT_ALPHA = 0.5
        self.INIT_BELIEF_STD = 0.1

        # Adam
        self.ADAM_BETA1 = 0.9
        self.ADAM_BETA2 = 0.999
        self.ADAM_EPS = 1e-8

        # Dataset splits
        self.FULL_SCALE_SPLITS = (50000, 12500, 12500)
        self.DESK_SCALE_SPLITS = (2000, 500, 500)
        self.DESK_SCALE_EPOCHS = 100

        # Integrator settings per simulated system
        self.SIMULATION = {'pendulum': {'dt': 1e-3, 'steps': 5000, 'coarsening': 100, 'n_agents': 1},
                           'double_pendulum': {'dt': 5e-4, 'steps': 5000, 'coarsening': 100, 'n_agents': 2},
                           'mass_spring': {'dt': 5e-4, 'steps': 5000, 'coarsening': 100, 'n_agents': 5},
                           'kuramoto': {'dt': 5e-4, 'steps': 500, 'coarsening': 10, 'n_agents': 5}}

        self.PHYSICAL_CONSTANTS = {'g': 9.81, 'l1': 1., 'l2': 1., 'm1': 1., 'm2': 1.,
                                   'spring_k': 2.5, 'edge_prob': 0.5,
                                   'omega_min': 1., 'omega_max': 10.}

        # Training hyperparameters per system
        self.HYPERPARAMETERS = {
            'pendulum': {'latent_dim': 2, 'epochs': 500, 'batch_size': 256, 'activation': 'relu', 'lr': 1e-3,
                         'hidden': 64, 'scheduler_step': None, 'scheduler_gamma': 1.},
            'double_pendulum': {'latent_dim': 2, 'epochs': 500, 'batch_size': 256, 'activation': 'elu', 'lr': 1e-3,
                                'hidden': 64, 'scheduler_step': None, 'scheduler_gamma': 1.},
            'mass_spring': {'latent_dim': 4, 'epochs': 1000, 'batch_size': 256, 'activation': 'tanh', 'lr': 1e-3,
                            'hidden': 128, 'scheduler_step': 200, 'scheduler_gamma': 0.25},
            'kuramoto': {'latent_dim': 2, 'epochs': 1000, 'batch_size': 256, 'activation': 'tanh', 'lr': 1e-3,
                         'hidden': 128, 'scheduler_step': 200, 'scheduler_gamma': 0.25},
            'trajnet': {'latent_dim': 4, 'epochs': 1000, 'batch_size': 256, 'activation': 'tanh', 'lr': 5e-4,
                        'hidden': 128, 'scheduler_step': 200, 'scheduler_gamma': 0.25}}


class TrainConfig:
    """
    Training hyperparameters; serialized as JSON alongside runs and inside checkpoints
    """
    defaults = {'system': 'pendulum',
                'epochs': 500,
                'batch_size': 256,
                'lr': 1e-3,
                'scheduler_step': None,
                'scheduler_gamma': 1.,
                'activation': 'relu',
                'hidden': 64,
                'latent_dim': 2,
                'gamma1': 1.,
                'gamma2': 1.,
                'seed': 0,
                'comm': 'squared_distance',
                'epsilon': 1e-6,
                'teacher_forcing': False,
                'grad_clip': None,
                'workers': 1,
                'train_path': None,
                'val_path': None}

    def __init__(self, **kwargs):
        for key, value in deepcopy(self.defaults).items():
            setattr(self, key, value)
        for key, value in kwargs.items():
            self.set_option(key, value)

    def __repr__(self):
        return 'TrainConfig(%s)' % ', '.join('%s=%r' % item for item in self.to_dict().items())

    def __eq__(self, other):
        return isinstance(other, TrainConfig) and self.to_dict() == other.to_dict()

    @classmethod
    def for_system(cls, system, **kwargs):
        """
        Start from the preset hyperparameters of a system, then apply overrides
        :param system: pendulum, double_pendulum, mass_spring, kuramoto, or trajnet
        :type system: str
        :rtype: TrainConfig
        """
        presets = DefaultOptions().HYPERPARAMETERS
        if system not in presets:
            raise ConfigError("No preset hyperparameters for system '%s'" % system)
        options = dict(presets[system])
        options['system'] = system
        options.update(kwargs)
        return cls(**options)

    def set_option(self, key, value):
        if key not in self.defaults:
            raise ConfigError("Unknown configuration key '%s'" % key)
        if key == 'comm':
            value = COMM_ALIASES.get(value, value)
        setattr(self, key, value)

    def update(self, overrides):
        """
        Apply overrides, skipping None values (unset CLI flags)
        :type overrides: dict
        """
        for key, value in overrides.items():
            if value is not None:
                self.set_option(key, value)

    def to_dict(self):
        return {key: getattr(self, key) for key in self.defaults}

    def validate(self):
        for key in ['epochs', 'batch_size', 'hidden', 'latent_dim', 'workers']:
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError("'%s' must be a positive integer, got %r" % (key, value))
        if self.lr < 0:
            raise ConfigError("'lr' must be nonnegative, got %r" % self.lr)
        if self.scheduler_step is not None and (not isinstance(self.scheduler_step, int) or self.scheduler_step < 1):
            raise ConfigError("'scheduler_step' must be a positive integer or null, got %r" % self.scheduler_step)
        if not 0 < self.scheduler_gamma <= 1:
            raise ConfigError("'scheduler_gamma' must be in (0, 1], got %r" % self.scheduler_gamma)
        if self.activation not in ('tanh', 'relu', 'elu'):
            raise ConfigError("'activation' must be tanh, relu, or elu, got %r" % self.activation)
        if self.comm not in COMM_VARIANTS:
            raise ConfigError("'comm' must be one of %s, got %r" % (', '.join(COMM_VARIANTS), self.comm))
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("Loss weights gamma1 and gamma2 must be nonnegative")
        if self.epsilon <= 0:
            raise ConfigError("'epsilon' must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("'grad_clip' must be positive or null")
        return self

    def save(self, abs_file_path):
        with open(abs_file_path, 'w') as document:
            json.dump(self.to_dict(), document, indent=2, sort_keys=True)

    @classmethod
    def load(cls, abs_file_path):
        if not isfile(abs_file_path):
            raise ConfigError("Config file not found: %s" % abs_file_path)
        try:
            with open(abs_file_path, 'r') as document:
                options = json.load(document)
        except ValueError as e:
            raise ConfigError("Could not parse config file %s: %s" % (abs_file_path, e))
        if not isinstance(options, dict):
            raise ConfigError("Config file %s must contain a JSON object" % abs_file_path)
        return cls(**options)
