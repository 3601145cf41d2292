#!/usr/bin/env python
# -*- coding: utf-8 -*-

# data.sims.py
"""
Simulated multi-agent systems (pendulum, double pendulum, mass-spring, Kuramoto) integrated with RK4,
coarsened, and stored as Cartesian position/velocity states
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import logging
import numpy as np
from sklearn.model_selection import train_test_split
from binn.data.dataset import TrajectoryDataset
from binn.options import DefaultOptions, SYSTEMS
from binn.tools.errors import ConfigError, NonFiniteError, PreconditionError, ShapeError
from binn.tools.utilities import ordered_map, send_progress


logger = logging.getLogger(__name__)

MAX_RESAMPLE_ATTEMPTS = 10
CHUNK_SIZE = 256


class SimConfig:
    def __init__(self, kind, dt, steps, coarsening, n_agents=None, seed=0, coupling=None, omega=None, **constants):
        """
        :param kind: pendulum, double_pendulum, mass_spring, or kuramoto
        :param dt: integrator timestep
        :param steps: integrator frames per trajectory, including the initial state
        :param coarsening: keep every coarsening-th frame
        :param n_agents: agents (mass-spring and Kuramoto only; fixed at 1 and 2 for the pendulums)
        :param seed: root seed; trajectory i draws from the i-th spawned substream
        :param coupling: fixed coupling matrix K, sampled per trajectory when None
        :param omega: fixed intrinsic frequencies (Kuramoto), sampled per trajectory when None
        :param constants: overrides of g, l1, l2, m1, m2, spring_k, edge_prob, omega_min, omega_max,
                          angle_range, position_std, phase_std
        """
        defaults = DefaultOptions()
        self.kind = kind
        self.dt = float(dt)
        self.steps = int(steps)
        self.coarsening = int(coarsening)
        self.seed = int(seed)
        self.n_agents = int(n_agents if n_agents is not None else defaults.SIMULATION.get(kind, {}).get('n_agents', 1))
        self.constants = dict(defaults.PHYSICAL_CONSTANTS)
        self.constants.update({'angle_range': 0.5 * np.pi, 'position_std': 0.3, 'phase_std': 2. * np.pi})
        unknown = [key for key in constants if key not in self.constants]
        if unknown:
            raise ConfigError("Unknown simulation constants: %s" % ', '.join(unknown))
        self.constants.update(constants)
        self.coupling = None if coupling is None else np.asarray(coupling, dtype=np.float64)
        self.omega = None if omega is None else np.asarray(omega, dtype=np.float64)
        self.validate()

    @classmethod
    def preset(cls, kind, seed=0, **kwargs):
        """
        Integrator settings for a simulated system, with optional overrides
        """
        presets = DefaultOptions().SIMULATION
        if kind not in presets:
            raise ConfigError("Unknown system '%s', expected one of %s" % (kind, ', '.join(SYSTEMS)))
        options = dict(presets[kind])
        options.update(kwargs)
        return cls(kind, seed=seed, **options)

    def validate(self):
        if self.kind not in SYSTEMS:
            raise ConfigError("Unknown system '%s', expected one of %s" % (self.kind, ', '.join(SYSTEMS)))
        if self.dt <= 0:
            raise ConfigError("Integrator dt must be positive, got %s" % self.dt)
        if self.coarsening < 1 or self.steps < self.coarsening or self.steps % self.coarsening:
            raise ConfigError("Coarsening %d must divide steps %d" % (self.coarsening, self.steps))
        fixed_agents = {'pendulum': 1, 'double_pendulum': 2}
        if self.kind in fixed_agents and self.n_agents != fixed_agents[self.kind]:
            raise ConfigError("The %s system has %d agent(s), got n_agents=%d" %
                              (self.kind, fixed_agents[self.kind], self.n_agents))
        if self.n_agents < 1:
            raise ConfigError("n_agents must be positive")
        if self.coupling is not None:
            k = self.constants['spring_k']
            if self.coupling.shape != (self.n_agents, self.n_agents):
                raise ConfigError("Coupling matrix must be %d x %d" % (self.n_agents, self.n_agents))
            if not np.array_equal(self.coupling, self.coupling.T):
                raise ConfigError("Coupling matrix must be symmetric")
            if not np.all(np.isin(self.coupling, [0., k])):
                raise ConfigError("Coupling entries must be 0 or %s" % k)
        if self.omega is not None and self.omega.shape != (self.n_agents,):
            raise ConfigError("Intrinsic frequencies must have shape (%d,)" % self.n_agents)

    @property
    def frames(self):
        return self.steps // self.coarsening

    @property
    def dataset_dt(self):
        return self.dt * self.coarsening

    @property
    def generalized_dim(self):
        return {'pendulum': 2, 'double_pendulum': 4, 'mass_spring': 4 * self.n_agents,
                'kuramoto': self.n_agents}[self.kind]

    @property
    def stored_agents(self):
        return self.n_agents

    @property
    def state_dim(self):
        return 2 if self.kind == 'kuramoto' else 4

    def to_dict(self):
        return {'kind': self.kind, 'dt': self.dt, 'steps': self.steps, 'coarsening': self.coarsening,
                'n_agents': self.n_agents, 'seed': self.seed, 'constants': self.constants,
                'coupling': None if self.coupling is None else self.coupling.tolist(),
                'omega': None if self.omega is None else self.omega.tolist()}


def rk4_step(f, y, dt, check_finite=True):
    """
    Classical fourth-order Runge-Kutta step
    :param f: derivative function of the state
    :param y: state (any shape, batched states included)
    :param dt: timestep
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive, got %s" % dt)
    k1 = f(y)
    if check_finite and not np.all(np.isfinite(k1)):
        raise NonFiniteError("Non-finite derivative in RK4 step")
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6. * (k1 + 2. * k2 + 2. * k3 + k4)


def coarsen(frames, factor):
    """
    Keep frames 0, factor, 2 factor, ... along the first axis
    """
    frames = np.asarray(frames)
    if factor < 1 or len(frames) % factor:
        raise PreconditionError("Coarsening factor %s must divide the frame count %d" % (factor, len(frames)))
    return frames[::factor]


# ---------------------------------------------------------------------------------------------------------------
# Equations of motion on generalized coordinates (leading axes are batch axes)
# ---------------------------------------------------------------------------------------------------------------
def _pendulum(y, c):
    theta, theta_dot = y[..., 0], y[..., 1]
    return np.stack([theta_dot, -c['g'] / c['l1'] * np.sin(theta)], axis=-1)


def _double_pendulum(y, c):
    theta1, theta2, omega1, omega2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    m1, m2, l1, l2, g = c['m1'], c['m2'], c['l1'], c['l2'], c['g']
    delta = theta2 - theta1
    cos_d, sin_d = np.cos(delta), np.sin(delta)
    matrix = np.empty(y.shape[:-1] + (2, 2))
    matrix[..., 0, 0] = (m1 + m2) * l1
    matrix[..., 0, 1] = m2 * l2 * cos_d
    matrix[..., 1, 0] = l1 * cos_d
    matrix[..., 1, 1] = l2
    det = matrix[..., 0, 0] * matrix[..., 1, 1] - matrix[..., 0, 1] * matrix[..., 1, 0]
    if np.any(np.abs(det) < 1e-12):
        raise NonFiniteError("Singular double pendulum mass matrix")
    forcing = np.stack([m2 * l2 * omega2 ** 2 * sin_d - (m1 + m2) * g * np.sin(theta1),
                        -l1 * omega1 ** 2 * sin_d - g * np.sin(theta2)], axis=-1)
    accel = np.linalg.solve(matrix, forcing[..., np.newaxis])[..., 0]
    return np.concatenate([y[..., 2:4], accel], axis=-1)


def _mass_spring(y, K):
    n = K.shape[-1]
    r = y[..., :2 * n].reshape(y.shape[:-1] + (n, 2))
    v = y[..., 2 * n:]
    accel = -(K.sum(axis=-1)[..., np.newaxis] * r - K @ r)
    return np.concatenate([v, accel.reshape(y.shape[:-1] + (2 * n,))], axis=-1)


def _kuramoto(y, K, omega):
    phase_diff = y[..., :, np.newaxis] - y[..., np.newaxis, :]
    return omega + (K * np.sin(phase_diff)).sum(axis=-1)


def system_derivative(kind, y, cfg=None, coupling=None, omega=None):
    """
    :param kind: pendulum, double_pendulum, mass_spring, or kuramoto
    :param y: generalized state: (theta, theta_dot); (theta1, theta2, theta1_dot, theta2_dot);
              (positions [N x 2] flattened, velocities flattened); phases [N]
    :param cfg: supplies physical constants, defaults when None
    :param coupling: K [N x N] (or batched), required for mass_spring and kuramoto
    :param omega: intrinsic frequencies [N] (or batched), required for kuramoto
    :return: dy/dt
    """
    constants = cfg.constants if cfg is not None else DefaultOptions().PHYSICAL_CONSTANTS
    y = np.asarray(y, dtype=np.float64)
    if kind == 'pendulum':
        _check_dim(kind, y, 2)
        return _pendulum(y, constants)
    if kind == 'double_pendulum':
        _check_dim(kind, y, 4)
        return _double_pendulum(y, constants)
    if kind == 'mass_spring':
        _check_dim(kind, y, 4 * np.shape(coupling)[-1])
        return _mass_spring(y, np.asarray(coupling, dtype=np.float64))
    if kind == 'kuramoto':
        _check_dim(kind, y, np.shape(coupling)[-1])
        return _kuramoto(y, np.asarray(coupling, dtype=np.float64), np.asarray(omega, dtype=np.float64))
    raise ConfigError("Unknown system '%s'" % kind)


def _check_dim(kind, y, dim):
    if y.shape[-1] != dim:
        raise ShapeError("The %s state must have dimension %d, got %d" % (kind, dim, y.shape[-1]))


def system_energy(kind, y, cfg=None, coupling=None):
    """
    Total mechanical energy of the conservative systems (unit masses for mass-spring)
    """
    c = cfg.constants if cfg is not None else DefaultOptions().PHYSICAL_CONSTANTS
    y = np.asarray(y, dtype=np.float64)
    if kind == 'pendulum':
        theta, theta_dot = y[..., 0], y[..., 1]
        return 0.5 * c['l1'] ** 2 * theta_dot ** 2 - c['g'] * c['l1'] * np.cos(theta)
    if kind == 'double_pendulum':
        theta1, theta2, omega1, omega2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        m1, m2, l1, l2, g = c['m1'], c['m2'], c['l1'], c['l2'], c['g']
        kinetic = 0.5 * (m1 + m2) * l1 ** 2 * omega1 ** 2 + 0.5 * m2 * l2 ** 2 * omega2 ** 2 + \
            m2 * l1 * l2 * omega1 * omega2 * np.cos(theta1 - theta2)
        potential = -(m1 + m2) * g * l1 * np.cos(theta1) - m2 * g * l2 * np.cos(theta2)
        return kinetic + potential
    if kind == 'mass_spring':
        K = np.asarray(coupling, dtype=np.float64)
        n = K.shape[-1]
        r = y[..., :2 * n].reshape(y.shape[:-1] + (n, 2))
        v = y[..., 2 * n:]
        separation = np.sum((r[..., :, np.newaxis, :] - r[..., np.newaxis, :, :]) ** 2, axis=-1)
        # each pair appears twice in the double sum
        return 0.5 * np.sum(v ** 2, axis=-1) + 0.25 * np.sum(K * separation, axis=(-2, -1))
    raise ConfigError("Energy is not defined for system '%s'" % kind)


def total_momentum(y, n_agents):
    """
    Total momentum of a mass-spring state with unit masses
    """
    y = np.asarray(y, dtype=np.float64)
    v = y[..., 2 * n_agents:].reshape(y.shape[:-1] + (n_agents, 2))
    return v.sum(axis=-2)


# ---------------------------------------------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------------------------------------------
def _sample_coupling(rng, cfg):
    n = cfg.n_agents
    upper = np.triu(rng.random((n, n)) < cfg.constants['edge_prob'], k=1)
    return cfg.constants['spring_k'] * (upper | upper.T).astype(np.float64)


def _sample_trajectory_setup(rng, cfg):
    """
    Initial generalized state, coupling, and frequencies for one trajectory
    """
    c = cfg.constants
    n = cfg.n_agents
    coupling, omega = None, None
    if cfg.kind == 'pendulum':
        y0 = np.array([rng.uniform(-c['angle_range'], c['angle_range']), 0.])
    elif cfg.kind == 'double_pendulum':
        y0 = np.concatenate([rng.uniform(-c['angle_range'], c['angle_range'], 2), np.zeros(2)])
    elif cfg.kind == 'mass_spring':
        y0 = rng.normal(0., c['position_std'], 4 * n)
        coupling = _sample_coupling(rng, cfg) if cfg.coupling is None else cfg.coupling
    else:
        y0 = rng.normal(0., c['phase_std'], n)
        coupling = _sample_coupling(rng, cfg) if cfg.coupling is None else cfg.coupling
        omega = rng.uniform(c['omega_min'], c['omega_max'], n) if cfg.omega is None else cfg.omega
    return y0, coupling, omega


def to_stored_states(kind, y, cfg=None, coupling=None, omega=None):
    """
    Convert generalized coordinates [..., dim] to stored per-agent states [..., N_a, d]
    """
    c = cfg.constants if cfg is not None else DefaultOptions().PHYSICAL_CONSTANTS
    y = np.asarray(y, dtype=np.float64)
    if kind == 'pendulum':
        theta, theta_dot = y[..., 0], y[..., 1]
        l1 = c['l1']
        state = np.stack([l1 * np.sin(theta), -l1 * np.cos(theta),
                          l1 * np.cos(theta) * theta_dot, l1 * np.sin(theta) * theta_dot], axis=-1)
        return state[..., np.newaxis, :]
    if kind == 'double_pendulum':
        theta1, theta2, omega1, omega2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        l1, l2 = c['l1'], c['l2']
        x1, y1 = l1 * np.sin(theta1), -l1 * np.cos(theta1)
        vx1, vy1 = l1 * np.cos(theta1) * omega1, l1 * np.sin(theta1) * omega1
        x2, y2 = x1 + l2 * np.sin(theta2), y1 - l2 * np.cos(theta2)
        vx2, vy2 = vx1 + l2 * np.cos(theta2) * omega2, vy1 + l2 * np.sin(theta2) * omega2
        return np.stack([np.stack([x1, y1, vx1, vy1], axis=-1),
                         np.stack([x2, y2, vx2, vy2], axis=-1)], axis=-2)
    if kind == 'mass_spring':
        n = y.shape[-1] // 4
        r = y[..., :2 * n].reshape(y.shape[:-1] + (n, 2))
        v = y[..., 2 * n:].reshape(y.shape[:-1] + (n, 2))
        return np.concatenate([r, v], axis=-1)
    if kind == 'kuramoto':
        coupling, omega = np.asarray(coupling, dtype=np.float64), np.asarray(omega, dtype=np.float64)
        if y.ndim == 3 and coupling.ndim == 3:
            # per-trajectory parameters broadcast over frames
            coupling, omega = coupling[:, np.newaxis], omega[:, np.newaxis]
        return np.stack([y, _kuramoto(y, coupling, omega)], axis=-1)
    raise ConfigError("Unknown system '%s'" % kind)


def _integrate(cfg, y0, coupling, omega):
    """
    RK4 over a batch of trajectories, recording every coarsening-th frame
    :return: generalized frames [B x frames x dim]
    """
    if cfg.kind in ('mass_spring', 'kuramoto'):
        def f(y):
            return system_derivative(cfg.kind, y, cfg, coupling=coupling, omega=omega)
    else:
        def f(y):
            return system_derivative(cfg.kind, y, cfg)

    frames = np.empty((len(y0), cfg.frames, y0.shape[-1]))
    y = y0.copy()
    frames[:, 0] = y
    with np.errstate(all='ignore'):
        for step in range(1, cfg.steps - cfg.coarsening + 1):
            y = rk4_step(f, y, cfg.dt, check_finite=False)
            if step % cfg.coarsening == 0:
                frames[:, step // cfg.coarsening] = y
    return frames


def _generate_chunk(cfg, rngs):
    setups = [_sample_trajectory_setup(rng, cfg) for rng in rngs]
    rejected = 0
    for attempt in range(MAX_RESAMPLE_ATTEMPTS + 1):
        y0 = np.stack([s[0] for s in setups])
        coupling = np.stack([s[1] for s in setups]) if setups[0][1] is not None else None
        omega = np.stack([s[2] for s in setups]) if setups[0][2] is not None else None
        frames = _integrate(cfg, y0, coupling, omega)
        if cfg.kind == 'kuramoto':
            states = to_stored_states(cfg.kind, frames, cfg, coupling=coupling, omega=omega)
        else:
            states = to_stored_states(cfg.kind, frames, cfg)
        bad = np.flatnonzero(~np.all(np.isfinite(states.reshape(len(states), -1)), axis=1))
        if not bad.size:
            return states, rejected
        if attempt == MAX_RESAMPLE_ATTEMPTS:
            break
        rejected += bad.size
        for i in bad:
            setups[i] = _sample_trajectory_setup(rngs[i], cfg)
    raise NonFiniteError("Trajectories stayed non-finite after %d resampling attempts" % MAX_RESAMPLE_ATTEMPTS)


def generate_dataset(cfg, n_traj, workers=1, name=None):
    """
    :param cfg: simulation settings
    :type cfg: SimConfig
    :param n_traj: number of trajectories
    :param workers: chunks integrated in parallel; the result does not depend on the worker count
    :rtype: TrajectoryDataset
    """
    cfg.validate()
    if n_traj < 0:
        raise PreconditionError("n_traj must be nonnegative, got %s" % n_traj)
    streams = np.random.SeedSequence(cfg.seed).spawn(n_traj)
    rngs = [np.random.default_rng(stream) for stream in streams]
    chunks = [rngs[i:i + CHUNK_SIZE] for i in range(0, n_traj, CHUNK_SIZE)]

    def run(item):
        index, chunk = item
        result = _generate_chunk(cfg, chunk)
        send_progress('sims_progress', system=cfg.kind, done=min((index + 1) * CHUNK_SIZE, n_traj), total=n_traj)
        return result

    results = ordered_map(run, enumerate(chunks), workers=workers)
    rejected = sum(r[1] for r in results)
    if rejected:
        logger.warning("Resampled %d non-finite %s trajectories", rejected, cfg.kind)
    if results:
        data = np.concatenate([r[0] for r in results])
    else:
        data = np.zeros((0, cfg.frames, cfg.stored_agents, cfg.state_dim))
    ds = TrajectoryDataset(data, cfg.dataset_dt, name=name or cfg.kind)
    ds.n_rejected = rejected
    logger.info("Generated %s", ds)
    return ds


def generate_splits(cfg, n_train, n_val, n_test, workers=1):
    """
    Generate n_train + n_val + n_test trajectories and split them with a seeded shuffle
    :return: datasets keyed by 'train', 'val', 'test'
    :rtype: dict
    """
    total = n_train + n_val + n_test
    ds = generate_dataset(cfg, total, workers=workers)
    indices = np.arange(total)
    held_out = n_val + n_test
    if held_out and n_train:
        train_idx, rest_idx = train_test_split(indices, test_size=held_out, random_state=cfg.seed, shuffle=True)
    else:
        train_idx, rest_idx = (indices, indices[:0]) if not held_out else (indices[:0], indices)
    if n_val and n_test:
        val_idx, test_idx = train_test_split(rest_idx, test_size=n_test, random_state=cfg.seed, shuffle=True)
    else:
        val_idx, test_idx = (rest_idx, rest_idx[:0]) if n_val else (rest_idx[:0], rest_idx)
    return {'train': ds.subset(np.sort(train_idx), name='%s_train' % cfg.kind),
            'val': ds.subset(np.sort(val_idx), name='%s_val' % cfg.kind),
            'test': ds.subset(np.sort(test_idx), name='%s_test' % cfg.kind)}
