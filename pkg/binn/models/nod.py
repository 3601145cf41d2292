#!/usr/bin/env python
# -*- coding: utf-8 -*-

# models.nod.py
"""
Nonlinear opinion dynamics: right-hand sides, Euler stepping, equilibrium search, bifurcation and
hysteresis sweeps, and mutual exclusivity detection with the matching dimensionality reduction
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import logging
from collections import namedtuple
import numpy as np
from scipy import linalg
from binn.options import DefaultOptions
from binn.tools.diffcore import get_activation_function
from binn.tools.errors import ConvergenceError, NonFiniteError, PreconditionError, ShapeError
from binn.tools.stats import exclusivity_scale, pearson, pooled_pair
from binn.tools.utilities import ordered_map, read_csv, send_progress, write_csv


logger = logging.getLogger(__name__)
OPTIONS = DefaultOptions()

SWEEP_CSV_COLUMNS = ['sweep_value', 'equilibrium', 'stable']

Equilibrium = namedtuple('Equilibrium', ['z', 'stable', 'max_real_eigenvalue'])


def _check_shape(name, array, shape):
    if array.shape != tuple(shape):
        raise ShapeError("'%s' must have shape %s, got %s" % (name, tuple(shape), array.shape))


def _check_zero_diagonal(name, matrix):
    if matrix.size and np.any(np.diag(matrix) != 0.):
        raise PreconditionError("'%s' must have a zero diagonal" % name)


def _check_nonnegative(**arrays):
    for name, array in arrays.items():
        if np.any(array < 0.):
            raise PreconditionError("'%s' must be elementwise nonnegative" % name)


# ---------------------------------------------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------------------------------------------
def nod_rhs_full(z, p, saturation='tanh'):
    """
    Opinion dynamics with inter-agent and inter-category coupling
    :param z: preferences [N_a x N_o], or a stack [... x N_a x N_o]
    :type z: np.ndarray
    :param p: parameters
    :type p: NodParams
    :param saturation: tanh, relu, or elu
    :return: dz/dt, same shape as z
    :rtype: np.ndarray
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-2:] != (p.n_agents, p.n_options):
        raise ShapeError("Preferences must be [%d x %d], got %s" % (p.n_agents, p.n_options, z.shape))
    S = get_activation_function(saturation)
    agent_coupling = p.A_a @ z
    argument = p.alpha * z + agent_coupling + z @ p.A_o.T + agent_coupling @ p.A_o.T
    return -p.d * z + S(p.u[:, np.newaxis] * argument) + p.b


def nod_rhs_reduced(z, d, u, alpha_tilde, a_tilde, b, saturation='tanh'):
    """
    Decoupled dynamics of one category of a mutually exclusive pair
    :param z: preferences [N_a] (or a stack [... x N_a])
    :param a_tilde: effective communication matrix [N_a x N_a]; None or empty means no coupling
    :return: dz/dt, same shape as z
    """
    z = np.asarray(z, dtype=np.float64)
    d, u, alpha_tilde, b = [np.asarray(v, dtype=np.float64) for v in (d, u, alpha_tilde, b)]
    n = z.shape[-1]
    for name, value in (('d', d), ('u', u), ('alpha_tilde', alpha_tilde), ('b', b)):
        if value.shape not in [(), (n,)]:
            raise ShapeError("'%s' must have shape (%d,), got %s" % (name, n, value.shape))
    argument = alpha_tilde * z
    if a_tilde is not None and np.size(a_tilde):
        a_tilde = np.asarray(a_tilde, dtype=np.float64)
        _check_shape('a_tilde', a_tilde, (n, n))
        argument = argument + z @ a_tilde.T
    return -d * z + get_activation_function(saturation)(u * argument) + b


def pitchfork_rhs(z, u):
    """
    Supercritical pitchfork normal form, stable branches at +/- sqrt(u) for u > 0
    """
    return u * z - z ** 3


# ---------------------------------------------------------------------------------------------------------------
# Dynamical systems sharing rhs / state_shape / with_parameter
# ---------------------------------------------------------------------------------------------------------------
class NodParams:
    def __init__(self, d, u, alpha, A_o, A_a, b, dt=0.1, saturation='tanh'):
        """
        Parameters of the full opinion dynamics
        :param d: damping [N_a x N_o]
        :param u: attention [N_a]
        :param alpha: self-reinforcement [N_a x N_o]
        :param A_o: belief matrix [N_o x N_o], zero diagonal
        :param A_a: communication matrix [N_a x N_a], zero diagonal
        :param b: environmental input [N_a x N_o]
        :param dt: Euler timestep
        :param saturation: saturation function kind
        """
        self.d = np.array(d, dtype=np.float64)
        self.u = np.array(u, dtype=np.float64).reshape(-1)
        self.alpha = np.array(alpha, dtype=np.float64)
        self.A_o = np.array(A_o, dtype=np.float64)
        self.A_a = np.array(A_a, dtype=np.float64)
        self.b = np.array(b, dtype=np.float64)
        self.dt = float(dt)
        self.saturation = saturation
        self.validate()

    def validate(self):
        n_agents, n_options = self.n_agents, self.n_options
        _check_shape('u', self.u, (n_agents,))
        _check_shape('alpha', self.alpha, (n_agents, n_options))
        _check_shape('A_o', self.A_o, (n_options, n_options))
        _check_shape('A_a', self.A_a, (n_agents, n_agents))
        _check_shape('b', self.b, (n_agents, n_options))
        _check_nonnegative(d=self.d, u=self.u, alpha=self.alpha)
        _check_zero_diagonal('A_o', self.A_o)
        _check_zero_diagonal('A_a', self.A_a)
        if self.dt <= 0:
            raise PreconditionError("dt must be positive, got %s" % self.dt)

    @classmethod
    def uniform(cls, n_agents, n_options, d=1., u=1., alpha=1., A_o=None, A_a=None, b=0., dt=0.1, **kwargs):
        """
        Build parameters from scalars (or arrays) broadcast to the expected shapes
        """
        shape = (n_agents, n_options)
        A_o = np.zeros((n_options, n_options)) if A_o is None else A_o
        A_a = np.zeros((n_agents, n_agents)) if A_a is None else A_a
        return cls(np.broadcast_to(d, shape), np.broadcast_to(u, (n_agents,)), np.broadcast_to(alpha, shape),
                   A_o, A_a, np.broadcast_to(b, shape), dt=dt, **kwargs)

    @property
    def n_agents(self):
        return self.d.shape[0] if self.d.ndim == 2 else 0

    @property
    def n_options(self):
        return self.d.shape[1] if self.d.ndim == 2 else 0

    @property
    def state_shape(self):
        return self.n_agents, self.n_options

    @property
    def dimension(self):
        return self.n_agents * self.n_options

    def rhs(self, z):
        return nod_rhs_full(z, self, saturation=self.saturation)

    def with_parameter(self, name, value):
        """
        Copy with attention ('u') or environmental input ('b') replaced; scalars are broadcast
        """
        kwargs = {'d': self.d, 'u': self.u, 'alpha': self.alpha, 'A_o': self.A_o, 'A_a': self.A_a, 'b': self.b}
        if name == 'u':
            kwargs['u'] = np.broadcast_to(value, self.u.shape)
        elif name == 'b':
            kwargs['b'] = np.broadcast_to(value, self.b.shape)
        else:
            raise PreconditionError("Sweep parameter must be 'u' or 'b', got '%s'" % name)
        return NodParams(dt=self.dt, saturation=self.saturation, **kwargs)


class ReducedNodParams:
    def __init__(self, d, u, alpha_tilde, a_tilde, b, dt=0.1, saturation='tanh'):
        """
        Parameters of the decoupled single-category dynamics; every vector is [N_a]
        """
        self.d = np.array(d, dtype=np.float64).reshape(-1)
        n = self.d.size
        self.u = np.array(np.broadcast_to(u, (n,)), dtype=np.float64)
        self.alpha_tilde = np.array(np.broadcast_to(alpha_tilde, (n,)), dtype=np.float64)
        self.a_tilde = np.zeros((n, n)) if a_tilde is None or not np.size(a_tilde) else \
            np.array(a_tilde, dtype=np.float64)
        self.b = np.array(np.broadcast_to(b, (n,)), dtype=np.float64)
        self.dt = float(dt)
        self.saturation = saturation
        _check_shape('a_tilde', self.a_tilde, (n, n))
        _check_nonnegative(d=self.d, u=self.u)
        _check_zero_diagonal('a_tilde', self.a_tilde)
        if self.dt <= 0:
            raise PreconditionError("dt must be positive, got %s" % self.dt)

    @property
    def state_shape(self):
        return self.d.size,

    @property
    def dimension(self):
        return self.d.size

    def rhs(self, z):
        return nod_rhs_reduced(z, self.d, self.u, self.alpha_tilde, self.a_tilde, self.b, self.saturation)

    def with_parameter(self, name, value):
        kwargs = {'d': self.d, 'u': self.u, 'alpha_tilde': self.alpha_tilde, 'a_tilde': self.a_tilde, 'b': self.b}
        if name not in ('u', 'b'):
            raise PreconditionError("Sweep parameter must be 'u' or 'b', got '%s'" % name)
        kwargs[name] = value
        return ReducedNodParams(dt=self.dt, saturation=self.saturation, **kwargs)


class PitchforkSystem:
    def __init__(self, u, b=0., dt=0.05):
        """
        Pitchfork normal form with an additive forcing term b
        """
        self.u = float(u)
        self.b = float(b)
        self.dt = float(dt)

    state_shape = (1,)
    dimension = 1

    def rhs(self, z):
        return pitchfork_rhs(np.asarray(z, dtype=np.float64), self.u) + self.b

    def with_parameter(self, name, value):
        if name not in ('u', 'b'):
            raise PreconditionError("Sweep parameter must be 'u' or 'b', got '%s'" % name)
        kwargs = {'u': self.u, 'b': self.b, name: value}
        return PitchforkSystem(dt=self.dt, **kwargs)


def reduce_params(p, c):
    """
    Reduce a two-category system whose preferences satisfy z_i2 = -c z_i1 to the dynamics of category 1
    :param p: parameters with N_o = 2
    :type p: NodParams
    :param c: positive scale relating the two categories
    :type c: float
    :rtype: ReducedNodParams
    """
    if p.n_options != 2:
        raise PreconditionError("reduce_params requires exactly 2 categories, got %d" % p.n_options)
    if p.A_o[0, 1] > 0 or p.A_o[1, 0] > 0:
        raise PreconditionError("Belief couplings must be nonpositive for a mutually exclusive pair, got %s and %s"
                                % (p.A_o[0, 1], p.A_o[1, 0]))
    if c <= 0:
        raise PreconditionError("Exclusivity scale c must be positive, got %s" % c)
    factor = 1. - c * p.A_o[0, 1]
    return ReducedNodParams(d=p.d[:, 0], u=p.u, alpha_tilde=p.alpha[:, 0] - c * p.A_o[0, 1],
                            a_tilde=p.A_a * factor, b=p.b[:, 0], dt=p.dt, saturation=p.saturation)


# ---------------------------------------------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------------------------------------------
def euler_step(z, p, rhs=None):
    """
    :param z: current state
    :param p: object with a dt attribute (and rhs when rhs is None), or the timestep itself
    :param rhs: callable returning dz/dt
    :return: z + rhs(z) * dt
    """
    dt = float(p) if np.isscalar(p) else p.dt
    if dt <= 0:
        raise PreconditionError("dt must be positive, got %s" % dt)
    rhs = p.rhs if rhs is None else rhs
    z_next = np.asarray(z, dtype=np.float64) + np.asarray(rhs(z)) * dt
    if not np.all(np.isfinite(z_next)):
        raise NonFiniteError("Non-finite state produced by an Euler step")
    return z_next


def simulate(system, z0, steps, dt=None):
    """
    Euler trace including the initial state
    :return: [steps + 1, *state_shape]
    """
    dt = system.dt if dt is None else dt
    trace = np.empty((steps + 1,) + np.shape(z0))
    trace[0] = z0
    for step in range(steps):
        try:
            trace[step + 1] = euler_step(trace[step], dt, system.rhs)
        except NonFiniteError as e:
            e.step = step
            raise
    return trace


def numerical_jacobian(rhs, z, h=OPTIONS.JACOBIAN_STEP):
    """
    Central difference Jacobian of a flat-vector function
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    jacobian = np.empty((z.size, z.size))
    for i in range(z.size):
        shift = np.zeros(z.size)
        shift[i] = h
        jacobian[:, i] = (np.asarray(rhs(z + shift)).reshape(-1) - np.asarray(rhs(z - shift)).reshape(-1)) / (2. * h)
    return jacobian


def _flat_rhs(system):
    shape = tuple(system.state_shape)

    def rhs(v):
        v = np.asarray(v, dtype=np.float64)
        batch = v.shape[:-1]
        return np.asarray(system.rhs(v.reshape(batch + shape))).reshape(batch + (-1,))

    return rhs


def _newton(rhs, z, tol, max_iter=OPTIONS.NEWTON_MAX_ITER):
    """
    :return: the root, or None when the residual does not fall below tol
    """
    z = np.array(z, dtype=np.float64)
    for _ in range(max_iter):
        residual = rhs(z)
        jacobian = numerical_jacobian(rhs, z)
        step = linalg.lstsq(jacobian, -residual)[0]
        z = z + step
        if not np.all(np.isfinite(z)):
            return None
        if np.max(np.abs(step)) < 1e-12:
            break
    if np.max(np.abs(rhs(z))) < tol:
        return z
    return None


def _integrate_batch(rhs, starts, dt, max_steps, tol):
    """
    Forward Euler from every start until the residual falls below tol
    :return: final states and a mask of the starts that got there
    """
    z = np.array(starts, dtype=np.float64)
    active = np.ones(len(z), dtype=bool)
    converged = np.zeros(len(z), dtype=bool)
    for _ in range(max_steps):
        if not active.any():
            break
        residual = rhs(z[active])
        done = np.max(np.abs(residual), axis=1) < tol
        index = np.flatnonzero(active)
        converged[index[done]] = True
        z[index[~done]] += dt * residual[~done]
        escaped = ~np.all(np.isfinite(z), axis=1) | (np.max(np.abs(z), axis=1) > 1e6)
        active &= ~converged & ~escaped
    return z, converged


def _converge(rhs, z, dt, max_steps, tol):
    """
    Integrate to the Newton hand-over residual, then polish
    """
    z, converged = _integrate_batch(rhs, [z], dt, max_steps, OPTIONS.NEWTON_SWITCH_TOL)
    if not converged[0]:
        return None
    return _newton(rhs, z[0], tol)


def default_grid(dimension, n=25, radius=3., seed=0):
    if dimension == 1:
        return np.linspace(-radius, radius, n).reshape(-1, 1)
    points = np.random.default_rng(seed).uniform(-radius, radius, (4 * n, dimension))
    return np.vstack([np.zeros((1, dimension)), points])


def find_equilibria(system, grid=None, tol=OPTIONS.EQUILIBRIUM_TOL, max_steps=OPTIONS.INTEGRATION_MAX_STEPS,
                    dt=None):
    """
    Locate equilibria from a grid of starting points: forward integration reaches the stable ones,
    Newton iteration from the raw grid points reaches the unstable ones
    :param system: object with rhs, state_shape, and dt (NodParams, ReducedNodParams, PitchforkSystem)
    :param grid: starting points [G x dimension] (or [G] for 1-D systems)
    :param tol: sup-norm residual accepted as an equilibrium
    :param max_steps: forward integration cap per starting point
    :param dt: integration step, the system's dt by default
    :return: equilibria sorted by their first component
    :rtype: list
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive, got %s" % tol)
    rhs = _flat_rhs(system)
    dimension = int(np.prod(system.state_shape))
    grid = default_grid(dimension) if grid is None else np.asarray(grid, dtype=np.float64).reshape(-1, dimension)
    dt = dt or getattr(system, 'dt', None) or OPTIONS.INTEGRATION_DT

    candidates = []
    integrated, converged = _integrate_batch(rhs, grid, dt, max_steps, OPTIONS.NEWTON_SWITCH_TOL)
    for z in integrated[converged]:
        root = _newton(rhs, z, tol)
        if root is not None:
            candidates.append((root, True))
    for z in grid:
        root = _newton(rhs, z, tol)
        if root is not None:
            candidates.append((root, False))

    equilibria = []
    for root, reached in candidates:
        duplicate = [i for i, (other, _) in enumerate(equilibria)
                     if np.max(np.abs(other - root)) < OPTIONS.EQUILIBRIUM_DEDUPE_TOL]
        if duplicate:
            if reached:
                equilibria[duplicate[0]] = (equilibria[duplicate[0]][0], True)
        else:
            equilibria.append((root, reached))

    if not equilibria:
        raise ConvergenceError("No equilibrium found from %d starting points" % len(grid))

    results = []
    for root, reached in sorted(equilibria, key=lambda item: tuple(item[0])):
        eigenvalue = float(np.max(linalg.eigvals(numerical_jacobian(rhs, root)).real))
        if abs(eigenvalue) <= OPTIONS.STABILITY_TOL:
            stable = reached
        else:
            stable = eigenvalue < 0
        results.append(Equilibrium(root.reshape(system.state_shape), bool(stable), eigenvalue))
    return results


# ---------------------------------------------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------------------------------------------
class BifurcationResult:
    def __init__(self, parameter, sweep_values, equilibria):
        """
        Equilibria of a system over a sweep of attention ('u') or environmental input ('b')
        :param parameter: 'u' or 'b'
        :param sweep_values: swept values, ascending
        :param equilibria: one list of Equilibrium per sweep value
        """
        self.parameter = parameter
        self.sweep_values = np.asarray(sweep_values, dtype=np.float64)
        self.equilibria = equilibria

    @property
    def counts(self):
        return np.array([len(e) for e in self.equilibria])

    @property
    def u_star(self):
        """
        Smallest swept attention with at least three equilibria
        """
        if self.parameter != 'u':
            return None
        multiple = np.flatnonzero(self.counts >= 3)
        return float(self.sweep_values[multiple[0]]) if multiple.size else None

    @property
    def fold_points(self):
        """
        Swept values at which the equilibrium count changes (first value with the new count)
        """
        counts = self.counts
        return [float(self.sweep_values[i]) for i in range(1, len(counts)) if counts[i] != counts[i - 1]]

    def rows(self, component=0):
        rows = []
        for value, equilibria in zip(self.sweep_values, self.equilibria):
            for equilibrium in equilibria:
                rows.append((float(value), float(np.asarray(equilibrium.z).reshape(-1)[component]),
                             int(equilibrium.stable)))
        return rows


def bifurcation_sweep(system, parameter='u', start=-1., stop=1., resolution=101, grid=None,
                      tol=OPTIONS.EQUILIBRIUM_TOL, max_steps=OPTIONS.INTEGRATION_MAX_STEPS, workers=1):
    """
    :param system: template system; the swept parameter is replaced at every sweep value
    :param parameter: 'u' or 'b'
    :param resolution: number of sweep values, at least 2
    :param workers: parallel sweep values, results stay in sweep order
    :rtype: BifurcationResult
    """
    if resolution < 2:
        raise PreconditionError("Sweep resolution must be at least 2, got %s" % resolution)
    values = np.linspace(start, stop, int(resolution))

    def solve(item):
        index, value = item
        equilibria = find_equilibria(system.with_parameter(parameter, value), grid=grid, tol=tol,
                                     max_steps=max_steps)
        send_progress('sweep_progress', index=index, total=len(values), value=float(value),
                      count=len(equilibria))
        return equilibria

    equilibria = ordered_map(solve, enumerate(values), workers=workers)
    result = BifurcationResult(parameter, values, equilibria)
    logger.info("Swept %s over [%g, %g]: u_star=%s, fold points=%s",
                parameter, start, stop, result.u_star, result.fold_points)
    return result


class HysteresisResult:
    def __init__(self, b_values, forward, backward):
        """
        Equilibrium traces of an upward then downward sweep of the environmental input
        :param forward: states reached sweeping b upward [n x *state_shape]
        :param backward: states reached sweeping b downward, stored in ascending b order
        """
        self.b_values = np.asarray(b_values, dtype=np.float64)
        self.forward = np.asarray(forward)
        self.backward = np.asarray(backward)

    def difference(self):
        n = len(self.b_values)
        return np.max(np.abs(self.forward.reshape(n, -1) - self.backward.reshape(n, -1)), axis=1)

    def rows(self, component=0):
        n = len(self.b_values)
        forward, backward = self.forward.reshape(n, -1), self.backward.reshape(n, -1)
        return [(float(b), float(f), float(k)) for b, f, k in
                zip(self.b_values, forward[:, component], backward[:, component])]


def hysteresis_sweep(system, start=-2., stop=2., resolution=201, steps_per_b=200000, z0=None,
                     tol=OPTIONS.EQUILIBRIUM_TOL, dt=None):
    """
    Sweep b upward then downward, warm-starting each equilibrium from the previous one
    :param steps_per_b: integration cap per sweep value
    :param z0: initial state, zeros by default
    :rtype: HysteresisResult
    """
    if resolution < 2:
        raise PreconditionError("Sweep resolution must be at least 2, got %s" % resolution)
    b_values = np.linspace(start, stop, int(resolution))
    shape = tuple(system.state_shape)
    dt = system.dt if dt is None else dt
    z = np.zeros(int(np.prod(shape))) if z0 is None else np.asarray(z0, dtype=np.float64).reshape(-1)

    def trace(values):
        nonlocal z
        states = []
        for b in values:
            rhs = _flat_rhs(system.with_parameter('b', b))
            root = _converge(rhs, z, dt, steps_per_b, tol)
            if root is None:
                raise ConvergenceError("Hysteresis sweep did not converge at b=%g" % b)
            z = root
            states.append(root.reshape(shape))
        return states

    forward = trace(b_values)
    backward = trace(b_values[::-1])[::-1]
    return HysteresisResult(b_values, forward, backward)


def hysteresis_width(result, tol=1e-6):
    """
    Width in b of the interval where the two sweep directions disagree, with half a grid cell on each edge
    """
    differing = np.flatnonzero(result.difference() > tol)
    if not differing.size:
        return 0.
    step = result.b_values[1] - result.b_values[0]
    return float(result.b_values[differing[-1]] - result.b_values[differing[0]] + step)


def write_sweep_csv(result, abs_file_path, component=0):
    write_csv(abs_file_path, SWEEP_CSV_COLUMNS, result.rows(component=component))


def read_sweep_csv(abs_file_path, parameter='u'):
    """
    Read a sweep CSV back as a BifurcationResult of scalar equilibria
    """
    table = read_csv(abs_file_path, required_columns=SWEEP_CSV_COLUMNS)
    values, equilibria = [], []
    for value, group in table.groupby('sweep_value', sort=True):
        values.append(float(value))
        equilibria.append([Equilibrium(np.array([row.equilibrium]), bool(row.stable), np.nan)
                           for row in group.itertuples()])
    return BifurcationResult(parameter, values, equilibria)


# ---------------------------------------------------------------------------------------------------------------
# Mutual exclusivity
# ---------------------------------------------------------------------------------------------------------------
class ExclusivityReport:
    def __init__(self, pair, c, rho, beliefs, rho_max=OPTIONS.EXCLUSIVITY_RHO_MAX):
        """
        :param pair: category indices (j, l)
        :param c: least squares scale with z_j ~ -c z_l
        :param rho: pooled Pearson correlation of z_j and z_l
        :param beliefs: (A_o[j, l], A_o[l, j])
        """
        self.pair = tuple(int(i) for i in pair)
        self.c = float(c)
        self.rho = float(rho)
        self.beliefs = tuple(float(v) for v in beliefs)
        self.verdict = bool(self.rho <= rho_max and self.beliefs[0] <= 0 and self.beliefs[1] <= 0)

    def __repr__(self):
        return "ExclusivityReport(pair=%s, c=%.6g, rho=%.6g, beliefs=%s, verdict=%s)" % \
               (self.pair, self.c, self.rho, self.beliefs, self.verdict)

    def to_dict(self):
        return {'pair': list(self.pair), 'c': self.c, 'rho': self.rho, 'beliefs': list(self.beliefs),
                'verdict': self.verdict}


def detect_mutual_exclusivity(z_trace, A_o, pairs=None):
    """
    :param z_trace: preferences [T x N_a x N_o], T >= 2
    :param A_o: belief matrix [N_o x N_o]
    :param pairs: category pairs to test, all j < l by default
    :return: one report per pair
    :rtype: list
    """
    z_trace = np.asarray(z_trace, dtype=np.float64)
    A_o = np.asarray(A_o, dtype=np.float64)
    if z_trace.ndim != 3:
        raise ShapeError("Preference trace must be [T x N_a x N_o], got shape %s" % (z_trace.shape,))
    if z_trace.shape[0] < 2:
        raise PreconditionError("Exclusivity detection needs at least 2 timesteps, got %d" % z_trace.shape[0])
    n_options = z_trace.shape[2]
    _check_shape('A_o', A_o, (n_options, n_options))
    if pairs is None:
        pairs = [(j, l) for j in range(n_options) for l in range(j + 1, n_options)]

    reports = []
    for j, l in pairs:
        z_j, z_l = pooled_pair(z_trace, j, l)
        rho = pearson(z_j, z_l)
        reports.append(ExclusivityReport((j, l), exclusivity_scale(z_j, z_l), rho, (A_o[j, l], A_o[l, j])))
    return reports
