#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tests.test_nod.py
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import numpy as np
import pytest
from binn.models.nod import NodParams, PitchforkSystem, ReducedNodParams, bifurcation_sweep, \
    detect_mutual_exclusivity, euler_step, find_equilibria, hysteresis_sweep, hysteresis_width, nod_rhs_full, \
    nod_rhs_reduced, pitchfork_rhs, read_sweep_csv, reduce_params, simulate, write_sweep_csv
from binn.tools.errors import DegenerateTraceError, PreconditionError, ShapeError


def exclusive_pair_params(b=0.3):
    """Two agents, two categories, symmetric negative beliefs and equal columns"""
    d = np.array([[1., 1.], [0.6, 0.6]])
    alpha = np.array([[0.8, 0.8], [1.2, 1.2]])
    A_o = np.array([[0., -0.5], [-0.5, 0.]])
    A_a = np.array([[0., 0.7], [0.3, 0.]])
    b = np.array([[b, -b], [-0.2, 0.2]])
    return NodParams(d, [1.5, 0.8], alpha, A_o, A_a, b, dt=0.1)


def test_full_rhs_hand_computed():
    p = NodParams.uniform(1, 1, d=1., u=1., alpha=0., b=0.5)
    np.testing.assert_allclose(nod_rhs_full(np.zeros((1, 1)), p), [[0.5]])
    p = NodParams.uniform(1, 2, d=2., u=1., alpha=1., A_o=[[0., 1.], [0., 0.]])
    z = np.array([[0.5, 0.25]])
    expected = -2. * z + np.tanh(np.array([[0.5 + 0.25, 0.25]]))
    np.testing.assert_allclose(nod_rhs_full(z, p), expected)


def test_full_rhs_batched():
    p = exclusive_pair_params()
    z = np.random.default_rng(0).normal(size=(5, 2, 2))
    stacked = nod_rhs_full(z, p)
    for k in range(5):
        np.testing.assert_allclose(stacked[k], nod_rhs_full(z[k], p))


def test_rhs_shape_error():
    with pytest.raises(ShapeError):
        nod_rhs_full(np.zeros((3, 2)), exclusive_pair_params())
    with pytest.raises(ShapeError):
        nod_rhs_reduced(np.zeros(2), np.ones(3), 1., 1., None, 0.)


def test_reduced_rhs_without_coupling():
    z = np.array([0.2, -0.4])
    np.testing.assert_allclose(nod_rhs_reduced(z, 1., 2., 1., None, 0.1), -z + np.tanh(2. * z) + 0.1)
    np.testing.assert_allclose(nod_rhs_reduced(z, 1., 2., 1., np.zeros((0, 0)), 0.1), -z + np.tanh(2. * z) + 0.1)


def test_pitchfork_rhs():
    np.testing.assert_allclose(pitchfork_rhs(np.array([0., 1., 2.]), 1.), [0., 0., -6.])


def test_parameter_validation():
    with pytest.raises(PreconditionError):
        NodParams.uniform(2, 2, A_a=[[1., 0.], [0., 0.]])
    with pytest.raises(PreconditionError):
        NodParams.uniform(2, 2, d=-1.)
    with pytest.raises(ShapeError):
        NodParams(np.ones((2, 2)), np.ones(3), np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))


def test_euler_step():
    p = NodParams.uniform(1, 1, d=1., u=1., alpha=0., b=0.5, dt=0.1)
    np.testing.assert_allclose(euler_step(np.zeros((1, 1)), p), [[0.05]])
    with pytest.raises(PreconditionError):
        euler_step(np.zeros(1), 0., rhs=lambda z: z)


def test_full_and_reduced_trajectories_agree():
    p = exclusive_pair_params()
    z0 = np.array([[0.4, -0.4], [-0.1, 0.1]])
    full = simulate(p, z0, 100)
    reduced = simulate(reduce_params(p, 1.), z0[:, 0], 100)
    assert np.max(np.abs(full[:, :, 0] - reduced)) < 1e-8
    assert np.max(np.abs(full[:, :, 1] + full[:, :, 0])) < 1e-8


def test_reduce_params_values():
    p = exclusive_pair_params()
    r = reduce_params(p, 2.)
    np.testing.assert_allclose(r.alpha_tilde, p.alpha[:, 0] + 2. * 0.5)
    np.testing.assert_allclose(r.a_tilde, p.A_a * 2.)
    np.testing.assert_allclose(r.b, p.b[:, 0])
    np.testing.assert_allclose(r.d, p.d[:, 0])


def test_reduce_params_preconditions():
    p = exclusive_pair_params()
    with pytest.raises(PreconditionError):
        reduce_params(p, 0.)
    positive = NodParams(p.d, p.u, p.alpha, [[0., 0.5], [-0.5, 0.]], p.A_a, p.b)
    with pytest.raises(PreconditionError):
        reduce_params(positive, 1.)
    with pytest.raises(PreconditionError):
        reduce_params(NodParams.uniform(2, 3), 1.)


@pytest.mark.parametrize('u', [0.25, 1., 4.])
def test_pitchfork_equilibria(u):
    equilibria = find_equilibria(PitchforkSystem(u))
    assert len(equilibria) == 3
    values = [float(e.z[0]) for e in equilibria]
    np.testing.assert_allclose(values, [-np.sqrt(u), 0., np.sqrt(u)], atol=1e-6)
    assert [e.stable for e in equilibria] == [True, False, True]


def test_pitchfork_below_critical_has_one_stable_equilibrium():
    equilibria = find_equilibria(PitchforkSystem(-0.5))
    assert len(equilibria) == 1
    assert abs(float(equilibria[0].z[0])) < 1e-8
    assert equilibria[0].stable


def test_reduced_single_agent_unique_equilibrium_below_critical():
    system = ReducedNodParams(d=[1.], u=0.5, alpha_tilde=1., a_tilde=None, b=0., dt=0.05)
    equilibria = find_equilibria(system)
    assert len(equilibria) == 1
    assert abs(float(equilibria[0].z[0])) < 1e-8
    assert equilibria[0].stable


def test_full_system_equilibria_are_roots():
    p = exclusive_pair_params(b=0.)
    for equilibrium in find_equilibria(p, max_steps=20000):
        assert np.max(np.abs(nod_rhs_full(equilibrium.z, p))) < 1e-8


def test_critical_attention_of_reduced_dynamics():
    system = ReducedNodParams(d=[1.], u=1., alpha_tilde=1., a_tilde=None, b=0., dt=0.05)
    result = bifurcation_sweep(system, 'u', 0., 2., 41)
    step = result.sweep_values[1] - result.sweep_values[0]
    assert result.u_star is not None
    assert abs(result.u_star - 1.) <= 2 * step + 1e-12
    assert result.counts[0] == 1
    assert result.counts[-1] == 3


def test_sweep_resolution_precondition():
    with pytest.raises(PreconditionError):
        bifurcation_sweep(PitchforkSystem(1.), 'u', 0., 1., 1)


def test_sweep_is_independent_of_workers():
    serial = bifurcation_sweep(PitchforkSystem(1.), 'u', -1., 1., 9)
    parallel = bifurcation_sweep(PitchforkSystem(1.), 'u', -1., 1., 9, workers=3)
    assert serial.rows() == parallel.rows()


def test_sweep_csv_round_trip(tmp_path):
    result = bifurcation_sweep(PitchforkSystem(1.), 'u', -1., 1., 11)
    path = str(tmp_path / 'sweep.csv')
    write_sweep_csv(result, path)
    loaded = read_sweep_csv(path)
    np.testing.assert_array_equal(loaded.counts, result.counts)
    np.testing.assert_allclose(loaded.sweep_values, result.sweep_values)
    assert loaded.u_star == pytest.approx(result.u_star)


def _reduced(u):
    return ReducedNodParams(d=[1.], u=u, alpha_tilde=1., a_tilde=None, b=0., dt=0.05)


def test_hysteresis_above_critical_attention():
    result = hysteresis_sweep(_reduced(2.), -1., 1., 81)
    at_zero = int(np.argmin(np.abs(result.b_values)))
    assert result.difference()[at_zero] > 0.1
    assert hysteresis_width(result) > 0.


def test_no_hysteresis_below_critical_attention():
    result = hysteresis_sweep(_reduced(0.5), -1., 1., 81)
    assert np.max(result.difference()) < 1e-6
    assert hysteresis_width(result) == 0.


def test_forward_sweep_is_monotone():
    result = hysteresis_sweep(_reduced(2.), -1., 1., 81)
    assert np.all(np.diff(result.forward.reshape(-1)) >= -1e-9)


def test_mutual_exclusivity_detected():
    rng = np.random.default_rng(2)
    z1 = rng.normal(size=(50, 3))
    z_trace = np.stack([z1, -0.5 * z1 + 1e-3 * rng.normal(size=z1.shape)], axis=-1)
    reports = detect_mutual_exclusivity(z_trace, np.array([[0., -0.3], [-0.2, 0.]]))
    assert len(reports) == 1
    report = reports[0]
    assert report.pair == (0, 1)
    assert report.c == pytest.approx(2., rel=1e-2)
    assert report.rho < -0.99
    assert report.verdict


def test_positive_belief_blocks_exclusivity():
    rng = np.random.default_rng(2)
    z1 = rng.normal(size=(50, 3))
    z_trace = np.stack([z1, -z1], axis=-1)
    report = detect_mutual_exclusivity(z_trace, np.array([[0., 0.3], [-0.2, 0.]]))[0]
    assert not report.verdict


def test_exclusivity_errors():
    with pytest.raises(PreconditionError):
        detect_mutual_exclusivity(np.ones((1, 2, 2)), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        detect_mutual_exclusivity(np.ones((4, 2)), np.zeros((2, 2)))
    with pytest.raises(DegenerateTraceError):
        detect_mutual_exclusivity(np.zeros((5, 2, 2)), np.zeros((2, 2)))


def test_euler_trajectories_stay_bounded():
    p = exclusive_pair_params()
    bound = (1. + np.max(np.abs(p.b))) / np.min(p.d) + 1.
    z0 = np.random.default_rng(2).uniform(-2., 2., size=(2, 2))
    trace = simulate(p, z0, 10000)
    assert trace.shape == (10001, 2, 2)
    assert np.max(np.abs(trace)) <= bound
