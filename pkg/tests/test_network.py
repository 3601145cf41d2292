#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tests.test_network.py
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import numpy as np
import pytest
from binn.models.network import BinnModel, ConstantStatePredictor, ConstantVelocityPredictor, belief_matrix, \
    comm_matrix, decode_states, encode_env_input, encode_preferences, f_nod_latent, load_checkpoint, \
    read_checkpoint_meta, rollout, save_checkpoint
from binn.models.nod import nod_rhs_full
from binn.tools.errors import ConfigError, DatasetFormatError, ShapeError


def test_squared_distance_values():
    positions = np.array([[0., 0.], [3., 4.]])
    np.testing.assert_allclose(comm_matrix(positions).data, [[0., 25.], [25., 0.]])
    np.testing.assert_allclose(comm_matrix(positions, 'inverse_distance', epsilon=1e-6).data,
                               [[0., 1. / (25. + 1e-6)], [1. / (25. + 1e-6), 0.]])


def test_learned_multiplier_values():
    positions = np.array([[0., 0.], [3., 4.], [0., 1.]])
    A_pre = np.array([[9., 2., 3.], [4., 9., 5.], [6., 7., 9.]])
    matrix = comm_matrix(positions, 'learned_multiplier', A_pre=A_pre, epsilon=0.5).data
    assert matrix[0, 1] == pytest.approx(2. / 25.5)
    assert matrix[1, 0] == pytest.approx(4. / 25.5)
    assert matrix[2, 0] == pytest.approx(6. / 1.5)
    assert matrix[1, 2] == pytest.approx(5. / 18.5)
    np.testing.assert_array_equal(np.diag(matrix), np.zeros(3))


def test_comm_matrix_errors():
    with pytest.raises(ConfigError):
        comm_matrix(np.zeros((2, 2)), 'gravity')
    with pytest.raises(ConfigError):
        comm_matrix(np.zeros((2, 2)), 'learned_multiplier')
    with pytest.raises(ShapeError):
        comm_matrix(np.zeros((2, 2)), 'learned_multiplier', A_pre=np.ones((3, 3)))


@pytest.mark.parametrize('variant', ['squared_distance', 'inverse_distance'])
def test_comm_matrix_properties(rng, variant):
    positions = rng.normal(size=(3, 5, 2))
    matrix = comm_matrix(positions, variant).data
    assert matrix.shape == (3, 5, 5)
    np.testing.assert_array_equal(matrix[:, np.arange(5), np.arange(5)], np.zeros((3, 5)))
    np.testing.assert_allclose(matrix, np.swapaxes(matrix, 1, 2))
    shifted = comm_matrix(positions + np.array([10., -4.]), variant).data
    np.testing.assert_allclose(shifted, matrix, rtol=1e-9, atol=1e-9)


def test_single_agent_has_no_communication():
    np.testing.assert_array_equal(comm_matrix(np.ones((4, 1, 2))).data, np.zeros((4, 1, 1)))


def test_shapes(tiny_model, tiny_batch):
    x0 = tiny_batch[:, 0]
    assert encode_preferences(x0, tiny_model).shape == (3, 2, 2)
    assert encode_env_input(x0, tiny_model).shape == (3, 2, 2)
    assert encode_preferences(x0[0], tiny_model).shape == (2, 2)
    assert decode_states(np.zeros((3, 2, 2)), tiny_model).shape == (3, 2, 4)
    predictions, trace = rollout(x0, tiny_model, 3)
    assert len(predictions) == 3
    assert predictions[0].shape == (3, 2, 4)
    assert trace.z.shape == (3, 4, 2, 2)
    assert trace.b.shape == (3, 3, 2, 2)
    assert trace.A_a.shape == (3, 3, 2, 2)
    assert tiny_model.predict(x0, 3).shape == (3, 3, 2, 4)
    assert tiny_model.predict(x0[0], 3).shape == (3, 2, 4)


def test_input_shape_errors(tiny_model):
    with pytest.raises(ShapeError):
        encode_preferences(np.zeros((3, 2, 3)), tiny_model)
    with pytest.raises(ShapeError):
        rollout(np.zeros((3, 2, 4)), tiny_model, 0)
    with pytest.raises(ShapeError):
        BinnModel(2, 3)
    with pytest.raises(ConfigError):
        BinnModel(2, 4, comm='gravity')


def test_agent_permutation_equivariance(rng):
    model = BinnModel(4, 4, latent_dim=2, hidden=8, activation='tanh', seed=1)
    x0 = rng.normal(size=(2, 4, 4))
    permutation = np.array([2, 0, 3, 1])
    z = encode_preferences(x0, model).data
    np.testing.assert_allclose(encode_preferences(x0[:, permutation], model).data, z[:, permutation],
                               rtol=1e-10, atol=1e-12)
    predicted = model.predict(x0, 3)
    np.testing.assert_allclose(model.predict(x0[:, permutation], 3), predicted[:, :, permutation],
                               rtol=1e-9, atol=1e-10)


def test_latent_dynamics_match_opinion_dynamics(tiny_model, rng):
    z = rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2))
    A_a = np.array([[0., 0.8], [1.3, 0.]])
    np.testing.assert_allclose(f_nod_latent(z, b, A_a, tiny_model).data,
                               nod_rhs_full(z, tiny_model.nod_params(A_a, b)), rtol=1e-12, atol=1e-12)


def test_latent_dynamics_shape_mismatch(tiny_model):
    with pytest.raises(ShapeError):
        f_nod_latent(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)), np.zeros((1, 2, 2)), tiny_model)


def test_initial_mapped_parameters(tiny_model):
    mapped = tiny_model.mapped_parameters()
    np.testing.assert_allclose(mapped['d'], [0.5, 0.5])
    assert mapped['u'] == pytest.approx(1.)
    np.testing.assert_allclose(mapped['alpha'], [0.5, 0.5])
    A_o = mapped['A_o']
    assert A_o.shape == (2, 2)
    np.testing.assert_array_equal(np.diag(A_o), [0., 0.])
    np.testing.assert_allclose([A_o[0, 1], A_o[1, 0]], tiny_model.params['A_o_offdiag'])


def test_belief_matrix_transpose(tiny_model):
    params = tiny_model.bind()
    np.testing.assert_array_equal(belief_matrix(params, transpose=True).data, belief_matrix(params).data.T)


def test_single_category_has_no_beliefs():
    model = BinnModel(2, 4, latent_dim=1, hidden=4)
    np.testing.assert_array_equal(model.mapped_parameters()['A_o'], np.zeros((1, 1)))


def test_flat_parameters(tiny_model):
    flat = tiny_model.flat_parameters()
    assert flat.size == sum(int(np.prod(shape)) for _, shape in tiny_model.manifest())
    other = tiny_model.copy()
    other.set_flat_parameters(flat * 2.)
    np.testing.assert_array_equal(other.flat_parameters(), flat * 2.)
    np.testing.assert_array_equal(tiny_model.flat_parameters(), flat)
    with pytest.raises(ShapeError):
        other.set_flat_parameters(flat[:-1])


def test_initialization_is_seeded():
    first = BinnModel(2, 4, hidden=8, seed=5).flat_parameters()
    np.testing.assert_array_equal(BinnModel(2, 4, hidden=8, seed=5).flat_parameters(), first)
    assert not np.array_equal(BinnModel(2, 4, hidden=8, seed=6).flat_parameters(), first)


def test_learned_multiplier_parameters():
    model = BinnModel(3, 4, hidden=4, comm='learned')
    assert model.comm == 'learned_multiplier'
    assert model.manifest()[-1] == ('A_pre', (3, 3))
    np.testing.assert_array_equal(model.params['A_pre'], np.ones((3, 3)))
    with pytest.raises(ShapeError):
        model.predict(np.zeros((1, 2, 4)), 2)


def test_checkpoint_round_trip(tmp_path, tiny_model):
    path = str(tmp_path / 'model.ckpt')
    save_checkpoint(tiny_model, path, extra_meta={'epoch': 7})
    loaded, extra = load_checkpoint(path)
    assert extra == {'epoch': 7}
    assert loaded.hyperparameters() == tiny_model.hyperparameters()
    np.testing.assert_array_equal(loaded.flat_parameters(),
                                  tiny_model.flat_parameters().astype(np.float32).astype(np.float64))
    meta, _ = read_checkpoint_meta(path)
    assert [tuple(entry[1]) for entry in meta['manifest']] == [shape for _, shape in tiny_model.manifest()]


def test_truncated_checkpoint(tmp_path, tiny_model):
    path = str(tmp_path / 'model.ckpt')
    save_checkpoint(tiny_model, path)
    with open(path, 'rb') as document:
        content = document.read()
    with open(path, 'wb') as document:
        document.write(content[:-8])
    with pytest.raises(DatasetFormatError, match='blob length'):
        load_checkpoint(path)
    with open(path, 'wb') as document:
        document.write(content[:4])
    with pytest.raises(DatasetFormatError, match='truncated'):
        load_checkpoint(path)
    with pytest.raises(DatasetFormatError, match='not found'):
        load_checkpoint(str(tmp_path / 'missing.ckpt'))


def test_constant_state_baseline():
    x0 = np.arange(8.).reshape(2, 4)
    predictions = ConstantStatePredictor().predict(x0, 3)
    assert predictions.shape == (3, 2, 4)
    np.testing.assert_array_equal(predictions[2], x0)


def test_constant_velocity_baseline(linear_dataset):
    data = linear_dataset.data
    predictions = ConstantVelocityPredictor(linear_dataset.dt).predict(data[:, 0], 5)
    np.testing.assert_allclose(predictions, data[:, 1:], atol=1e-12)


def test_teacher_forcing_reads_targets_only_when_enabled(tiny_batch):
    x0 = tiny_batch[:, 0]
    plain = BinnModel(2, 4, hidden=8, activation='tanh', seed=3)
    forced = BinnModel(2, 4, hidden=8, activation='tanh', seed=3, teacher_forcing=True)
    free_run = plain.predict(x0, 3)
    np.testing.assert_array_equal(plain.predict(x0, 3, targets=tiny_batch), free_run)
    np.testing.assert_array_equal(forced.predict(x0, 3), free_run)
    assert not np.allclose(forced.predict(x0, 3, targets=tiny_batch), free_run)
