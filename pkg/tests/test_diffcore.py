#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tests.test_diffcore.py
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import numpy as np
import pytest
from binn.tools.diffcore import Tape, Tensor, activation_forward, add, backward, concat, elu, get_activation_function, \
    grad_check, linear_forward, matmul, mean_reduce, mul, reciprocal, relu, reshape, scale, softplus, squared_error, \
    sub, sum_gradients, sum_reduce, take, tanh
from binn.tools.errors import ConfigError, NonFiniteError, ShapeError, TapeError


def test_forward_values():
    a = Tensor([[1., 2.], [3., 4.]])
    b = Tensor([[0.5, -1.], [2., 0.]])
    np.testing.assert_array_equal(add(a, b).data, [[1.5, 1.], [5., 4.]])
    np.testing.assert_array_equal(mul(a, b).data, [[0.5, -2.], [6., 0.]])
    np.testing.assert_array_equal(matmul(a, b).data, np.array([[1., 2.], [3., 4.]]) @ np.array([[0.5, -1.], [2., 0.]]))
    assert sum_reduce(a).item() == 10.
    assert mean_reduce(a).item() == 2.5
    np.testing.assert_array_equal(concat([a, b]).data, [[1., 2., 0.5, -1.], [3., 4., 2., 0.]])


def test_square_sum_gradient():
    tape = Tape()
    x = tape.watch([1., -2., 3.])
    loss = sum_reduce(mul(x, x))
    grads = backward(tape, loss)
    np.testing.assert_allclose(grads[x.node_id], [2., -4., 6.])
    np.testing.assert_allclose(x.grad, [2., -4., 6.])


def test_fan_out_accumulates():
    tape = Tape()
    x = tape.watch([1.5])
    y = add(x, x)
    z = mul(y, x)  # 2 x^2
    grads = backward(tape, sum_reduce(z))
    np.testing.assert_allclose(grads[x.node_id], [6.])


def test_leaf_off_path_gets_zero_gradient():
    tape = Tape()
    x = tape.watch([2.])
    unused = tape.watch(np.ones((2, 3)))
    grads = backward(tape, sum_reduce(scale(x, 3.)))
    np.testing.assert_array_equal(grads[unused.node_id], np.zeros((2, 3)))
    np.testing.assert_allclose(grads[x.node_id], [3.])


def test_backward_requires_scalar():
    tape = Tape()
    x = tape.watch(np.ones(3))
    with pytest.raises(TapeError):
        backward(tape, scale(x, 2.))


def test_backward_rejects_foreign_tensor():
    tape, other = Tape(), Tape()
    x = other.watch([1.])
    with pytest.raises(TapeError):
        backward(tape, sum_reduce(x))


def test_mixing_tapes_is_an_error():
    a, b = Tape().watch([1.]), Tape().watch([2.])
    with pytest.raises(TapeError):
        add(a, b)


def test_shape_errors():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        add(Tensor(np.ones((2, 3))), Tensor(np.ones(2)))
    with pytest.raises(ShapeError):
        squared_error(Tensor(np.ones(3)), Tensor(np.ones(4)))
    with pytest.raises(ShapeError):
        reshape(Tensor(np.ones(6)), (4, 2))


def test_bias_broadcast_gradient():
    tape = Tape()
    x = tape.watch(np.arange(6.).reshape(2, 3))
    bias = tape.watch([1., 2., 3.])
    grads = backward(tape, sum_reduce(add(x, bias)))
    np.testing.assert_array_equal(grads[bias.node_id], [2., 2., 2.])


def test_non_finite_value_names_the_op():
    tape = Tape()
    x = tape.watch([0., 1.])
    with pytest.raises(NonFiniteError) as info:
        reciprocal(x)
    assert info.value.op == 'reciprocal'
    assert info.value.node_id == 1


def test_take_accumulates_repeated_indices():
    tape = Tape()
    x = tape.watch([1., 2., 3.])
    grads = backward(tape, sum_reduce(take(x, [0, 0, 2], axis=0)))
    np.testing.assert_array_equal(grads[x.node_id], [2., 0., 1.])


def test_retain_grads_false_keeps_leaves():
    tape = Tape()
    x = tape.watch([1., 2.])
    hidden = tanh(x)
    grads = backward(tape, sum_reduce(hidden), retain_grads=False)
    np.testing.assert_allclose(grads[x.node_id], 1. - np.tanh([1., 2.]) ** 2)
    assert hidden.node_id not in tape.grads


def test_sum_gradients_is_ordered():
    total = sum_gradients([{'w': np.array([1., 2.])}, {'w': np.array([0.5, 0.5]), 'b': np.array([3.])}])
    np.testing.assert_array_equal(total['w'], [1.5, 2.5])
    np.testing.assert_array_equal(total['b'], [3.])


def _mlp_loss(n_in, n_hidden, x, y):
    sizes = [(n_in, n_hidden), (n_hidden,), (n_hidden, n_hidden), (n_hidden,), (n_hidden, 1), (1,)]

    def f(theta):
        params, offset = [], 0
        for shape in sizes:
            size = int(np.prod(shape))
            params.append(reshape(take(theta, np.arange(offset, offset + size), axis=0), shape))
            offset += size
        h = tanh(linear_forward(Tensor(x), params[0], params[1]))
        h = tanh(linear_forward(h, params[2], params[3]))
        out = linear_forward(h, params[4], params[5])
        return mean_reduce(squared_error(out, Tensor(y)))

    return f, sum(int(np.prod(shape)) for shape in sizes)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_grad_check_three_layer_mlp(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(5, 3)), rng.normal(size=(5, 1))
    f, n_params = _mlp_loss(3, 4, x, y)
    theta = rng.normal(0., 0.5, n_params)
    assert grad_check(f, theta) < 1e-5


def test_grad_check_activations_away_from_kinks():
    theta = np.array([-1.3, -0.4, 0.7, 1.9])
    for op in (relu, elu, softplus, tanh):
        assert grad_check(lambda t: sum_reduce(mul(op(t), op(t))), theta) < 1e-6


def test_unknown_activation_is_a_configuration_error():
    with pytest.raises(ConfigError, match='sigmoid'):
        activation_forward(Tensor([0.5]), 'sigmoid')
    with pytest.raises(ConfigError):
        get_activation_function('sigmoid')


def test_grad_check_reciprocal_and_matmul():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(2, 3, 4))
    theta = rng.uniform(1., 2., (4, 2))
    assert grad_check(lambda t: sum_reduce(reciprocal(matmul(Tensor(a), t) + 20.)), theta) < 1e-6


def test_grad_check_constant_function():
    assert grad_check(lambda t: Tensor(3.), np.ones(4)) == 0.


# ---------------------------------------------------------------------------------------------------------------
# Per-primitive gradient checks over random shapes
# ---------------------------------------------------------------------------------------------------------------
def _random_shape(rng, low=1, high=3):
    return tuple(int(s) for s in rng.integers(1, 5, int(rng.integers(low, high + 1))))


def _broadcast_pair(rng):
    large = _random_shape(rng, 2, 3)
    small = (1,) if rng.random() < 0.2 else large[int(rng.integers(0, len(large))):]
    return large, small


def _signed(rng, low, high, shape):
    return rng.choice([-1., 1.], size=shape) * rng.uniform(low, high, shape)


def _weighted_sum(op, rng):
    """Scalar readout sum(op(t) * w) with fixed positive weights shaped like op(t)"""
    weights = {}

    def f(t):
        out = op(t)
        if 'w' not in weights:
            weights['w'] = rng.uniform(0.5, 1.5, out.shape)
        return sum_reduce(mul(out, Tensor(weights['w'])))

    return f


def _add_large(rng):
    large, small = _broadcast_pair(rng)
    other = Tensor(rng.normal(size=small))
    return (lambda t: add(t, other)), rng.normal(size=large)


def _add_small(rng):
    large, small = _broadcast_pair(rng)
    other = Tensor(rng.normal(size=large))
    return (lambda t: add(other, t)), rng.normal(size=small)


def _sub_small(rng):
    large, small = _broadcast_pair(rng)
    other = Tensor(rng.normal(size=large))
    return (lambda t: sub(other, t)), rng.normal(size=small)


def _mul_large(rng):
    large, small = _broadcast_pair(rng)
    other = Tensor(rng.uniform(0.5, 2., small))
    return (lambda t: mul(t, other)), rng.normal(size=large)


def _mul_small(rng):
    large, small = _broadcast_pair(rng)
    other = Tensor(rng.uniform(0.5, 2., large))
    return (lambda t: mul(other, t)), rng.normal(size=small)


def _scale(rng):
    factor = float(rng.choice([-1., 1.]) * rng.uniform(0.5, 2.))
    return (lambda t: scale(t, factor)), rng.normal(size=_random_shape(rng))


def _matmul_left(rng):
    n, k, m = [int(s) for s in rng.integers(1, 5, 3)]
    batch = _random_shape(rng, 0, 1)
    other = Tensor(rng.uniform(0.5, 2., (k, m)))
    return (lambda t: matmul(t, other)), rng.normal(size=batch + (n, k))


def _matmul_right(rng):
    n, k, m = [int(s) for s in rng.integers(1, 5, 3)]
    batch = _random_shape(rng, 0, 1)
    other = Tensor(rng.uniform(0.5, 2., batch + (n, k)))
    return (lambda t: matmul(other, t)), rng.normal(size=(k, m))


def _concat(rng):
    leading = _random_shape(rng, 0, 2)
    widths = [int(w) for w in rng.integers(1, 4, int(rng.integers(2, 4)))]
    parts = [Tensor(rng.normal(size=leading + (w,))) for w in widths]
    position = int(rng.integers(0, len(widths)))

    def op(t):
        return concat(parts[:position] + [t] + parts[position + 1:])

    return op, rng.normal(size=leading + (widths[position],))


def _take(rng):
    shape = _random_shape(rng)
    axis = int(rng.integers(0, len(shape)))
    indices = rng.integers(0, shape[axis], int(rng.integers(1, 6)))
    return (lambda t: take(t, indices, axis=axis)), rng.normal(size=shape)


def _reshape(rng):
    shape = _random_shape(rng)
    new_shape = tuple(int(s) for s in rng.permutation(shape))
    return (lambda t: reshape(t, new_shape)), rng.normal(size=shape)


def _mean_reduce(rng):
    shape = _random_shape(rng)
    axis = [None, 0, -1][int(rng.integers(0, 3))]
    return (lambda t: mean_reduce(t, axis=axis)), rng.normal(size=shape)


def _sum_reduce(rng):
    shape = _random_shape(rng)
    axis = [None, 0, -1][int(rng.integers(0, 3))]
    return (lambda t: sum_reduce(t, axis=axis)), rng.normal(size=shape)


def _squared_error_prediction(rng):
    theta = rng.normal(size=_random_shape(rng))
    target = Tensor(theta - _signed(rng, 0.5, 1.5, theta.shape))
    return (lambda t: squared_error(t, target)), theta


def _squared_error_target(rng):
    theta = rng.normal(size=_random_shape(rng))
    prediction = Tensor(theta + _signed(rng, 0.5, 1.5, theta.shape))
    return (lambda t: squared_error(prediction, t)), theta


def _unary(op, low=0.2, high=2.):
    def build(rng):
        return op, _signed(rng, low, high, _random_shape(rng))
    return build


PRIMITIVE_CASES = {'add_large': _add_large, 'add_small': _add_small, 'sub_small': _sub_small,
                   'mul_large': _mul_large, 'mul_small': _mul_small, 'scale': _scale,
                   'matmul_left': _matmul_left, 'matmul_right': _matmul_right, 'concat': _concat, 'take': _take,
                   'reshape': _reshape, 'mean_reduce': _mean_reduce, 'sum_reduce': _sum_reduce,
                   'squared_error_prediction': _squared_error_prediction,
                   'squared_error_target': _squared_error_target,
                   'tanh': _unary(tanh), 'relu': _unary(relu), 'elu': _unary(elu), 'softplus': _unary(softplus),
                   'reciprocal': _unary(reciprocal, 0.5, 2.)}


@pytest.mark.parametrize('case', sorted(PRIMITIVE_CASES))
@pytest.mark.parametrize('seed', range(100))
def test_primitive_gradients_random_shapes(case, seed):
    rng = np.random.default_rng(seed)
    op, theta = PRIMITIVE_CASES[case](rng)
    assert grad_check(_weighted_sum(op, rng), theta) < 1e-5
