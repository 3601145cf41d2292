#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tools.diffcore.py
"""
Dense tensor math with tape-based reverse-mode automatic differentiation

A Tensor wraps a 64-bit row-major numpy array.  Tensors created through Tape.watch are leaves; every
operation on a taped input records a Node (op kind, input ids, saved values, backward function) on that
tape, so nodes are always in topological order.  Operations on tape-less tensors are evaluated without
recording, which is how evaluation and analysis run the network.
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import numpy as np
from scipy.special import expit
from binn.tools.errors import ConfigError, NonFiniteError, ShapeError, TapeError


ACTIVATIONS = ('tanh', 'relu', 'elu')


def elu_array(x):
    return np.where(x >= 0, x, np.expm1(np.minimum(x, 0.)))


def relu_array(x):
    return np.maximum(x, 0.)


# numpy versions, used by the nod module for the saturation function S
ACTIVATION_FUNCTIONS = {'tanh': np.tanh,
                        'relu': relu_array,
                        'elu': elu_array}


def get_activation_function(kind):
    """
    :param kind: 'tanh', 'relu', or 'elu'
    :type kind: str
    :return: elementwise numpy function
    """
    if kind not in ACTIVATION_FUNCTIONS:
        raise ConfigError("Unknown activation kind '%s', expected one of %s" % (kind, ', '.join(ACTIVATIONS)))
    return ACTIVATION_FUNCTIONS[kind]


class Tensor:
    def __init__(self, data, tape=None, node_id=None, name=None):
        """
        :param data: values, converted to a float64 numpy array
        :param tape: the tape this tensor is recorded on, None for constants
        :type tape: Tape
        :param node_id: id of the recording node on the tape
        :type node_id: int
        :param name: optional label, used for parameters
        :type name: str
        """
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.node_id = node_id
        self.name = name

    def __repr__(self):
        label = " '%s'" % self.name if self.name else ''
        return "<Tensor%s shape=%s node=%s>" % (label, self.shape, self.node_id)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def requires_grad(self):
        return self.tape is not None

    @property
    def grad(self):
        """
        :return: gradient buffer from the last backward pass of this tensor's tape
        :rtype: np.ndarray
        """
        if self.tape is None:
            return None
        return self.tape.gradient(self.node_id)

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return sum_reduce(self, axis)

    def mean(self, axis=None):
        return mean_reduce(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return reshape(self, shape)


class Node:
    __slots__ = ('node_id', 'op', 'inputs', 'saved', 'backward_fn', 'shape', 'name')

    def __init__(self, node_id, op, inputs, saved, backward_fn, shape, name=None):
        self.node_id = node_id
        self.op = op
        self.inputs = inputs
        self.saved = saved
        self.backward_fn = backward_fn
        self.shape = shape
        self.name = name

    @property
    def is_leaf(self):
        return self.op == 'leaf'


class Tape:
    """
    Ordered record of the computation graph. Single writer: build one tape per thread.
    """
    def __init__(self):
        self.nodes = []
        self.grads = {}

    def __len__(self):
        return len(self.nodes)

    def watch(self, value, name=None):
        """
        Record a leaf whose gradient is wanted (a parameter or an input under test)
        :param value: initial values, copied
        :param name: optional label
        :type name: str
        :rtype: Tensor
        """
        data = np.array(value, dtype=np.float64, copy=True)
        node = Node(len(self.nodes), 'leaf', (), None, None, data.shape, name)
        self.nodes.append(node)
        return Tensor(data, tape=self, node_id=node.node_id, name=name)

    def record(self, op, inputs, value, backward_fn, saved):
        node = Node(len(self.nodes), op, tuple(inputs), saved, backward_fn, value.shape)
        self.nodes.append(node)
        return Tensor(value, tape=self, node_id=node.node_id)

    def leaves(self):
        return [node for node in self.nodes if node.is_leaf]

    def gradient(self, node_id):
        if node_id in self.grads:
            return self.grads[node_id]
        return np.zeros(self.nodes[node_id].shape)

    def zero_grad(self):
        self.grads = {}


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _get_tape(tensors):
    tape = None
    for tensor in tensors:
        if tensor.tape is not None:
            if tape is None:
                tape = tensor.tape
            elif tensor.tape is not tape:
                raise TapeError("Operation mixes tensors recorded on different tapes")
    return tape


def _record(op, inputs, value, backward_fn, saved=None):
    """
    Check the forward value and, when any input is taped, record the node
    """
    tape = _get_tape(inputs)
    if not np.all(np.isfinite(value)):
        node_id = len(tape) if tape is not None else None
        raise NonFiniteError("Non-finite value produced by '%s' at tape node %s" % (op, node_id),
                             op=op, node_id=node_id)
    if tape is None:
        return Tensor(value)
    input_ids = [tensor.node_id if tensor.tape is tape else None for tensor in inputs]
    return tape.record(op, input_ids, value, backward_fn, saved)


def _check_broadcast(op, shape_a, shape_b):
    """
    Only bias-style broadcasting is allowed: the smaller shape is a suffix of the larger one, or a single element
    """
    if shape_a == shape_b:
        return
    small, large = (shape_a, shape_b) if len(shape_a) <= len(shape_b) else (shape_b, shape_a)
    if int(np.prod(small)) == 1:
        return
    if tuple(large[len(large) - len(small):]) == tuple(small):
        return
    raise ShapeError("Shape mismatch in '%s': %s and %s" % (op, shape_a, shape_b))


def _unbroadcast(grad, shape):
    if grad.shape == tuple(shape):
        return grad
    if int(np.prod(shape)) == 1:
        return np.full(shape, grad.sum())
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _sum_to_ndim(grad, ndim):
    if grad.ndim > ndim:
        grad = grad.sum(axis=tuple(range(grad.ndim - ndim)))
    return grad


# ---------------------------------------------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------------------------------------------
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('add', a.shape, b.shape)
    shape_a, shape_b = a.shape, b.shape

    def backward_fn(g, saved):
        return _unbroadcast(g, shape_a), _unbroadcast(g, shape_b)

    return _record('add', (a, b), a.data + b.data, backward_fn)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('mul', a.shape, b.shape)

    def backward_fn(g, saved):
        x, y = saved
        return _unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)

    return _record('mul', (a, b), a.data * b.data, backward_fn, saved=(a.data, b.data))


def scale(a, factor):
    """
    Multiply by a constant python float
    """
    a = as_tensor(a)
    factor = float(factor)

    def backward_fn(g, saved):
        return g * factor,

    return _record('scale', (a,), a.data * factor, backward_fn)


def sub(a, b):
    return add(a, scale(b, -1.))


def matmul(a, b):
    """
    Matrix product over the last two axes; leading (batch) axes must match unless one operand is 2-D
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("Shape mismatch in 'matmul': %s and %s" % (a.shape, b.shape))
    if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("Batch shape mismatch in 'matmul': %s and %s" % (a.shape, b.shape))

    def backward_fn(g, saved):
        x, y = saved
        if y.ndim == 2 and x.ndim > 2:
            grad_y = x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            grad_y = _sum_to_ndim(np.swapaxes(x, -1, -2) @ g, y.ndim)
        grad_x = _sum_to_ndim(g @ np.swapaxes(y, -1, -2), x.ndim)
        return grad_x, grad_y

    return _record('matmul', (a, b), a.data @ b.data, backward_fn, saved=(a.data, b.data))


def linear_forward(x, W, b):
    """
    Fused affine map used by every MLP layer
    :param x: input rows [n x in]
    :param W: weights [in x out]
    :param b: bias [out]
    :return: x @ W + b [n x out]
    :rtype: Tensor
    """
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.ndim != 2 or W.ndim != 2 or b.ndim != 1 or x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ShapeError("Shape mismatch in 'linear': x %s, W %s, b %s" % (x.shape, W.shape, b.shape))

    def backward_fn(g, saved):
        x_data, w_data = saved
        return g @ w_data.T, x_data.T @ g, g.sum(axis=0)

    return _record('linear', (x, W, b), x.data @ W.data + b.data, backward_fn, saved=(x.data, W.data))


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)

    def backward_fn(g, saved):
        return g * (1. - saved[0] ** 2),

    return _record('tanh', (x,), out, backward_fn, saved=(out,))


def relu(x):
    x = as_tensor(x)

    def backward_fn(g, saved):
        return g * (saved[0] > 0.),

    return _record('relu', (x,), relu_array(x.data), backward_fn, saved=(x.data,))


def elu(x):
    x = as_tensor(x)
    out = elu_array(x.data)

    def backward_fn(g, saved):
        x_data, out_data = saved
        return g * np.where(x_data >= 0., 1., out_data + 1.),

    return _record('elu', (x,), out, backward_fn, saved=(x.data, out))


def softplus(x):
    x = as_tensor(x)

    def backward_fn(g, saved):
        return g * expit(saved[0]),

    return _record('softplus', (x,), np.logaddexp(0., x.data), backward_fn, saved=(x.data,))


def reciprocal(x):
    x = as_tensor(x)
    with np.errstate(divide='ignore'):
        out = 1. / x.data

    def backward_fn(g, saved):
        return -g * saved[0] ** 2,

    return _record('reciprocal', (x,), out, backward_fn, saved=(out,))


def activation_forward(x, kind):
    """
    :param x: any tensor
    :param kind: 'tanh', 'relu', or 'elu'
    :type kind: str
    :rtype: Tensor
    """
    if kind == 'tanh':
        return tanh(x)
    if kind == 'relu':
        return relu(x)
    if kind == 'elu':
        return elu(x)
    raise ConfigError("Unknown activation kind '%s', expected one of %s" % (kind, ', '.join(ACTIVATIONS)))


def sum_reduce(x, axis=None):
    x = as_tensor(x)
    shape = x.shape

    def backward_fn(g, saved):
        if axis is None:
            return np.full(shape, float(np.sum(g))),
        return np.array(np.broadcast_to(np.expand_dims(g, axis), shape)),

    return _record('sum', (x,), np.asarray(x.data.sum(axis=axis)), backward_fn)


def mean_reduce(x, axis=None):
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return scale(sum_reduce(x, axis), 1. / count)


def concat(tensors, axis=-1):
    """
    Concatenate along the last axis
    """
    tensors = [as_tensor(t) for t in tensors]
    if axis not in (-1, tensors[0].ndim - 1):
        raise ShapeError("concat only supports the last axis")
    leading = tensors[0].shape[:-1]
    for tensor in tensors[1:]:
        if tensor.shape[:-1] != leading:
            raise ShapeError("Shape mismatch in 'concat': %s" % [t.shape for t in tensors])
    widths = [t.shape[-1] for t in tensors]
    splits = np.cumsum(widths)[:-1]

    def backward_fn(g, saved):
        return tuple(np.split(g, splits, axis=-1))

    return _record('concat', tensors, np.concatenate([t.data for t in tensors], axis=-1), backward_fn)


def take(x, indices, axis=0):
    """
    Gather (or slice) entries along one axis; the backward pass scatter-adds, so repeated indices accumulate
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim
    if indices.size and (indices.max() >= x.shape[axis] or indices.min() < -x.shape[axis]):
        raise ShapeError("Index out of range in 'take' along axis %d of %s" % (axis, x.shape))
    shape = x.shape

    def backward_fn(g, saved):
        grad = np.zeros(shape)
        np.add.at(grad, (slice(None),) * axis + (indices,), g)
        return grad,

    return _record('take', (x,), np.take(x.data, indices, axis=axis), backward_fn)


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError("Cannot reshape %s into %s" % (x.shape, shape))
    old_shape = x.shape

    def backward_fn(g, saved):
        return g.reshape(old_shape),

    return _record('reshape', (x,), x.data.reshape(shape), backward_fn)


def squared_error(prediction, target):
    """
    Elementwise (prediction - target)^2
    """
    prediction, target = as_tensor(prediction), as_tensor(target)
    if prediction.shape != target.shape:
        raise ShapeError("Shape mismatch in 'squared_error': %s and %s" % (prediction.shape, target.shape))
    diff = prediction.data - target.data

    def backward_fn(g, saved):
        return 2. * g * saved[0], -2. * g * saved[0]

    return _record('squared_error', (prediction, target), diff ** 2, backward_fn, saved=(diff,))


# ---------------------------------------------------------------------------------------------------------------
# Reverse pass
# ---------------------------------------------------------------------------------------------------------------
def backward(tape, loss_node, retain_grads=True):
    """
    Reverse-mode sweep from a scalar node; gradients accumulate at fan-out nodes
    :param tape: the tape the loss was recorded on
    :type tape: Tape
    :param loss_node: scalar loss tensor or its node id
    :param retain_grads: keep a buffer for every node (False keeps leaf gradients only, to save memory)
    :type retain_grads: bool
    :return: gradient of the loss for every leaf, keyed by node id (zeros for leaves off the loss path)
    :rtype: dict
    """
    if isinstance(loss_node, Tensor):
        if loss_node.tape is not tape:
            raise TapeError("Loss tensor is not recorded on this tape")
        node_id = loss_node.node_id
    else:
        node_id = loss_node
    if node_id is None or not 0 <= node_id < len(tape.nodes):
        raise TapeError("Node id %s is not on the tape" % node_id)
    loss = tape.nodes[node_id]
    if int(np.prod(loss.shape)) != 1:
        raise TapeError("backward requires a scalar loss, got shape %s" % (loss.shape,))

    grads = {node_id: np.ones(loss.shape)}
    for node in reversed(tape.nodes[:node_id + 1]):
        g = grads.get(node.node_id)
        if g is None or node.backward_fn is None:
            continue
        input_grads = node.backward_fn(g, node.saved)
        for input_id, input_grad in zip(node.inputs, input_grads):
            if input_id is None or input_grad is None:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + input_grad
            else:
                grads[input_id] = np.array(input_grad, dtype=np.float64)
        if not retain_grads:
            del grads[node.node_id]

    for node in tape.nodes:
        if node.node_id not in grads and (retain_grads or node.is_leaf):
            grads[node.node_id] = np.zeros(node.shape)
    tape.grads = grads
    return {node.node_id: grads[node.node_id] for node in tape.leaves()}


def sum_gradients(gradient_dicts):
    """
    Deterministic ordered reduction of per-tape gradients keyed by parameter name
    :param gradient_dicts: one dict per tape, in shard order
    :type gradient_dicts: list
    :rtype: dict
    """
    total = {}
    for grads in gradient_dicts:
        for key, value in grads.items():
            total[key] = value.copy() if key not in total else total[key] + value
    return total


def grad_check(f, theta, h=1e-5, eps=1e-12, indices=None):
    """
    Compare the taped gradient of a scalar function against central finite differences
    :param f: callable mapping a Tensor shaped like theta to a scalar Tensor
    :param theta: evaluation point
    :param h: finite difference step
    :type h: float
    :param eps: floor added to |analytic| in the relative error denominator
    :type eps: float
    :param indices: optional flat indices of the coordinates to check (all by default)
    :return: max over checked coordinates of |analytic - numeric| / (|analytic| + eps)
    :rtype: float
    """
    if h <= 0:
        raise ShapeError("grad_check requires h > 0")
    theta = np.array(theta.data if isinstance(theta, Tensor) else theta, dtype=np.float64)

    tape = Tape()
    leaf = tape.watch(theta)
    value = as_tensor(f(leaf))
    if value.tape is tape:
        analytic = backward(tape, value)[leaf.node_id].reshape(-1)
    else:
        analytic = np.zeros(theta.size)

    flat = theta.reshape(-1)
    indices = range(flat.size) if indices is None else indices
    worst = 0.
    for i in indices:
        shifted = flat.copy()
        shifted[i] = flat[i] + h
        f_plus = _scalar_value(f(Tensor(shifted.reshape(theta.shape))))
        shifted[i] = flat[i] - h
        f_minus = _scalar_value(f(Tensor(shifted.reshape(theta.shape))))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError("Non-finite function value during grad_check at coordinate %d" % i)
        numeric = (f_plus - f_minus) / (2. * h)
        worst = max(worst, abs(analytic[i] - numeric) / (abs(analytic[i]) + eps))
    return worst


def _scalar_value(value):
    data = as_tensor(value).data
    if data.size != 1:
        raise TapeError("grad_check requires a scalar function, got shape %s" % (data.shape,))
    return float(data.reshape(-1)[0])
