#!/usr/bin/env python
# -*- coding: utf-8 -*-

# models.network.py
"""
The behavior-inspired network: message passing encoders for preferences and environmental input,
latent opinion dynamics with learned parameters, a message passing decoder, multi-step rollout,
and the checkpoint file format
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
import logging
from functools import lru_cache
from os.path import isfile
import numpy as np
from binn.models.nod import NodParams
from binn.options import COMM_VARIANTS, COMM_ALIASES, DefaultOptions
from binn.tools.diffcore import Tensor, as_tensor, activation_forward, add, concat, linear_forward, matmul, mul, \
    reciprocal, reshape, scale, softplus, sum_reduce, take, tanh
from binn.tools.errors import ConfigError, DatasetFormatError, NonFiniteError, ShapeError


logger = logging.getLogger(__name__)
OPTIONS = DefaultOptions()

CHECKPOINT_FORMAT_VERSION = 1
ENCODER_Z = ('z_emb', 'z_v2e', 'z_e2v')
ENCODER_B = ('b_emb', 'b_v2e', 'b_e2v')
DECODER_X = ('x_dec', 'x_v2e', 'x_e2v')


@lru_cache(maxsize=None)
def edge_indices(n_agents):
    """
    Ordered pairs (i, k), i != k, grouped by i
    :return: sender and receiver index arrays
    """
    pairs = [(i, k) for i in range(n_agents) for k in range(n_agents) if k != i]
    return np.array([p[0] for p in pairs], dtype=np.intp), np.array([p[1] for p in pairs], dtype=np.intp)


@lru_cache(maxsize=None)
def offdiagonal_placement(n, transpose=False):
    """
    Constant matrix scattering the n(n-1) off-diagonal entries (row-major) into a flattened n x n matrix
    """
    senders, receivers = edge_indices(n)
    placement = np.zeros((len(senders), n * n))
    for e, (i, k) in enumerate(zip(senders, receivers)):
        placement[e, k * n + i if transpose else i * n + k] = 1.
    return placement


class Mlp3:
    def __init__(self, name, n_in, n_hidden, n_out):
        """
        Three affine layers, the activation applied after the first two
        """
        self.name = name
        self.sizes = (n_in, n_hidden, n_hidden, n_out)

    def shapes(self):
        shapes = []
        for layer in range(3):
            fan_in, fan_out = self.sizes[layer], self.sizes[layer + 1]
            shapes.append(('%s.W%d' % (self.name, layer + 1), (fan_in, fan_out)))
            shapes.append(('%s.b%d' % (self.name, layer + 1), (fan_out,)))
        return shapes

    def initialize(self, rng):
        params = {}
        for name, shape in self.shapes():
            if name.split('.')[-1].startswith('W'):
                bound = 1. / np.sqrt(shape[0])
                params[name] = rng.uniform(-bound, bound, shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def forward(self, params, x, activation):
        h = x
        for layer in range(1, 4):
            h = linear_forward(h, params['%s.W%d' % (self.name, layer)], params['%s.b%d' % (self.name, layer)])
            if layer < 3:
                h = activation_forward(h, activation)
        return h


class LatentTrace:
    def __init__(self, z, b, A_a):
        """
        Latent quantities of a rollout
        :param z: preferences [B x (H + 1) x N_a x N_o], initial encoding included
        :param b: environmental inputs used at each step [B x H x N_a x N_o]
        :param A_a: communication matrices used at each step [B x H x N_a x N_a]
        """
        self.z = np.asarray(z)
        self.b = np.asarray(b)
        self.A_a = np.asarray(A_a)


class BinnModel:
    def __init__(self, n_agents, state_dim, latent_dim=2, hidden=64, activation='relu', comm='squared_distance',
                 dt=0.1, epsilon=OPTIONS.INVERSE_DISTANCE_EPS, teacher_forcing=False, seed=0):
        """
        :param n_agents: agents per frame
        :param state_dim: per-agent state dimension d (positions then velocities)
        :param latent_dim: number of preference categories N_o
        :param hidden: hidden, embedding, and message width of every MLP
        :param activation: MLP activation (tanh, relu, or elu)
        :param comm: squared_distance, inverse_distance, or learned_multiplier
        :param dt: Euler step of the latent dynamics, the dataset frame spacing
        :param epsilon: regularizer of the inverse distance variants
        :param teacher_forcing: feed ground-truth frames to the encoders during unrolls (ablation only)
        :param seed: initialization seed
        """
        comm = COMM_ALIASES.get(comm, comm)
        if comm not in COMM_VARIANTS:
            raise ConfigError("Unknown communication variant '%s'" % comm)
        if state_dim % 2:
            raise ShapeError("State dimension must be even, got %d" % state_dim)
        self.n_agents = int(n_agents)
        self.state_dim = int(state_dim)
        self.latent_dim = int(latent_dim)
        self.hidden = int(hidden)
        self.activation = activation
        self.comm = comm
        self.dt = float(dt)
        self.epsilon = float(epsilon)
        self.teacher_forcing = bool(teacher_forcing)
        self.seed = int(seed)

        h, n_o, d = self.hidden, self.latent_dim, self.state_dim
        self.mlps = {'z_emb': Mlp3('z_emb', d, h, h), 'z_v2e': Mlp3('z_v2e', 2 * h, h, h),
                     'z_e2v': Mlp3('z_e2v', 2 * h, h, n_o),
                     'b_emb': Mlp3('b_emb', d, h, h), 'b_v2e': Mlp3('b_v2e', 2 * h, h, h),
                     'b_e2v': Mlp3('b_e2v', 2 * h, h, n_o),
                     'x_dec': Mlp3('x_dec', n_o, h, h), 'x_v2e': Mlp3('x_v2e', 2 * h, h, h),
                     'x_e2v': Mlp3('x_e2v', 2 * h, h, d)}
        self.params = self.initialize()

    def __repr__(self):
        return 'BinnModel(%s)' % ', '.join('%s=%r' % item for item in self.hyperparameters().items())

    def hyperparameters(self):
        return {'n_agents': self.n_agents, 'state_dim': self.state_dim, 'latent_dim': self.latent_dim,
                'hidden': self.hidden, 'activation': self.activation, 'comm': self.comm, 'dt': self.dt,
                'epsilon': self.epsilon, 'teacher_forcing': self.teacher_forcing, 'seed': self.seed}

    def manifest(self):
        """
        Parameter names and shapes in the fixed checkpoint order
        """
        shapes = []
        for key in ENCODER_Z + ENCODER_B + DECODER_X:
            shapes.extend(self.mlps[key].shapes())
        n_o = self.latent_dim
        shapes.extend([('rho_d', (n_o,)), ('rho_u', (1,)), ('rho_alpha', (n_o,)),
                       ('A_o_offdiag', (n_o * (n_o - 1),))])
        if self.comm == 'learned_multiplier':
            shapes.append(('A_pre', (self.n_agents, self.n_agents)))
        return shapes

    def initialize(self):
        rng = np.random.default_rng(self.seed)
        params = {}
        for key in ENCODER_Z + ENCODER_B + DECODER_X:
            params.update(self.mlps[key].initialize(rng))
        n_o = self.latent_dim
        params['rho_d'] = np.full(n_o, inverse_softplus(OPTIONS.INIT_D))
        params['rho_u'] = np.full(1, inverse_softplus(OPTIONS.INIT_U))
        params['rho_alpha'] = np.full(n_o, inverse_softplus(OPTIONS.INIT_ALPHA))
        params['A_o_offdiag'] = rng.normal(0., OPTIONS.INIT_BELIEF_STD, n_o * (n_o - 1))
        if self.comm == 'learned_multiplier':
            params['A_pre'] = np.ones((self.n_agents, self.n_agents))
        return params

    def bind(self, tape=None):
        """
        :param tape: record every parameter as a leaf on this tape; constants when None
        :return: Tensors keyed by parameter name
        :rtype: dict
        """
        if tape is None:
            return {name: Tensor(value, name=name) for name, value in self.params.items()}
        return {name: tape.watch(self.params[name], name=name) for name, _ in self.manifest()}

    def flat_parameters(self):
        return np.concatenate([self.params[name].reshape(-1) for name, _ in self.manifest()])

    def set_flat_parameters(self, vector):
        vector = np.asarray(vector, dtype=np.float64)
        manifest = self.manifest()
        expected = sum(int(np.prod(shape)) for _, shape in manifest)
        if vector.shape != (expected,):
            raise ShapeError("Expected %d parameters, got %s" % (expected, vector.shape))
        offset = 0
        for name, shape in manifest:
            size = int(np.prod(shape))
            self.params[name] = vector[offset:offset + size].reshape(shape).copy()
            offset += size

    def unflatten(self, vector):
        """
        Split a flat parameter vector (a Tensor) into named Tensors, so gradients flow through the vector
        """
        params, offset = {}, 0
        for name, shape in self.manifest():
            size = int(np.prod(shape))
            params[name] = reshape(take(vector, np.arange(offset, offset + size), axis=0), shape)
            offset += size
        return params

    def copy(self):
        model = BinnModel(**self.hyperparameters())
        model.params = {name: value.copy() for name, value in self.params.items()}
        return model

    def mapped_parameters(self):
        """
        :return: d, u, alpha after softplus, and the belief matrix A_o
        :rtype: dict
        """
        return {'d': np.logaddexp(0., self.params['rho_d']), 'u': float(np.logaddexp(0., self.params['rho_u'])[0]),
                'alpha': np.logaddexp(0., self.params['rho_alpha']), 'A_o': belief_matrix(self.bind()).data}

    def nod_params(self, A_a, b):
        """
        Learned parameters tied across agents, as NodParams for a single frame
        :param A_a: communication matrix [N_a x N_a]
        :param b: environmental input [N_a x N_o]
        :rtype: NodParams
        """
        mapped = self.mapped_parameters()
        n = np.shape(A_a)[0]
        return NodParams(np.tile(mapped['d'], (n, 1)), np.full(n, mapped['u']), np.tile(mapped['alpha'], (n, 1)),
                         mapped['A_o'], A_a, b, dt=self.dt)

    def predict(self, x0, horizon, targets=None):
        """
        Tape-free rollout
        :param x0: initial states [B x N_a x d] or [N_a x d]
        :return: predicted states [B x H x N_a x d] (or [H x N_a x d])
        :rtype: np.ndarray
        """
        predictions, _ = rollout(x0, self, horizon, targets=targets)
        stacked = np.stack([p.data for p in predictions], axis=-3)
        return stacked


def inverse_softplus(value):
    return float(np.log(np.expm1(value)))


def _batched(model, x, width):
    x = as_tensor(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[2] != width:
        raise ShapeError("Expected [B x N_a x %d] input, got %s" % (width, x.shape))
    if model.comm == 'learned_multiplier' and x.shape[1] != model.n_agents:
        raise ShapeError("Model has %d agents, got %d" % (model.n_agents, x.shape[1]))
    return x, squeeze


def _unbatched(y, squeeze):
    return reshape(y, y.shape[1:]) if squeeze else y


def _message_passing(model, params, x, mlp_keys):
    emb, v2e, e2v = [model.mlps[key] for key in mlp_keys]
    batch, n, width = x.shape
    h_width = model.hidden
    h = reshape(emb.forward(params, reshape(x, (batch * n, width)), model.activation), (batch, n, h_width))
    if n > 1:
        senders, receivers = edge_indices(n)
        pairs = concat([take(h, senders, axis=1), take(h, receivers, axis=1)])
        messages = v2e.forward(params, reshape(pairs, (batch * len(senders), 2 * h_width)), model.activation)
        aggregated = sum_reduce(reshape(messages, (batch, n, n - 1, h_width)), axis=2)
    else:
        aggregated = Tensor(np.zeros((batch, n, h_width)))
    out = e2v.forward(params, reshape(concat([aggregated, h]), (batch * n, 2 * h_width)), model.activation)
    return reshape(out, (batch, n, e2v.sizes[-1]))


def encode_preferences(x, model, params=None):
    """
    Preference encoder E_z
    :param x: states [N_a x d] or [B x N_a x d]
    :return: preferences [.. x N_a x N_o]
    :rtype: Tensor
    """
    params = model.bind() if params is None else params
    x, squeeze = _batched(model, x, model.state_dim)
    return _unbatched(_message_passing(model, params, x, ENCODER_Z), squeeze)


def encode_env_input(x, model, params=None):
    """
    Environmental input encoder E_b
    """
    params = model.bind() if params is None else params
    x, squeeze = _batched(model, x, model.state_dim)
    return _unbatched(_message_passing(model, params, x, ENCODER_B), squeeze)


def decode_states(z, model, params=None):
    """
    State decoder D_x, message passing over the preference graph
    :param z: preferences [N_a x N_o] or [B x N_a x N_o]
    """
    params = model.bind() if params is None else params
    z, squeeze = _batched(model, z, model.latent_dim)
    return _unbatched(_message_passing(model, params, z, DECODER_X), squeeze)


def positions_of(x, state_dim):
    return take(x, np.arange(state_dim // 2), axis=-1)


def comm_matrix(positions, variant='squared_distance', A_pre=None, epsilon=OPTIONS.INVERSE_DISTANCE_EPS):
    """
    Communication matrix from pairwise squared distances, zero diagonal in every variant
    :param positions: [N_a x P] or [B x N_a x P]
    :param variant: squared_distance, inverse_distance, or learned_multiplier
    :param A_pre: multiplier [N_a x N_a], learned_multiplier only
    :param epsilon: regularizer of the inverse variants
    :return: [.. x N_a x N_a]
    :rtype: Tensor
    """
    variant = COMM_ALIASES.get(variant, variant)
    if variant not in COMM_VARIANTS:
        raise ConfigError("Unknown communication variant '%s'" % variant)
    positions = as_tensor(positions)
    squeeze = positions.ndim == 2
    if squeeze:
        positions = reshape(positions, (1,) + positions.shape)
    batch, n, _ = positions.shape
    if n == 1:
        return _unbatched(Tensor(np.zeros((batch, 1, 1))), squeeze)

    senders, receivers = edge_indices(n)
    diff = add(take(positions, senders, axis=1), scale(take(positions, receivers, axis=1), -1.))
    values = sum_reduce(mul(diff, diff), axis=-1)
    if variant != 'squared_distance':
        values = reciprocal(add(values, Tensor(epsilon)))
    if variant == 'learned_multiplier':
        if A_pre is None:
            raise ConfigError("The learned_multiplier variant requires A_pre")
        A_pre = as_tensor(A_pre)
        if A_pre.shape != (n, n):
            raise ShapeError("A_pre must be %d x %d, got %s" % (n, n, A_pre.shape))
        values = mul(values, take(reshape(A_pre, (n * n,)), senders * n + receivers, axis=0))
    matrix = reshape(matmul(values, Tensor(offdiagonal_placement(n))), (batch, n, n))
    return _unbatched(matrix, squeeze)


def model_comm_matrix(x, model, params):
    """
    Communication matrix of a batch of states [B x N_a x d]
    """
    return comm_matrix(positions_of(x, model.state_dim), model.comm, A_pre=params.get('A_pre'),
                       epsilon=model.epsilon)


def belief_matrix(params, transpose=False):
    """
    A_o (or its transpose) from the off-diagonal parameters
    """
    offdiag = params['A_o_offdiag']
    n_o = params['rho_d'].shape[0]
    if n_o == 1:
        return Tensor(np.zeros((1, 1)))
    placed = matmul(reshape(offdiag, (1, offdiag.shape[0])), Tensor(offdiagonal_placement(n_o, transpose)))
    return reshape(placed, (n_o, n_o))


def f_nod_latent(z, b, A_a, model, params=None):
    """
    Latent opinion dynamics with learned d, u, alpha (softplus) and A_o
    :param z: preferences [B x N_a x N_o]
    :param b: environmental input [B x N_a x N_o]
    :param A_a: communication matrices [B x N_a x N_a]
    :return: dz/dt
    :rtype: Tensor
    """
    params = model.bind() if params is None else params
    z, b, A_a = as_tensor(z), as_tensor(b), as_tensor(A_a)
    squeeze = z.ndim == 2
    if squeeze:
        z, b, A_a = [reshape(t, (1,) + t.shape) for t in (z, b, A_a)]
    if z.shape != b.shape or A_a.shape != (z.shape[0], z.shape[1], z.shape[1]):
        raise ShapeError("Shape mismatch in latent dynamics: z %s, b %s, A_a %s" % (z.shape, b.shape, A_a.shape))
    d = softplus(params['rho_d'])
    u = softplus(params['rho_u'])
    alpha = softplus(params['rho_alpha'])
    A_o_t = belief_matrix(params, transpose=True)

    agent_coupling = matmul(A_a, z)
    argument = add(add(mul(z, alpha), agent_coupling), add(matmul(z, A_o_t), matmul(agent_coupling, A_o_t)))
    rate = add(add(scale(mul(z, d), -1.), tanh(mul(argument, u))), b)
    return _unbatched(rate, squeeze)


def rollout(x0, model, horizon, params=None, targets=None):
    """
    Encode the initial frame, unroll the latent dynamics with Euler steps, and decode every step;
    the encoders are re-applied to the predicted states (to ground truth under teacher forcing)
    :param x0: initial states [B x N_a x d] or [N_a x d]
    :param horizon: number of predicted frames, at least 1
    :param targets: ground-truth frames [B x T x N_a x d], read only when the model uses teacher forcing
    :return: one prediction Tensor per step, and the LatentTrace
    """
    if horizon < 1:
        raise ShapeError("Rollout horizon must be at least 1, got %s" % horizon)
    params = model.bind() if params is None else params
    x0, squeeze = _batched(model, x0, model.state_dim)

    z = _message_passing(model, params, x0, ENCODER_Z)
    b = _message_passing(model, params, x0, ENCODER_B)
    A_a = model_comm_matrix(x0, model, params)
    predictions, z_trace, b_trace, a_trace = [], [z.data], [], []
    for step in range(horizon):
        try:
            z = add(z, scale(f_nod_latent(z, b, A_a, model, params), model.dt))
            x_hat = _message_passing(model, params, z, DECODER_X)
        except NonFiniteError as e:
            e.step = step
            e.message = "%s (rollout step %d)" % (e.message, step)
            raise
        b_trace.append(b.data)
        a_trace.append(A_a.data)
        z_trace.append(z.data)
        predictions.append(_unbatched(x_hat, squeeze))
        if step < horizon - 1:
            forced = model.teacher_forcing and targets is not None
            x_next = as_tensor(np.asarray(targets)[:, step + 1]) if forced else x_hat
            b = _message_passing(model, params, x_next, ENCODER_B)
            A_a = model_comm_matrix(x_next, model, params)

    trace = LatentTrace(np.stack(z_trace, axis=1), np.stack(b_trace, axis=1), np.stack(a_trace, axis=1))
    if squeeze:
        trace = LatentTrace(trace.z[0], trace.b[0], trace.A_a[0])
    return predictions, trace


# ---------------------------------------------------------------------------------------------------------------
# Baselines sharing the predict interface
# ---------------------------------------------------------------------------------------------------------------
class ConstantStatePredictor:
    """Repeats the initial frame"""
    def predict(self, x0, horizon, targets=None):
        x0 = np.asarray(x0, dtype=np.float64)
        return np.repeat(np.expand_dims(x0, axis=-3), horizon, axis=-3)


class ConstantVelocityPredictor:
    def __init__(self, dt):
        """
        Extrapolates positions with the initial velocities
        """
        self.dt = float(dt)

    def predict(self, x0, horizon, targets=None):
        x0 = np.asarray(x0, dtype=np.float64)
        half = x0.shape[-1] // 2
        steps = np.arange(1, horizon + 1, dtype=np.float64) * self.dt
        predictions = np.repeat(np.expand_dims(x0, axis=-3), horizon, axis=-3)
        shape = (horizon,) + (1,) * (x0.ndim - 1)
        predictions[..., :half] = predictions[..., :half] + steps.reshape(shape) * predictions[..., half:]
        return predictions


# ---------------------------------------------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------------------------------------------
def save_checkpoint(model, abs_file_path, extra_meta=None):
    """
    8-byte little-endian meta length, JSON meta, then one little-endian float32 blob per manifest entry
    """
    manifest = model.manifest()
    meta = {'format_version': CHECKPOINT_FORMAT_VERSION,
            'hyperparameters': model.hyperparameters(),
            'manifest': [[name, list(shape)] for name, shape in manifest],
            'extra': extra_meta or {}}
    meta_bytes = json.dumps(meta, sort_keys=True).encode('utf-8')
    with open(abs_file_path, 'wb') as document:
        document.write(np.array([len(meta_bytes)], dtype='<u8').tobytes())
        document.write(meta_bytes)
        for name, _ in manifest:
            document.write(model.params[name].astype('<f4').tobytes())
    logger.debug("Checkpoint written to %s", abs_file_path)


def read_checkpoint_meta(abs_file_path):
    if not isfile(abs_file_path):
        raise DatasetFormatError("Checkpoint file not found: %s" % abs_file_path)
    with open(abs_file_path, 'rb') as document:
        content = document.read()
    if len(content) < 8:
        raise DatasetFormatError("Checkpoint %s is truncated: expected at least 8 bytes, found %d" %
                                 (abs_file_path, len(content)))
    meta_length = int(np.frombuffer(content[:8], dtype='<u8')[0])
    if len(content) < 8 + meta_length:
        raise DatasetFormatError("Checkpoint %s is truncated: expected %d meta bytes, found %d" %
                                 (abs_file_path, meta_length, len(content) - 8))
    try:
        meta = json.loads(content[8:8 + meta_length].decode('utf-8'))
    except ValueError as e:
        raise DatasetFormatError("Could not parse checkpoint meta in %s: %s" % (abs_file_path, e))
    if meta.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise DatasetFormatError("Checkpoint format version %s is not supported (expected %d)" %
                                 (meta.get('format_version'), CHECKPOINT_FORMAT_VERSION))
    return meta, content[8 + meta_length:]


def load_checkpoint(abs_file_path):
    """
    :return: the model and the checkpoint's extra metadata
    """
    meta, blob = read_checkpoint_meta(abs_file_path)
    model = BinnModel(**meta['hyperparameters'])
    manifest = [(name, tuple(shape)) for name, shape in meta['manifest']]
    if manifest != model.manifest():
        raise DatasetFormatError("Checkpoint manifest does not match its hyperparameters")
    expected = sum(int(np.prod(shape)) for _, shape in manifest) * 4
    if len(blob) != expected:
        raise DatasetFormatError("Checkpoint %s has the wrong parameter blob length: expected %d bytes, found %d bytes"
                                 % (abs_file_path, expected, len(blob)))
    values = np.frombuffer(blob, dtype='<f4').astype(np.float64)
    model.set_flat_parameters(values)
    return model, meta.get('extra', {})
