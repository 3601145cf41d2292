#!/usr/bin/env python
# -*- coding: utf-8 -*-

# models.train.py
"""
Losses, Adam with step decay, the training loop, and evaluation metrics
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import logging
from os.path import join
import numpy as np
from binn.models.network import BinnModel, ConstantVelocityPredictor, ENCODER_B, ENCODER_Z, DECODER_X, \
    _message_passing, f_nod_latent, model_comm_matrix, rollout, save_checkpoint
from binn.options import DefaultOptions, TrainConfig
from binn.paths import BEST_CHECKPOINT_FILE, LAST_CHECKPOINT_FILE, METRICS_FILE
from binn.tools.diffcore import Tape, Tensor, add, backward, reshape, scale, squared_error, sum_gradients, \
    sum_reduce, take
from binn.tools.errors import NonFiniteError, PreconditionError, ShapeError
from binn.tools.stats import mse
from binn.tools.utilities import initialize_directories, ordered_map, read_csv, send_progress, write_csv


logger = logging.getLogger(__name__)
OPTIONS = DefaultOptions()

METRICS_COLUMNS = ['epoch', 'lr', 'train_pred', 'train_recon', 'train_latent', 'train_total', 'val_pred']


class LossBreakdown:
    def __init__(self, pred, recon, latent, gamma1=1., gamma2=1.):
        """
        Loss components; total is always pred + gamma1 * recon + gamma2 * latent
        """
        self.pred = float(pred)
        self.recon = float(recon)
        self.latent = float(latent)
        self.gamma1 = float(gamma1)
        self.gamma2 = float(gamma2)

    @property
    def total(self):
        return self.pred + self.gamma1 * self.recon + self.gamma2 * self.latent

    def __repr__(self):
        return "LossBreakdown(pred=%.6g, recon=%.6g, latent=%.6g, total=%.6g)" % \
               (self.pred, self.recon, self.latent, self.total)

    @staticmethod
    def weighted_mean(breakdowns, weights):
        weights = np.asarray(weights, dtype=np.float64) / np.sum(weights)
        first = breakdowns[0]
        return LossBreakdown(sum(w * b.pred for w, b in zip(weights, breakdowns)),
                             sum(w * b.recon for w, b in zip(weights, breakdowns)),
                             sum(w * b.latent for w, b in zip(weights, breakdowns)),
                             first.gamma1, first.gamma2)


def _mean_squared_norm(prediction, target, count):
    return scale(sum_reduce(squared_error(prediction, target)), 1. / count)


def compute_losses(batch, model, params, gamma1=1., gamma2=1.):
    """
    Taped losses of a batch of trajectories
    :param batch: ground truth [B x T x N_a x d], T >= 2
    :param params: bound parameters (see BinnModel.bind)
    :return: total loss Tensor and the LossBreakdown
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[1] < 2:
        raise ShapeError("Loss needs a batch [B x T x N_a x d] with T >= 2, got shape %s" % (batch.shape,))
    n_batch, frames, n_agents, state_dim = batch.shape
    if state_dim != model.state_dim:
        raise ShapeError("Model state dimension is %d, batch has %d" % (model.state_dim, state_dim))
    horizon = frames - 1

    # prediction over the full unrolled horizon
    predictions, _ = rollout(batch[:, 0], model, horizon, params=params, targets=batch)
    pred = None
    for step, x_hat in enumerate(predictions):
        term = sum_reduce(squared_error(x_hat, Tensor(batch[:, step + 1])))
        pred = term if pred is None else add(pred, term)
    pred = scale(pred, 1. / (n_batch * horizon * n_agents))

    # reconstruction of the initial frame
    x0 = Tensor(batch[:, 0])
    recon_x = _message_passing(model, params, _message_passing(model, params, x0, ENCODER_Z), DECODER_X)
    recon = _mean_squared_norm(recon_x, x0, n_batch * n_agents)

    # latent dynamics against ground-truth encodings
    frames_flat = Tensor(batch.reshape(n_batch * frames, n_agents, state_dim))
    z = reshape(_message_passing(model, params, frames_flat, ENCODER_Z), (n_batch, frames, n_agents, model.latent_dim))
    b = reshape(_message_passing(model, params, frames_flat, ENCODER_B), (n_batch, frames, n_agents, model.latent_dim))
    A_a = reshape(model_comm_matrix(frames_flat, model, params), (n_batch, frames, n_agents, n_agents))
    previous, following = np.arange(horizon), np.arange(1, frames)
    flat = (n_batch * horizon, n_agents, model.latent_dim)
    z_prev = reshape(take(z, previous, axis=1), flat)
    z_next = reshape(take(z, following, axis=1), flat)
    rate = f_nod_latent(z_prev, reshape(take(b, previous, axis=1), flat),
                        reshape(take(A_a, previous, axis=1), (n_batch * horizon, n_agents, n_agents)), model, params)
    delta = scale(add(z_next, scale(z_prev, -1.)), 1. / model.dt)
    latent = _mean_squared_norm(delta, rate, n_batch * horizon * n_agents)

    total = add(add(pred, scale(recon, gamma1)), scale(latent, gamma2))
    return total, LossBreakdown(pred.item(), recon.item(), latent.item(), gamma1, gamma2)


def loss_components(batch, model, gamma1=1., gamma2=1.):
    """
    Tape-free loss evaluation
    :rtype: LossBreakdown
    """
    return compute_losses(batch, model, model.bind(), gamma1, gamma2)[1]


def loss_and_gradients(batch, model, gamma1=1., gamma2=1.):
    """
    :return: LossBreakdown and gradients keyed by parameter name
    """
    tape = Tape()
    params = model.bind(tape)
    total, breakdown = compute_losses(batch, model, params, gamma1, gamma2)
    grads = backward(tape, total, retain_grads=False)
    return breakdown, {name: grads[tensor.node_id] for name, tensor in params.items()}


class AdamState:
    def __init__(self, params=None):
        """
        First and second moment buffers, keyed like the parameters
        """
        self.m = {name: np.zeros_like(value) for name, value in (params or {}).items()}
        self.v = {name: np.zeros_like(value) for name, value in (params or {}).items()}
        self.step = 0


def adam_step(params, grads, state, lr, beta1=OPTIONS.ADAM_BETA1, beta2=OPTIONS.ADAM_BETA2, eps=OPTIONS.ADAM_EPS):
    """
    One bias-corrected Adam update, in place
    :param params: arrays keyed by name
    :param grads: gradients keyed like params
    :type state: AdamState
    :return: params and state
    """
    state.step += 1
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        if g.shape != params[name].shape or state.m[name].shape != params[name].shape:
            raise ShapeError("Gradient or moment shape mismatch for '%s'" % name)
        state.m[name] = beta1 * state.m[name] + (1. - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1. - beta2) * g ** 2
        m_hat = state.m[name] / (1. - beta1 ** state.step)
        v_hat = state.v[name] / (1. - beta2 ** state.step)
        params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


def scheduler_lr(initial_lr, epoch, step=None, gamma=1.):
    """
    Step decay: initial_lr * gamma ** floor(epoch / step); constant when step is None
    """
    if step is None:
        return float(initial_lr)
    if step <= 0 or not 0 < gamma <= 1:
        raise PreconditionError("Scheduler needs step > 0 and 0 < gamma <= 1, got step=%s, gamma=%s" % (step, gamma))
    return float(initial_lr * gamma ** (epoch // step))


def clip_gradients(grads, max_norm):
    """
    Scale gradients so their global norm is at most max_norm
    """
    norm = np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values()))
    if norm <= max_norm or norm == 0.:
        return grads
    return {name: g * (max_norm / norm) for name, g in grads.items()}


class MetricsLog:
    def __init__(self, rows=None):
        self.rows = rows or []

    def __len__(self):
        return len(self.rows)

    def append(self, **row):
        self.rows.append({column: row[column] for column in METRICS_COLUMNS})

    def column(self, name):
        return [row[name] for row in self.rows]

    def write_csv(self, abs_file_path):
        write_csv(abs_file_path, METRICS_COLUMNS, [[row[c] for c in METRICS_COLUMNS] for row in self.rows])

    @classmethod
    def read_csv(cls, abs_file_path):
        table = read_csv(abs_file_path, required_columns=METRICS_COLUMNS)
        return cls([{c: (int(row[c]) if c == 'epoch' else float(row[c])) for c in METRICS_COLUMNS}
                    for _, row in table.iterrows()])


def _batch_step(model, batch, cfg, workers):
    """
    Loss and gradients of one batch, sharded across independent tapes and reduced in shard order
    """
    shards = [shard for shard in np.array_split(np.arange(len(batch)), min(workers, len(batch))) if shard.size]

    def run(shard):
        breakdown, grads = loss_and_gradients(batch[shard], model, cfg.gamma1, cfg.gamma2)
        weight = shard.size / float(len(batch))
        return breakdown, {name: g * weight for name, g in grads.items()}

    results = ordered_map(run, shards, workers=workers)
    breakdown = LossBreakdown.weighted_mean([r[0] for r in results], [s.size for s in shards])
    return breakdown, sum_gradients([r[1] for r in results])


def build_model(train_ds, cfg):
    return BinnModel(train_ds.n_agents, train_ds.state_dim, latent_dim=cfg.latent_dim, hidden=cfg.hidden,
                     activation=cfg.activation, comm=cfg.comm, dt=train_ds.dt, epsilon=cfg.epsilon,
                     teacher_forcing=cfg.teacher_forcing, seed=cfg.seed)


def fit(train_ds, val_ds, cfg, model=None, out_dir=None):
    """
    Train with seeded mini-batch shuffles, keeping the parameters with the best validation prediction MSE
    :type train_ds: TrajectoryDataset
    :type val_ds: TrajectoryDataset
    :type cfg: TrainConfig
    :param model: starting model, built from cfg when None
    :param out_dir: when given, metrics CSV and best/last checkpoints are written here
    :return: best model and the per-epoch MetricsLog
    """
    cfg = cfg if isinstance(cfg, TrainConfig) else TrainConfig(**cfg)
    cfg.validate()
    train_ds.check_compatible(val_ds)
    if train_ds.T < 2:
        raise ShapeError("Training trajectories need at least 2 frames, got %d" % train_ds.T)
    if train_ds.n_traj == 0:
        raise ShapeError("Training dataset '%s' is empty" % train_ds.name)
    model = build_model(train_ds, cfg) if model is None else model
    if model.state_dim != train_ds.state_dim or \
            (model.comm == 'learned_multiplier' and model.n_agents != train_ds.n_agents):
        raise ShapeError("Model %s does not match dataset %s" % (model, train_ds))

    rng = np.random.default_rng(cfg.seed)
    state = AdamState(model.params)
    metrics = MetricsLog()
    best_model, best_score = model.copy(), np.inf
    workers = max(1, int(cfg.workers))

    for epoch in range(cfg.epochs):
        lr = scheduler_lr(cfg.lr, epoch, cfg.scheduler_step, cfg.scheduler_gamma)
        order = rng.permutation(train_ds.n_traj)
        breakdowns, sizes = [], []
        for start in range(0, len(order), cfg.batch_size):
            batch = train_ds.data[np.sort(order[start:start + cfg.batch_size])]
            try:
                breakdown, grads = _batch_step(model, batch, cfg, workers)
            except NonFiniteError as e:
                e.message = "%s (epoch %d, batch starting at %d)" % (e.message, epoch, start)
                raise
            if not np.isfinite(breakdown.total):
                raise NonFiniteError("Non-finite loss at epoch %d" % epoch, step=epoch)
            if cfg.grad_clip is not None:
                grads = clip_gradients(grads, cfg.grad_clip)
            adam_step(model.params, grads, state, lr)
            breakdowns.append(breakdown)
            sizes.append(len(batch))

        train = LossBreakdown.weighted_mean(breakdowns, sizes)
        val_pred = evaluate_mse(val_ds, model) if val_ds.n_traj else float('nan')
        score = val_pred if val_ds.n_traj else train.total
        if score < best_score:
            best_score, best_model = score, model.copy()
        metrics.append(epoch=epoch, lr=lr, train_pred=train.pred, train_recon=train.recon, train_latent=train.latent,
                       train_total=train.total, val_pred=val_pred)
        send_progress('train_epoch_complete', epoch=epoch, epochs=cfg.epochs, lr=lr, train_total=train.total,
                      val_pred=val_pred)
        logger.debug("epoch %d: lr=%g %s val_pred=%g", epoch, lr, train, val_pred)

    if out_dir is not None:
        initialize_directories(out_dir)
        metrics.write_csv(join(out_dir, METRICS_FILE))
        save_checkpoint(best_model, join(out_dir, BEST_CHECKPOINT_FILE),
                        extra_meta={'config': cfg.to_dict(), 'best_val_pred': best_score})
        save_checkpoint(model, join(out_dir, LAST_CHECKPOINT_FILE), extra_meta={'config': cfg.to_dict()})
    logger.info("Training finished after %d epochs, best validation score %g", cfg.epochs, best_score)
    return best_model, metrics


def evaluate_mse(test_ds, model, batch_size=256):
    """
    Mean squared error over every element of the predicted frames 1..T-1, rolled out from frame 0
    :param model: anything with predict(x0, horizon, targets)
    :rtype: float
    """
    if test_ds.T < 2:
        raise ShapeError("Evaluation trajectories need at least 2 frames, got %d" % test_ds.T)
    if getattr(model, 'state_dim', test_ds.state_dim) != test_ds.state_dim:
        raise ShapeError("Model state dimension %d does not match dataset %d" % (model.state_dim, test_ds.state_dim))
    if test_ds.n_traj == 0:
        return 0.
    total, count = 0., 0
    for start in range(0, test_ds.n_traj, batch_size):
        batch = test_ds.data[start:start + batch_size]
        prediction = model.predict(batch[:, 0], test_ds.T - 1)
        truth = batch[:, 1:]
        total += mse(truth, prediction) * truth.size
        count += truth.size
    return total / count


def constant_velocity_mse(test_ds):
    return evaluate_mse(test_ds, ConstantVelocityPredictor(test_ds.dt))
