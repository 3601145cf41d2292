#!/usr/bin/env python
# -*- coding: utf-8 -*-

# models.analysis.py
"""
Interpretability exports of a trained model: latent traces, learned parameters, mutual exclusivity,
equilibrium sweeps of the learned latent dynamics, and the latent dimension reduction experiment
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
import logging
from os.path import join
import numpy as np
from binn.models.network import rollout
from binn.models.nod import ExclusivityReport, PitchforkSystem, ReducedNodParams, bifurcation_sweep, \
    hysteresis_sweep, hysteresis_width, reduce_params, write_sweep_csv
from binn.models.plot import plot_csv, plot_sweep_csv
from binn.models.train import evaluate_mse, fit
from binn.options import TrainConfig
from binn.tools.errors import DegenerateTraceError, PreconditionError, ShapeError
from binn.tools.stats import exclusivity_scale, pearson, pooled_pair
from binn.tools.utilities import initialize_directories, write_csv


logger = logging.getLogger(__name__)

CANONICAL_SYSTEMS = ('pitchfork', 'reduced_nod')
SWEEP_DEFAULTS = {'u': (0., 3.), 'b': (-2., 2.)}
ANALYSIS_MAX_STEPS = 100000


def _write_json(abs_file_path, data):
    with open(abs_file_path, 'w') as document:
        json.dump(data, document, indent=2, sort_keys=True)


def check_model_dataset(model, ds):
    if model.state_dim != ds.state_dim:
        raise ShapeError("Model state dimension %d does not match dataset '%s' (%d)" %
                         (model.state_dim, ds.name, ds.state_dim))
    if model.comm == 'learned_multiplier' and model.n_agents != ds.n_agents:
        raise ShapeError("Model was trained with %d agents, dataset '%s' has %d" %
                         (model.n_agents, ds.name, ds.n_agents))
    if ds.T < 2:
        raise ShapeError("Analysis needs trajectories of at least 2 frames, got %d" % ds.T)


def latent_trace(model, ds, max_traj=64):
    """
    Roll out the first max_traj trajectories from their initial frames
    :return: LatentTrace with z [B x T x N_a x N_o], b and A_a [B x (T - 1) x ..]
    """
    check_model_dataset(model, ds)
    _, trace = rollout(ds.data[:max_traj, 0], model, ds.T - 1)
    return trace


def exclusivity_reports(z, A_o, pairs=None):
    """
    Exclusivity report per category pair; degenerate pairs are reported as errors instead
    :param z: preference traces [B x T x N_a x N_o] or [T x N_a x N_o], pooled over everything but the category
    :return: reports and {pair: error message}
    """
    z = np.asarray(z, dtype=np.float64)
    z = z.reshape((-1,) + z.shape[-2:])
    n_options = z.shape[-1]
    if pairs is None:
        pairs = [(j, l) for j in range(n_options) for l in range(j + 1, n_options)]
    reports, errors = [], {}
    for j, l in pairs:
        z_j, z_l = pooled_pair(z, j, l)
        try:
            reports.append(ExclusivityReport((j, l), exclusivity_scale(z_j, z_l), pearson(z_j, z_l),
                                             (A_o[j, l], A_o[l, j])))
        except DegenerateTraceError as e:
            logger.warning("Category pair (%d, %d): %s", j, l, e)
            errors[(j, l)] = str(e)
    return reports, errors


class InputEntrySweep:
    def __init__(self, params, agent=0, category=0):
        """
        Learned latent dynamics of one frame with a single environmental input entry swept;
        attention sweeps replace u for every agent
        :type params: NodParams
        """
        if not 0 <= agent < params.n_agents or not 0 <= category < params.n_options:
            raise PreconditionError("Agent %d / category %d out of range for %d agents and %d categories" %
                                    (agent, category, params.n_agents, params.n_options))
        self.params = params
        self.agent = agent
        self.category = category

    @property
    def state_shape(self):
        return self.params.state_shape

    @property
    def dt(self):
        return self.params.dt

    @property
    def component(self):
        return self.agent * self.params.n_options + self.category

    def rhs(self, z):
        return self.params.rhs(z)

    def with_parameter(self, name, value):
        if name == 'b':
            b = self.params.b.copy()
            b[self.agent, self.category] = value
            return self.params.with_parameter('b', b)
        return self.params.with_parameter(name, value)


def canonical_system(name, u=1., b=0.):
    """
    Single-agent reference systems: the pitchfork normal form or the reduced opinion dynamics with d = alpha = 1
    """
    if name == 'pitchfork':
        return PitchforkSystem(u, b=b)
    if name == 'reduced_nod':
        return ReducedNodParams(d=[1.], u=u, alpha_tilde=1., a_tilde=None, b=b, dt=0.05)
    raise PreconditionError("Unknown system '%s', expected one of %s" % (name, ', '.join(CANONICAL_SYSTEMS)))


def _sweep_range(parameter, start, stop):
    if parameter not in SWEEP_DEFAULTS:
        raise PreconditionError("Sweep parameter must be 'u' or 'b', got '%s'" % parameter)
    default_start, default_stop = SWEEP_DEFAULTS[parameter]
    return default_start if start is None else start, default_stop if stop is None else stop


def export_bifurcation(system, out_dir, parameter='u', start=None, stop=None, resolution=101, component=0,
                       hysteresis=False, workers=1, max_steps=ANALYSIS_MAX_STEPS):
    """
    Sweep a system, write sweep.csv (and hysteresis.csv for b sweeps when requested) with their plots
    :return: output paths keyed by role, and a summary
    """
    start, stop = _sweep_range(parameter, start, stop)
    initialize_directories(out_dir)
    result = bifurcation_sweep(system, parameter, start, stop, resolution, max_steps=max_steps, workers=workers)
    outputs = {'sweep': join(out_dir, 'sweep.csv')}
    write_sweep_csv(result, outputs['sweep'], component=component)
    outputs['sweep_svg'], outputs['sweep_html'] = plot_sweep_csv(outputs['sweep'])
    summary = {'parameter': parameter, 'u_star': result.u_star, 'fold_points': result.fold_points}

    if hysteresis and parameter == 'b':
        loop = hysteresis_sweep(system, start, stop, resolution)
        outputs['hysteresis'] = join(out_dir, 'hysteresis.csv')
        write_csv(outputs['hysteresis'], ['b', 'forward', 'backward'], loop.rows(component=component))
        outputs['hysteresis_svg'], outputs['hysteresis_html'] = plot_csv(outputs['hysteresis'], 'b')
        summary['hysteresis_width'] = hysteresis_width(loop)
    return outputs, summary


def _trace_rows(dt, values):
    """
    One row per frame: time, then every agent/category entry
    """
    values = np.asarray(values)
    flat = values.reshape(values.shape[0], -1)
    return [[k * dt] + [float(v) for v in row] for k, row in enumerate(flat)]


def _trace_columns(prefix, n_agents, n_options):
    return ['t'] + ['%s_%d_%d' % (prefix, i, j) for i in range(n_agents) for j in range(n_options)]


def export_analysis(model, ds, out_dir, traj_index=0, agent=0, category=0, parameter='b', start=None, stop=None,
                    resolution=101, max_traj=64, workers=1):
    """
    Write the interpretability outputs of a model on a dataset
    :param traj_index: trajectory whose traces are exported and whose first frame fixes A_a and b for the sweep
    :param agent: agent of the swept environmental input and plotted equilibrium component
    :param category: category of the swept environmental input and plotted equilibrium component
    :param parameter: 'b' or 'u'
    :param max_traj: trajectories pooled in the exclusivity analysis
    :return: output paths keyed by role, and the analysis summary written to analysis.json
    """
    check_model_dataset(model, ds)
    if not 0 <= traj_index < ds.n_traj:
        raise PreconditionError("Trajectory index %d out of range for %d trajectories" % (traj_index, ds.n_traj))
    initialize_directories(out_dir)
    selected = np.unique(np.concatenate([np.arange(min(max_traj, ds.n_traj)), [traj_index]]))
    _, trace = rollout(ds.data[selected, 0], model, ds.T - 1)
    row = int(np.flatnonzero(selected == traj_index)[0])
    n_agents, n_options = trace.z.shape[-2:]

    outputs = {'z_trace': join(out_dir, 'z_trace.csv'), 'b_trace': join(out_dir, 'b_trace.csv'),
               'states': join(out_dir, 'states.csv')}
    write_csv(outputs['z_trace'], _trace_columns('z', n_agents, n_options), _trace_rows(ds.dt, trace.z[row]))
    write_csv(outputs['b_trace'], _trace_columns('b', n_agents, n_options), _trace_rows(ds.dt, trace.b[row]))
    write_csv(outputs['states'], _trace_columns('x', ds.n_agents, ds.state_dim),
              _trace_rows(ds.dt, ds.data[traj_index]))
    for key in ['z_trace', 'b_trace', 'states']:
        outputs[key + '_svg'], outputs[key + '_html'] = plot_csv(outputs[key], 't')

    mapped = model.mapped_parameters()
    reports, errors = exclusivity_reports(trace.z, mapped['A_o'])

    nod = model.nod_params(trace.A_a[row, 0], trace.b[row, 0])
    sweep_system = InputEntrySweep(nod, agent=agent, category=category)
    sweep_outputs, sweep_summary = export_bifurcation(sweep_system, out_dir, parameter=parameter, start=start,
                                                      stop=stop, resolution=resolution,
                                                      component=sweep_system.component, workers=workers)
    outputs.update(sweep_outputs)

    A_o = mapped['A_o']
    offdiag = A_o[~np.eye(n_options, dtype=bool)]
    summary = {'A_o': A_o.tolist(),
               'A_o_offdiag_negative': bool(offdiag.size and np.all(offdiag < 0)),
               'd': mapped['d'].tolist(),
               'u': mapped['u'],
               'alpha': mapped['alpha'].tolist(),
               'exclusivity': [r.to_dict() for r in reports],
               'degenerate_pairs': {'%d,%d' % pair: message for pair, message in errors.items()},
               'sweep': sweep_summary,
               'traj_index': traj_index,
               'agent': agent,
               'category': category}
    outputs['analysis'] = join(out_dir, 'analysis.json')
    _write_json(outputs['analysis'], summary)
    logger.info("Analysis of %s written to %s", ds.name, out_dir)
    return outputs, summary


def export_rollout(model, ds, out_dir, traj_index=0, horizon=None):
    """
    Ground truth and predicted states of one trajectory, rolled out from its first frame
    """
    check_model_dataset(model, ds)
    if not 0 <= traj_index < ds.n_traj:
        raise PreconditionError("Trajectory index %d out of range for %d trajectories" % (traj_index, ds.n_traj))
    horizon = ds.T - 1 if horizon is None else int(horizon)
    if not 1 <= horizon <= ds.T - 1:
        raise PreconditionError("Horizon must be between 1 and %d, got %d" % (ds.T - 1, horizon))
    initialize_directories(out_dir)
    truth = ds.data[traj_index, 1:horizon + 1]
    prediction = model.predict(ds.data[traj_index, 0], horizon)
    columns = ['t'] + ['%s_%d_%d' % (kind, i, k) for kind in ('true', 'pred')
                       for i in range(ds.n_agents) for k in range(ds.state_dim)]
    rows = [[(step + 1) * ds.dt] + [float(v) for v in np.concatenate([truth[step].reshape(-1),
                                                                     prediction[step].reshape(-1)])]
            for step in range(horizon)]
    abs_file_path = join(out_dir, 'rollout.csv')
    write_csv(abs_file_path, columns, rows)
    svg_path, html_path = plot_csv(abs_file_path, 't')
    return {'rollout': abs_file_path, 'rollout_svg': svg_path, 'rollout_html': html_path}, \
        float(np.mean((truth - prediction) ** 2))


def reduce_latent_dimension(model, train_ds, val_ds, test_ds, cfg, out_dir, max_traj=64):
    """
    Retrain with one latent category fewer after a mutually exclusive pair is detected
    :param model: trained model
    :param cfg: its training configuration; the retrained model differs only in latent_dim
    :type cfg: TrainConfig
    :return: the retrained model and a summary comparing test errors
    """
    if model.latent_dim < 2:
        raise PreconditionError("Latent dimension reduction needs at least 2 categories, got %d" % model.latent_dim)
    trace = latent_trace(model, train_ds, max_traj=max_traj)
    A_o = model.mapped_parameters()['A_o']
    reports, _ = exclusivity_reports(trace.z, A_o)
    positive = [r for r in reports if r.verdict]
    if not positive:
        raise PreconditionError("No mutually exclusive category pair found, latent dimension stays %d" %
                                model.latent_dim)

    summary = {'exclusivity': [r.to_dict() for r in reports], 'latent_dim': model.latent_dim - 1}
    if model.latent_dim == 2:
        # reduce_params takes z_2 = -c z_1, the reversed pair of the report
        c = exclusivity_scale(*pooled_pair(trace.z.reshape((-1,) + trace.z.shape[-2:]), 1, 0))
        reduced = reduce_params(model.nod_params(trace.A_a[0, 0], trace.b[0, 0]), c)
        summary['reduced_dynamics'] = {'c': c, 'd': reduced.d.tolist(), 'u': reduced.u.tolist(),
                                       'alpha_tilde': reduced.alpha_tilde.tolist(),
                                       'a_tilde': reduced.a_tilde.tolist(), 'b': reduced.b.tolist()}

    reduced_cfg = TrainConfig(**cfg.to_dict())
    reduced_cfg.set_option('latent_dim', model.latent_dim - 1)
    reduced_model, _ = fit(train_ds, val_ds, reduced_cfg, out_dir=out_dir)
    summary['test_mse'] = evaluate_mse(test_ds, model)
    summary['reduced_test_mse'] = evaluate_mse(test_ds, reduced_model)
    initialize_directories(out_dir)
    _write_json(join(out_dir, 'reduce.json'), summary)
    logger.info("Reduced latent dimension to %d: test MSE %g -> %g", reduced_cfg.latent_dim,
                summary['test_mse'], summary['reduced_test_mse'])
    return reduced_model, summary
