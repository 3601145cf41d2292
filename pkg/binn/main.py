#!/usr/bin/env python
# -*- coding: utf-8 -*-

# main.py
"""
The command line tool of BINN
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import argparse
import json
import logging
import os
import sys
from os.path import dirname, join
from pubsub import pub
from binn import __version__
from binn.data.dataset import import_csv, load_split, save_dataset, save_splits
from binn.data.sims import SimConfig, generate_splits
from binn.models.analysis import CANONICAL_SYSTEMS, InputEntrySweep, canonical_system, export_analysis, \
    export_bifurcation, export_rollout, latent_trace, reduce_latent_dimension
from binn.models.network import load_checkpoint
from binn.models.plot import plot_csv
from binn.models.train import constant_velocity_mse, evaluate_mse, fit
from binn.options import COMM_ALIASES, COMM_VARIANTS, DefaultOptions, SYSTEMS, TrainConfig
from binn.paths import ANALYSIS_DIR, CONFIG_FILE, DATA_DIR, MANIFEST_FILE, METRICS_FILE, RUNS_DIR
from binn.tools.errors import BinnError, UsageError, VALIDATION_ERRORS
from binn.tools.utilities import RunManifest, get_elapsed_time, get_worker_count, initialize_directories


logger = logging.getLogger(__name__)
OPTIONS = DefaultOptions()

EXIT_SUCCESS, EXIT_VALIDATION, EXIT_FAILURE = 0, 1, 2


class ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so run() can map argument errors to an exit code"""
    def error(self, message):
        raise UsageError(message, usage=self.format_usage())


# ---------------------------------------------------------------------------------------------------------------
# Progress subscribers
# ---------------------------------------------------------------------------------------------------------------
def print_sims_progress(msg):
    print("generate %s: %d/%d trajectories" % (msg['system'], msg['done'], msg['total']), file=sys.stderr)


def print_epoch_progress(msg):
    print("epoch %d/%d: lr=%.3g train_total=%.6g val_pred=%.6g" %
          (msg['epoch'] + 1, msg['epochs'], msg['lr'], msg['train_total'], msg['val_pred']), file=sys.stderr)


def print_sweep_progress(msg):
    if (msg['index'] + 1) % 10 == 0 or msg['index'] + 1 == msg['total']:
        print("sweep %d/%d: value=%.4g equilibria=%d" % (msg['index'] + 1, msg['total'], msg['value'],
                                                         msg['count']), file=sys.stderr)


def subscribe_progress():
    pub.subscribe(print_sims_progress, 'sims_progress')
    pub.subscribe(print_epoch_progress, 'train_epoch_complete')
    pub.subscribe(print_sweep_progress, 'sweep_progress')


# ---------------------------------------------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------------------------------------------
def _add_data_arguments(parser, ckpt=True):
    parser.add_argument('--data', required=True, help='dataset directory (generated splits or a single dataset)')
    parser.add_argument('--split', default='test', choices=['train', 'val', 'test'])
    if ckpt:
        parser.add_argument('--ckpt', required=True, help='checkpoint file')


def _add_training_arguments(parser):
    parser.add_argument('--config', help='JSON file mirroring the training configuration')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--comm', choices=sorted(COMM_ALIASES) + list(COMM_VARIANTS))
    parser.add_argument('--latent-dim', type=int)
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--lr', type=float)
    parser.add_argument('--hidden', type=int)
    parser.add_argument('--activation', choices=['tanh', 'relu', 'elu'])
    parser.add_argument('--desk-scale', action='store_true', help='%d epochs unless --epochs is given' %
                        OPTIONS.DESK_SCALE_EPOCHS)


def _add_sweep_arguments(parser, default_sweep):
    parser.add_argument('--sweep', choices=['u', 'b'], default=default_sweep)
    parser.add_argument('--min', type=float, dest='sweep_min')
    parser.add_argument('--max', type=float, dest='sweep_max')
    parser.add_argument('--resolution', type=int, default=101)


def build_parser():
    parser = ArgumentParser(prog='binn', description='Behavior-inspired neural networks for multi-agent dynamics')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    sub = subparsers.add_parser('generate', help='simulate a dataset and split it into train/val/test')
    sub.add_argument('--system', required=True, choices=SYSTEMS)
    sub.add_argument('--out', help='output directory')
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--n-train', type=int)
    sub.add_argument('--n-val', type=int)
    sub.add_argument('--n-test', type=int)
    sub.add_argument('--steps', type=int, help='integrator steps per trajectory')
    sub.add_argument('--desk-scale', action='store_true', help='%d/%d/%d splits' % OPTIONS.DESK_SCALE_SPLITS)

    sub = subparsers.add_parser('import-csv', help='convert a trajectory CSV into a dataset')
    sub.add_argument('csv', help='CSV file with columns traj_id, t, agent_id, px, py (and vx, vy)')
    sub.add_argument('--out', required=True, help='output directory')
    sub.add_argument('--has-velocity', action='store_true')
    sub.add_argument('--dt', type=float, default=1.)

    sub = subparsers.add_parser('train', help='train a model')
    sub.add_argument('--data', required=True, help='dataset directory with train and val splits')
    sub.add_argument('--out', help='run directory')
    sub.add_argument('--system', help='preset hyperparameters (%s, trajnet)' % ', '.join(SYSTEMS))
    _add_training_arguments(sub)

    sub = subparsers.add_parser('eval', help='test rollout MSE of a checkpoint')
    _add_data_arguments(sub)
    sub.add_argument('--out', help='directory for the run manifest, the checkpoint directory by default')

    sub = subparsers.add_parser('rollout', help='export one predicted trajectory')
    _add_data_arguments(sub)
    sub.add_argument('--traj-index', type=int, default=0)
    sub.add_argument('--horizon', type=int)
    sub.add_argument('--out', required=True)

    sub = subparsers.add_parser('bifurcation', help='equilibrium sweep of a reference system or a learned model')
    sub.add_argument('--system', choices=CANONICAL_SYSTEMS, default='reduced_nod')
    sub.add_argument('--ckpt', help='sweep the learned latent dynamics instead (requires --data)')
    sub.add_argument('--data')
    sub.add_argument('--split', default='test', choices=['train', 'val', 'test'])
    sub.add_argument('--traj-index', type=int, default=0)
    sub.add_argument('--agent', type=int, default=0)
    sub.add_argument('--category', type=int, default=0)
    sub.add_argument('--u', type=float, default=1., help='attention held fixed in b sweeps')
    sub.add_argument('--b', type=float, default=0., help='environmental input held fixed in u sweeps')
    sub.add_argument('--hysteresis', action='store_true', help='also sweep b up and down (b sweeps only)')
    sub.add_argument('--out', required=True)
    _add_sweep_arguments(sub, 'u')

    sub = subparsers.add_parser('analyze', help='latent traces, learned parameters, exclusivity, and sweeps')
    _add_data_arguments(sub)
    sub.add_argument('--traj-index', type=int, default=0)
    sub.add_argument('--agent', type=int, default=0)
    sub.add_argument('--category', type=int, default=0)
    sub.add_argument('--out', help='output directory')
    _add_sweep_arguments(sub, 'b')

    sub = subparsers.add_parser('reduce', help='retrain with one latent category fewer after an exclusivity check')
    sub.add_argument('--data', required=True, help='dataset directory with train, val, and test splits')
    sub.add_argument('--ckpt', required=True)
    sub.add_argument('--out', required=True)
    _add_training_arguments(sub)
    return parser


# ---------------------------------------------------------------------------------------------------------------
# Subcommands; each returns the manifest describing its run
# ---------------------------------------------------------------------------------------------------------------
def _training_overrides(args):
    overrides = {'seed': args.seed, 'comm': args.comm, 'latent_dim': args.latent_dim, 'epochs': args.epochs,
                 'batch_size': args.batch_size, 'lr': args.lr, 'hidden': args.hidden,
                 'activation': args.activation}
    if args.desk_scale and args.epochs is None:
        overrides['epochs'] = OPTIONS.DESK_SCALE_EPOCHS
    if os.environ.get('BINN_THREADS'):
        overrides['workers'] = get_worker_count()
    return overrides


def _resolve_config(args, base=None):
    """
    Config file, else the base config, else the system presets; command line flags override either
    """
    if args.config:
        cfg = TrainConfig.load(args.config)
    elif base is not None:
        cfg = base
    else:
        cfg = TrainConfig.for_system(getattr(args, 'system', None) or 'pendulum')
    cfg.update(_training_overrides(args))
    return cfg.validate()


def _write_json(abs_file_path, data):
    with open(abs_file_path, 'w') as document:
        json.dump(data, document, indent=2, sort_keys=True)


def command_generate(args):
    splits = OPTIONS.DESK_SCALE_SPLITS if args.desk_scale else OPTIONS.FULL_SCALE_SPLITS
    n_train, n_val, n_test = [default if value is None else value
                              for value, default in zip([args.n_train, args.n_val, args.n_test], splits)]
    overrides = {} if args.steps is None else {'steps': args.steps}
    cfg = SimConfig.preset(args.system, seed=args.seed, **overrides)
    out_dir = args.out or join(DATA_DIR, args.system)
    datasets = generate_splits(cfg, n_train, n_val, n_test, workers=get_worker_count())
    save_splits(datasets, out_dir)
    _write_json(join(out_dir, 'simulation.json'), cfg.to_dict())
    for split, ds in datasets.items():
        print("%s: %d trajectories, %d frames, %d agents, dt=%g" % (split, ds.n_traj, ds.T, ds.n_agents, ds.dt))
    return RunManifest('generate', config=cfg.to_dict(), seed=args.seed,
                       outputs={split: join(out_dir, split) for split in datasets}), out_dir


def command_import_csv(args):
    ds = import_csv(args.csv, has_velocity=args.has_velocity, dt=args.dt)
    save_dataset(ds, args.out)
    print("%s: %d trajectories, %d frames, %d agents, dt=%g" % (ds.name, ds.n_traj, ds.T, ds.n_agents, ds.dt))
    return RunManifest('import-csv', config={'has_velocity': args.has_velocity, 'dt': args.dt},
                       inputs={'csv': args.csv}, outputs={'dataset': args.out}), args.out


def command_train(args):
    cfg = _resolve_config(args)
    train_ds, val_ds = load_split(args.data, 'train'), load_split(args.data, 'val')
    cfg.update({'train_path': args.data, 'val_path': args.data})
    out_dir = args.out or join(RUNS_DIR, cfg.system)
    initialize_directories(out_dir)
    cfg.save(join(out_dir, CONFIG_FILE))
    _, metrics = fit(train_ds, val_ds, cfg, out_dir=out_dir)
    plot_csv(join(out_dir, METRICS_FILE), 'epoch', ['train_total', 'val_pred'], title='training')
    print("best_val_pred=%r" % min(metrics.column('val_pred')))
    return RunManifest('train', config=cfg.to_dict(), seed=cfg.seed, inputs={'data': args.data},
                       outputs={'run': out_dir}), out_dir


def command_eval(args):
    model, _ = load_checkpoint(args.ckpt)
    ds = load_split(args.data, args.split)
    test_mse = evaluate_mse(ds, model)
    logger.info("Constant velocity baseline on %s: %g", ds.name, constant_velocity_mse(ds))
    print("test_mse=%r" % test_mse)
    out_dir = args.out or dirname(args.ckpt) or '.'
    return RunManifest('eval', config={'split': args.split, 'test_mse': test_mse},
                       inputs={'data': args.data, 'ckpt': args.ckpt}), out_dir


def command_rollout(args):
    model, _ = load_checkpoint(args.ckpt)
    ds = load_split(args.data, args.split)
    outputs, rollout_mse = export_rollout(model, ds, args.out, traj_index=args.traj_index, horizon=args.horizon)
    print("rollout_mse=%r" % rollout_mse)
    return RunManifest('rollout', config={'split': args.split, 'traj_index': args.traj_index,
                                          'horizon': args.horizon},
                       inputs={'data': args.data, 'ckpt': args.ckpt}, outputs=outputs), args.out


def command_bifurcation(args):
    if args.ckpt:
        if not args.data:
            raise UsageError("--ckpt requires --data")
        model, _ = load_checkpoint(args.ckpt)
        trace = latent_trace(model, load_split(args.data, args.split), max_traj=args.traj_index + 1)
        index = min(args.traj_index, trace.z.shape[0] - 1)
        system = InputEntrySweep(model.nod_params(trace.A_a[index, 0], trace.b[index, 0]),
                                 agent=args.agent, category=args.category)
        component = system.component
        inputs = {'data': args.data, 'ckpt': args.ckpt}
    else:
        system = canonical_system(args.system, u=args.u, b=args.b)
        component, inputs = 0, {}
    outputs, summary = export_bifurcation(system, args.out, parameter=args.sweep, start=args.sweep_min,
                                          stop=args.sweep_max, resolution=args.resolution, component=component,
                                          hysteresis=args.hysteresis, workers=get_worker_count())
    print("u_star=%r" % summary['u_star'])
    if 'hysteresis_width' in summary:
        print("hysteresis_width=%r" % summary['hysteresis_width'])
    config = {'system': 'learned' if args.ckpt else args.system, 'sweep': args.sweep, 'min': args.sweep_min,
              'max': args.sweep_max, 'resolution': args.resolution, 'u': args.u, 'b': args.b}
    config.update(summary)
    return RunManifest('bifurcation', config=config, inputs=inputs, outputs=outputs), args.out


def command_analyze(args):
    model, _ = load_checkpoint(args.ckpt)
    ds = load_split(args.data, args.split)
    out_dir = args.out or join(ANALYSIS_DIR, ds.name)
    outputs, summary = export_analysis(model, ds, out_dir, traj_index=args.traj_index, agent=args.agent,
                                       category=args.category, parameter=args.sweep, start=args.sweep_min,
                                       stop=args.sweep_max, resolution=args.resolution, workers=get_worker_count())
    for report in summary['exclusivity']:
        print("pair=%d,%d c=%.6g rho=%.6g beliefs=%.6g,%.6g verdict=%s" %
              (tuple(report['pair']) + (report['c'], report['rho']) + tuple(report['beliefs']) +
               (report['verdict'],)))
    for pair, message in summary['degenerate_pairs'].items():
        print("pair=%s degenerate: %s" % (pair, message))
    return RunManifest('analyze', config={'split': args.split, 'traj_index': args.traj_index,
                                          'agent': args.agent, 'category': args.category, 'sweep': args.sweep},
                       inputs={'data': args.data, 'ckpt': args.ckpt}, outputs=outputs), out_dir


def command_reduce(args):
    model, extra = load_checkpoint(args.ckpt)
    base = TrainConfig(**extra['config']) if extra.get('config') else None
    cfg = _resolve_config(args, base=base)
    train_ds, val_ds, test_ds = [load_split(args.data, split) for split in ('train', 'val', 'test')]
    _, summary = reduce_latent_dimension(model, train_ds, val_ds, test_ds, cfg, args.out)
    print("test_mse=%r" % summary['test_mse'])
    print("reduced_test_mse=%r" % summary['reduced_test_mse'])
    return RunManifest('reduce', config=cfg.to_dict(), seed=cfg.seed, inputs={'data': args.data, 'ckpt': args.ckpt},
                       outputs={'run': args.out}), args.out


COMMANDS = {'generate': command_generate,
            'import-csv': command_import_csv,
            'train': command_train,
            'eval': command_eval,
            'rollout': command_rollout,
            'bifurcation': command_bifurcation,
            'analyze': command_analyze,
            'reduce': command_reduce}


def run(argv=None):
    """
    :param argv: command line arguments without the program name, sys.argv[1:] by default
    :return: exit code, 0 on success, 1 on validation errors, 2 on runtime failures
    :rtype: int
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e.usage, end='', file=sys.stderr)
        print("binn: error: %s" % e, file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:  # --help and --version
        return e.code or EXIT_SUCCESS

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    subscribe_progress()
    try:
        manifest, out_dir = COMMANDS[args.command](args)
        manifest.argv = argv
        manifest.finish()
        logger.info("%s finished in %s", args.command, get_elapsed_time(manifest.started, manifest.finished))
        file_name = 'eval_' + MANIFEST_FILE if args.command == 'eval' else MANIFEST_FILE
        manifest.save(out_dir, file_name=file_name)
    except VALIDATION_ERRORS as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_VALIDATION
    except BinnError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception("Unexpected failure: %s", e)
        return EXIT_FAILURE
    return EXIT_SUCCESS


def start():
    sys.exit(run())
