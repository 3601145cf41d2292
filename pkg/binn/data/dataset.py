#!/usr/bin/env python
# -*- coding: utf-8 -*-

# data.dataset.py
"""
Multi-agent trajectory datasets: container, on-disk format, and CSV ingestion
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
import logging
from os.path import basename, getsize, isdir, isfile, join, normpath
import numpy as np
import pandas as pd
from binn.paths import DATASET_META_FILE, DATASET_BLOB_FILE, SPLITS
from binn.tools.errors import DatasetFormatError, PreconditionError, ShapeError
from binn.tools.utilities import initialize_directories


logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CSV_KEY_COLUMNS = ['traj_id', 't', 'agent_id']
CSV_POSITION_COLUMNS = ['px', 'py']
CSV_VELOCITY_COLUMNS = ['vx', 'vy']


class TrajectoryDataset:
    def __init__(self, data, dt, name='dataset'):
        """
        :param data: states [n_traj x T x n_agents x d], positions in the first d/2 entries, velocities in the rest
        :param dt: time between stored frames
        :type dt: float
        :param name: label stored with the dataset
        :type name: str
        """
        self.data = np.asarray(data, dtype=np.float64)
        self.dt = float(dt)
        self.name = name
        self.validate()

    def validate(self):
        if self.data.ndim != 4:
            raise ShapeError("Dataset must be [n_traj x T x n_agents x d], got shape %s" % (self.data.shape,))
        if self.state_dim % 2:
            raise ShapeError("State dimension must be even (positions then velocities), got %d" % self.state_dim)
        if self.dt <= 0:
            raise PreconditionError("Dataset dt must be positive, got %s" % self.dt)
        if not np.all(np.isfinite(self.data)):
            raise DatasetFormatError("Dataset '%s' contains non-finite values" % self.name)

    def __len__(self):
        return self.n_traj

    def __repr__(self):
        return "TrajectoryDataset('%s', shape=%s, dt=%s)" % (self.name, self.data.shape, self.dt)

    @property
    def n_traj(self):
        return self.data.shape[0]

    @property
    def T(self):
        return self.data.shape[1]

    @property
    def n_agents(self):
        return self.data.shape[2]

    @property
    def state_dim(self):
        return self.data.shape[3]

    @property
    def positions(self):
        return self.data[..., :self.state_dim // 2]

    @property
    def velocities(self):
        return self.data[..., self.state_dim // 2:]

    def subset(self, indices, name=None):
        return TrajectoryDataset(self.data[np.asarray(indices, dtype=np.intp)], self.dt, name=name or self.name)

    def meta(self):
        return {'format_version': FORMAT_VERSION,
                'name': self.name,
                'n_traj': self.n_traj,
                'T': self.T,
                'n_agents': self.n_agents,
                'state_dim': self.state_dim,
                'dt': self.dt}

    def check_compatible(self, other):
        """
        Datasets used together must share n_agents, state_dim, and dt
        """
        for attr in ['n_agents', 'state_dim', 'dt']:
            if getattr(self, attr) != getattr(other, attr):
                raise ShapeError("Datasets '%s' and '%s' differ in %s: %s vs %s" %
                                 (self.name, other.name, attr, getattr(self, attr), getattr(other, attr)))


def save_dataset(ds, directory):
    """
    Write meta.json and a little-endian 32-bit float blob
    """
    initialize_directories(directory)
    with open(join(directory, DATASET_META_FILE), 'w') as document:
        json.dump(ds.meta(), document, indent=2)
    ds.data.astype('<f4').tofile(join(directory, DATASET_BLOB_FILE))
    logger.debug("Saved %s to %s", ds, directory)


def load_dataset(directory):
    """
    :rtype: TrajectoryDataset
    """
    meta_path, blob_path = join(directory, DATASET_META_FILE), join(directory, DATASET_BLOB_FILE)
    if not isfile(meta_path) or not isfile(blob_path):
        raise DatasetFormatError("No dataset found in %s (expected %s and %s)" %
                                 (directory, DATASET_META_FILE, DATASET_BLOB_FILE))
    with open(meta_path, 'r') as document:
        try:
            meta = json.load(document)
        except ValueError as e:
            raise DatasetFormatError("Could not parse %s: %s" % (meta_path, e))
    if meta.get('format_version') != FORMAT_VERSION:
        raise DatasetFormatError("Dataset format version %s is not supported (expected %d)" %
                                 (meta.get('format_version'), FORMAT_VERSION))
    try:
        shape = tuple(int(meta[key]) for key in ['n_traj', 'T', 'n_agents', 'state_dim'])
        dt = meta['dt']
    except KeyError as e:
        raise DatasetFormatError("Dataset metadata in %s is missing %s" % (meta_path, e))
    expected = int(np.prod(shape)) * 4
    found = getsize(blob_path)
    if found != expected:
        raise DatasetFormatError("Dataset blob %s has the wrong length: expected %d bytes, found %d bytes" %
                                 (blob_path, expected, found))
    data = np.fromfile(blob_path, dtype='<f4').astype(np.float64).reshape(shape)
    return TrajectoryDataset(data, dt, name=meta.get('name', basename(normpath(directory))))


def save_splits(splits, directory):
    """
    :param splits: datasets keyed by split name (train, val, test)
    :type splits: dict
    """
    for split, ds in splits.items():
        save_dataset(ds, join(directory, split))


def load_split(directory, split):
    """
    Load one split from a generated dataset directory, or the directory itself when it holds a single dataset
    """
    if isdir(join(directory, split)):
        return load_dataset(join(directory, split))
    if isfile(join(directory, DATASET_META_FILE)):
        return load_dataset(directory)
    raise DatasetFormatError("No '%s' split found in %s (expected one of %s)" % (split, directory, ', '.join(SPLITS)))


def import_csv(abs_file_path, has_velocity=False, dt=1., name=None):
    """
    Read trajectories from a CSV with columns traj_id, t, agent_id, px, py and, optionally, vx, vy
    :param has_velocity: use the vx, vy columns; otherwise velocities are forward differences of positions
    :type has_velocity: bool
    :param dt: time between frames, stored as given
    :type dt: float
    :rtype: TrajectoryDataset
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive, got %s" % dt)
    if not isfile(abs_file_path):
        raise DatasetFormatError("CSV file not found: %s" % abs_file_path)
    table = pd.read_csv(abs_file_path, dtype=str, keep_default_na=False, skipinitialspace=True)
    table.columns = [c.strip() for c in table.columns]
    value_columns = CSV_POSITION_COLUMNS + (CSV_VELOCITY_COLUMNS if has_velocity else [])
    missing = [c for c in CSV_KEY_COLUMNS + value_columns if c not in table.columns]
    if missing:
        raise DatasetFormatError("CSV file %s is missing columns: %s" % (abs_file_path, ', '.join(missing)))

    numeric = table[CSV_KEY_COLUMNS + value_columns].apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=np.float64)).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DatasetFormatError("Unparsable row at line %d of %s: %s" %
                                 (row + 2, abs_file_path, ','.join(table.iloc[row].astype(str))))
    if numeric.duplicated(CSV_KEY_COLUMNS).any():
        row = int(np.flatnonzero(numeric.duplicated(CSV_KEY_COLUMNS).to_numpy())[0])
        raise DatasetFormatError("Duplicate (traj_id, t, agent_id) at line %d of %s" % (row + 2, abs_file_path))

    numeric = numeric.sort_values(CSV_KEY_COLUMNS, kind='mergesort')
    traj_ids = numeric['traj_id'].unique()
    agents = np.sort(numeric['agent_id'].unique())
    frames = None
    for traj_id, group in numeric.groupby('traj_id', sort=True):
        times = group['t'].unique()
        if frames is None:
            frames = len(times)
        elif len(times) != frames:
            raise DatasetFormatError("Ragged trajectories in %s: trajectory %s has %d frames, expected %d" %
                                     (abs_file_path, traj_id, len(times), frames))
        for t, frame in group.groupby('t', sort=True):
            if len(frame) != len(agents) or not np.array_equal(np.sort(frame['agent_id'].to_numpy()), agents):
                absent = sorted(set(agents) - set(frame['agent_id']))
                raise DatasetFormatError("Trajectory %s is missing agents %s at t=%s in %s" %
                                         (traj_id, absent, t, abs_file_path))

    n_traj, n_agents = len(traj_ids), len(agents)
    frames = frames or 0
    values = numeric[value_columns].to_numpy(dtype=np.float64).reshape(n_traj, frames, n_agents, len(value_columns))
    if has_velocity:
        data = values
    else:
        velocities = np.zeros_like(values)
        if frames > 1:
            velocities[:, :-1] = (values[:, 1:] - values[:, :-1]) / dt
            velocities[:, -1] = velocities[:, -2]
        data = np.concatenate([values, velocities], axis=-1)
    ds = TrajectoryDataset(data, dt, name=name or basename(abs_file_path).rsplit('.', 1)[0])
    logger.info("Imported %s from %s", ds, abs_file_path)
    return ds
