#!/usr/bin/env python
# -*- coding: utf-8 -*-

# tests.test_dataset.py
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import json
from os.path import join
import numpy as np
import pytest
from binn.data.dataset import TrajectoryDataset, import_csv, load_dataset, load_split, save_dataset, save_splits
from binn.paths import DATASET_BLOB_FILE, DATASET_META_FILE
from binn.tools.errors import DatasetFormatError, PreconditionError, ShapeError


def _write(path, lines):
    with open(path, 'w') as document:
        document.write('\n'.join(lines) + '\n')
    return str(path)


def test_round_trip(tmp_path, tiny_dataset):
    directory = str(tmp_path / 'tiny')
    save_dataset(tiny_dataset, directory)
    loaded = load_dataset(directory)
    assert loaded.data.shape == tiny_dataset.data.shape
    assert loaded.dt == tiny_dataset.dt
    assert loaded.name == 'tiny'
    np.testing.assert_array_equal(loaded.data, tiny_dataset.data.astype(np.float32))


def test_blob_is_little_endian_float32(tmp_path, tiny_dataset):
    directory = str(tmp_path / 'tiny')
    save_dataset(tiny_dataset, directory)
    raw = np.fromfile(join(directory, DATASET_BLOB_FILE), dtype='<f4')
    assert raw.size == tiny_dataset.data.size
    with open(join(directory, DATASET_META_FILE)) as document:
        meta = json.load(document)
    assert (meta['n_traj'], meta['T'], meta['n_agents'], meta['state_dim']) == tiny_dataset.data.shape


def test_truncated_blob(tmp_path, tiny_dataset):
    directory = str(tmp_path / 'tiny')
    save_dataset(tiny_dataset, directory)
    blob = join(directory, DATASET_BLOB_FILE)
    with open(blob, 'rb') as document:
        content = document.read()
    with open(blob, 'wb') as document:
        document.write(content[:-4])
    with pytest.raises(DatasetFormatError, match='expected %d bytes' % len(content)):
        load_dataset(directory)


def test_unsupported_format_version(tmp_path, tiny_dataset):
    directory = str(tmp_path / 'tiny')
    save_dataset(tiny_dataset, directory)
    meta_path = join(directory, DATASET_META_FILE)
    with open(meta_path) as document:
        meta = json.load(document)
    meta['format_version'] = 99
    with open(meta_path, 'w') as document:
        json.dump(meta, document)
    with pytest.raises(DatasetFormatError, match='version'):
        load_dataset(directory)


def test_missing_dataset(tmp_path):
    with pytest.raises(DatasetFormatError):
        load_dataset(str(tmp_path))
    with pytest.raises(DatasetFormatError):
        load_split(str(tmp_path), 'train')


def test_splits(tmp_path, tiny_dataset):
    splits = {'train': tiny_dataset.subset([0, 1]), 'val': tiny_dataset.subset([2])}
    save_splits(splits, str(tmp_path))
    assert len(load_split(str(tmp_path), 'train')) == 2
    assert len(load_split(str(tmp_path), 'val')) == 1
    save_dataset(tiny_dataset, str(tmp_path / 'single'))
    assert len(load_split(str(tmp_path / 'single'), 'test')) == 3


def test_dataset_validation():
    with pytest.raises(ShapeError):
        TrajectoryDataset(np.zeros((2, 3, 4)), 0.1)
    with pytest.raises(ShapeError):
        TrajectoryDataset(np.zeros((2, 3, 1, 3)), 0.1)
    with pytest.raises(PreconditionError):
        TrajectoryDataset(np.zeros((2, 3, 1, 4)), 0.)
    data = np.zeros((2, 3, 1, 4))
    data[1, 2, 0, 0] = np.nan
    with pytest.raises(DatasetFormatError):
        TrajectoryDataset(data, 0.1)


def test_compatibility(tiny_dataset):
    tiny_dataset.check_compatible(tiny_dataset.subset([0]))
    with pytest.raises(ShapeError):
        tiny_dataset.check_compatible(TrajectoryDataset(np.zeros((1, 4, 3, 4)), 0.1))
    with pytest.raises(ShapeError):
        tiny_dataset.check_compatible(TrajectoryDataset(tiny_dataset.data, 0.2))


def test_positions_and_velocities(linear_dataset):
    np.testing.assert_allclose(linear_dataset.positions[0, 1], [[0.1, 0.2], [0.95, -0.975]])
    np.testing.assert_allclose(linear_dataset.velocities[0, 3, 0], [1., 2.])


CSV_HEADER = 'traj_id,t,agent_id,px,py'


def test_import_csv_forward_differences(tmp_path):
    path = _write(tmp_path / 'walk.csv', [
        CSV_HEADER,
        '0,0,0,0.0,0.0', '0,0,1,1.0,1.0',
        '0,1,0,0.5,0.0', '0,1,1,1.0,2.0',
        '0,2,0,1.5,0.0', '0,2,1,1.0,4.0'])
    ds = import_csv(path, dt=0.5)
    assert ds.data.shape == (1, 3, 2, 4)
    assert ds.name == 'walk'
    assert ds.dt == 0.5
    np.testing.assert_allclose(ds.velocities[0, :, 0], [[1., 0.], [2., 0.], [2., 0.]])
    np.testing.assert_allclose(ds.velocities[0, :, 1], [[0., 2.], [0., 4.], [0., 4.]])


def test_import_csv_sorts_rows(tmp_path):
    path = _write(tmp_path / 'shuffled.csv', [
        CSV_HEADER + ',vx,vy',
        '1,1,0,4,4,0,0', '0,1,0,2,2,1,1', '1,0,0,3,3,0,0', '0,0,0,1,1,1,1'])
    ds = import_csv(path, has_velocity=True)
    np.testing.assert_array_equal(ds.positions[:, :, 0, 0], [[1., 2.], [3., 4.]])
    np.testing.assert_array_equal(ds.velocities[0, :, 0], [[1., 1.], [1., 1.]])


def test_import_csv_names_the_bad_line(tmp_path):
    path = _write(tmp_path / 'bad.csv', [CSV_HEADER, '0,0,0,0.0,0.0', '0,1,0,oops,0.0'])
    with pytest.raises(DatasetFormatError, match='line 3'):
        import_csv(path)


def test_import_csv_ragged(tmp_path):
    path = _write(tmp_path / 'ragged.csv', [CSV_HEADER, '0,0,0,0,0', '0,1,0,1,1', '1,0,0,0,0'])
    with pytest.raises(DatasetFormatError, match='Ragged'):
        import_csv(path)


def test_import_csv_missing_agent(tmp_path):
    path = _write(tmp_path / 'missing.csv', [CSV_HEADER, '0,0,0,0,0', '0,0,1,1,1', '0,1,0,1,1'])
    with pytest.raises(DatasetFormatError, match='missing agents'):
        import_csv(path)


def test_import_csv_duplicate_row(tmp_path):
    path = _write(tmp_path / 'duplicate.csv', [CSV_HEADER, '0,0,0,0,0', '0,0,0,1,1'])
    with pytest.raises(DatasetFormatError, match='Duplicate'):
        import_csv(path)


def test_import_csv_missing_columns(tmp_path):
    path = _write(tmp_path / 'columns.csv', ['traj_id,t,agent_id,px', '0,0,0,0'])
    with pytest.raises(DatasetFormatError, match='missing columns: py'):
        import_csv(path)
    with pytest.raises(DatasetFormatError, match='missing columns: vx'):
        import_csv(_write(tmp_path / 'positions.csv', [CSV_HEADER, '0,0,0,0,0']), has_velocity=True)
