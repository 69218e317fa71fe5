import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from kcsc.exceptions import DataFileError, DimensionError
from kcsc.storage import (
    ensure_output, load_dictionary, load_model, read_signals, read_tensor, save_model, write_tensor,
)
from kcsc.tests.utils import random_problem


class TensorFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_layout(self):
        t = np.arange(6.0).reshape(2, 3)
        path = self.dir / 't.ktns'
        write_tensor(path, t)
        raw = path.read_bytes()
        self.assertEqual(raw[:4], b'KTNS')
        self.assertEqual(int.from_bytes(raw[4:6], 'little'), 1)
        self.assertEqual(int.from_bytes(raw[6:8], 'little'), 2)
        self.assertEqual(int.from_bytes(raw[8:16], 'little'), 2)
        self.assertEqual(int.from_bytes(raw[16:24], 'little'), 3)
        self.assertEqual(len(raw), 24 + 6 * 8)
        assert_array_equal(read_tensor(path), t)
        self.assertTrue(read_tensor(path).flags.writeable)

    def test_bad_files(self):
        bad = self.dir / 'bad.ktns'
        bad.write_bytes(b'NOPE' + bytes(20))
        with self.assertRaises(DataFileError):
            read_tensor(bad)
        truncated = self.dir / 'short.ktns'
        write_tensor(truncated, np.ones((3, 3)))
        truncated.write_bytes(truncated.read_bytes()[:-8])
        with self.assertRaises(DataFileError):
            read_tensor(truncated)
        with self.assertRaises(DataFileError):
            read_tensor(self.dir / 'missing.ktns')
        empty = self.dir / 'empty.ktns'
        write_tensor(empty, np.zeros((3, 0)))
        with self.assertRaises(DataFileError):
            read_tensor(empty)

    def test_read_signals_order(self):
        path = self.dir / 's.ktns'
        write_tensor(path, np.zeros((4, 4, 4)))
        self.assertEqual(read_signals(path, 3).shape, (1, 4, 4, 4))
        self.assertEqual(read_signals(path, 2).shape, (4, 4, 4))
        with self.assertRaises(DimensionError):
            read_signals(path, 1)

    def test_refuses_existing_output(self):
        path = self.dir / 'out.ktns'
        path.write_bytes(b'')
        with self.assertRaises(DataFileError):
            ensure_output(path, force=False)
        self.assertEqual(ensure_output(path, force=True), path)


class ModelDirectoryTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name) / 'model'

    def test_kruskal_model(self):
        _, dictionary, acts = random_problem((4, 5, 3), 2, (2, 2, 2), 2, seed=1)
        save_model(self.dir, dictionary, [acts, acts], {'seed': 3})
        loaded, activations, metadata = load_model(self.dir)
        assert_array_equal(loaded.atoms, dictionary.atoms)
        self.assertEqual(loaded.signal_shape, (4, 5, 3))
        self.assertEqual(len(activations), 2)
        for mode in range(3):
            assert_array_equal(activations[1][1].factors[mode], acts[1].factors[mode])
        self.assertEqual(metadata['seed'], 3)
        self.assertEqual(load_dictionary(self.dir / 'dictionary.ktns').window, (2, 2, 2))

    def test_dense_model_replaces_stale_factors(self):
        _, dictionary, acts = random_problem((4, 4), 2, (2, 2), 1, seed=2)
        save_model(self.dir, dictionary, [acts], {})
        dense = np.random.default_rng(0).standard_normal((1, 2, 4, 4))
        save_model(self.dir, dictionary, dense, {}, force=True)
        _, activations, _ = load_model(self.dir)
        assert_array_equal(activations, dense)
        self.assertEqual(json.loads((self.dir / 'model.json').read_text())['signal_shape'], [4, 4])

    def test_missing_metadata(self):
        self.dir.mkdir(parents=True)
        write_tensor(self.dir / 'dictionary.ktns', np.zeros((1, 2, 2)))
        with self.assertRaises(DataFileError):
            load_dictionary(self.dir)
        with self.assertRaises(DataFileError):
            load_model(self.dir)
