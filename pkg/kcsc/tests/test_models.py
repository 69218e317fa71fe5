import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import TestCase

from kcsc.exceptions import DataFileError
from kcsc.models import RunManifest
from kcsc.serializers import RunManifestSerializer, jsonable


class RunManifestTests(TestCase):

    def test_record_and_latest_for(self):
        RunManifest.record(command='fit', config={'rank': 1}, seed=0, output_path='a')
        RunManifest.record(command='fit', config={'rank': 2}, seed=0, output_path='b')
        RunManifest.record(command='synth', config={}, seed=3, output_path='c')
        self.assertEqual(RunManifest.objects.filter(command='fit').count(), 2)
        self.assertEqual(RunManifest.latest_for('synth').seed, 3)
        self.assertIsNone(RunManifest.latest_for('bench'))
        self.assertEqual(str(RunManifest.latest_for('synth')), 'synth -> c')


class RunManifestSerializerTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_jsonable(self):
        document = jsonable({
            'shape': (2, 3), 'value': np.float64(1.5), 'count': np.int64(4),
            'array': np.arange(3), 'path': Path('/x'), 'bad': math.inf,
        })
        self.assertEqual(document, {'shape': [2, 3], 'value': 1.5, 'count': 4,
                                    'array': [0, 1, 2], 'path': '/x', 'bad': None})
        json.dumps(document)

    def test_write_then_read(self):
        path = RunManifestSerializer.write({'command': 'fit', 'config': {'k': 2}}, self.dir / 'manifest.json')
        self.assertEqual(RunManifestSerializer.read(path)['config'], {'k': 2})

    def test_read_rejects_incomplete_or_broken(self):
        (self.dir / 'partial.json').write_text(json.dumps({'command': 'fit'}))
        (self.dir / 'broken.json').write_text('{')
        for name in ('partial.json', 'broken.json', 'missing.json'):
            with self.assertRaises(DataFileError):
                RunManifestSerializer.read(self.dir / name)
