"""
JSON serializers for run manifests and fitted models.

Provides:
- FitResultSerializer: FitResult -> metadata dict for model.json
- RunManifestSerializer: manifest.json documents mirrored into RunManifest rows
"""

import json
import math
from pathlib import Path
from typing import Dict

import numpy as np

from .exceptions import DataFileError


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def jsonable(value):
    """Plain JSON types from numpy scalars, arrays, tuples and paths; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, Path):
        return str(value)
    return _finite_or_none(value)


class FitResultSerializer:
    """
    Serializer for solver.FitResult.

    The dictionary and activations go to tensor files; this dict carries
    everything else.
    """
    @staticmethod
    def serialize(result, config: Dict) -> Dict:
        return jsonable({
            'config': config,
            'seed': config.get('seed'),
            'restart': result.restart,
            'restart_objectives': [float(v) for v in result.restart_objectives],
            'objective_trace': [float(v) for v in result.objective_trace],
            'effective_ranks': result.effective_ranks,
            'timings': {k: float(v) for k, v in result.timings.items()},
            'iterations': dict(result.iterations),
            'n_atoms': result.dictionary.n_atoms,
            'window': list(result.dictionary.window),
            'signal_shape': list(result.dictionary.signal_shape),
            'kind': 'dense' if result.dense_activations is not None else 'kruskal',
        })


class RunManifestSerializer:
    """
    Reads and writes the manifest.json document stored next to every output.
    """

    @staticmethod
    def write(document: Dict, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(document, indent=2, default=str))
        return path

    @staticmethod
    def read(path) -> Dict:
        """Load a manifest.json, checking the fields a replay needs."""
        path = Path(path)
        try:
            document = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFileError(f"cannot read manifest {path}: {exc}") from exc
        missing = [f for f in ('command', 'config') if f not in document]
        if missing:
            raise DataFileError(f"manifest {path} lacks {', '.join(missing)}")
        return document
