"""
File formats.

Tensor container (.ktns), little-endian:
    b"KTNS" | version u16 | order p u16 | p x dim u64 | prod(dims) x f64, row-major

Model directory:
    dictionary.ktns         (K, w_1, ..., w_p) atom stack
    z_<n>_<k>_<q>.ktns      mode-q factor of atom k for signal n (Kruskal models)
    z_<n>_<k>.ktns          dense activation of atom k for signal n (baseline models)
    model.json              metadata (config, seed, objective trace, ...)
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .exceptions import DataFileError, DimensionError
from .tensor_core import Dictionary, KruskalActivation, as_dense

logger = logging.getLogger(__name__)

MAGIC = b'KTNS'
FORMAT_VERSION = 1
_HEADER = np.dtype([('magic', 'S4'), ('version', '<u2'), ('order', '<u2')])


def write_tensor(path, t: np.ndarray):
    path = Path(path)
    t = np.ascontiguousarray(t, dtype='<f8')
    header = np.array([(MAGIC, FORMAT_VERSION, t.ndim)], dtype=_HEADER)
    with open(path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(np.asarray(t.shape, dtype='<u8').tobytes())
        handle.write(t.tobytes(order='C'))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"tensor file {path} does not exist")
    raw = path.read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise DataFileError(f"{path} is too short to be a tensor container")
    header = np.frombuffer(raw, dtype=_HEADER, count=1)[0]
    if header['magic'] != MAGIC:
        raise DataFileError(f"{path} is not a tensor container (bad magic)")
    if header['version'] != FORMAT_VERSION:
        raise DataFileError(f"{path} has unsupported format version {header['version']}")
    order = int(header['order'])
    offset = _HEADER.itemsize
    dims = tuple(int(n) for n in np.frombuffer(raw, dtype='<u8', count=order, offset=offset))
    offset += 8 * order
    count = int(np.prod(dims)) if dims else 1
    if len(raw) - offset != 8 * count:
        raise DataFileError(f"{path} holds {(len(raw) - offset) // 8} values, header announces {count}")
    try:
        return as_dense(np.frombuffer(raw, dtype='<f8', count=count, offset=offset).astype(np.float64), dims)
    except DimensionError as exc:
        raise DataFileError(f"{path}: {exc.message}") from exc


def read_signals(path, order: int) -> np.ndarray:
    """Read a single order-p signal or an (N, ...) stack, returning a stack."""
    data = read_tensor(path)
    if data.ndim == order:
        return data[None]
    if data.ndim == order + 1:
        return data
    raise DimensionError(f"{path} holds an order-{data.ndim} tensor, expected order {order} or {order + 1}")


def ensure_output(path, force: bool, is_dir: bool = False) -> Path:
    """Refuse to overwrite an existing output unless forced."""
    path = Path(path)
    if path.exists() and not force:
        raise DataFileError(f"{path} already exists (use --force to overwrite)")
    if is_dir:
        path.mkdir(parents=True, exist_ok=True)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_activations(directory: Path, activations: List[List[KruskalActivation]]):
    for n, acts in enumerate(activations):
        for k, z in enumerate(acts):
            for q, factor in enumerate(z.factors):
                write_tensor(directory / f"z_{n}_{k}_{q}.ktns", factor)


def save_dense_activations(directory: Path, activations: np.ndarray):
    for n, acts in enumerate(activations):
        for k, z in enumerate(acts):
            write_tensor(directory / f"z_{n}_{k}.ktns", z)


_KRUSKAL_FILE = re.compile(r'^z_(\d+)_(\d+)_(\d+)\.ktns$')
_DENSE_FILE = re.compile(r'^z_(\d+)_(\d+)\.ktns$')


def load_activations(directory: Path):
    """Kruskal activations as nested lists, or a dense (N, K, ...) array for baseline models."""
    directory = Path(directory)
    kruskal: Dict[Tuple[int, int, int], Path] = {}
    dense: Dict[Tuple[int, int], Path] = {}
    for path in directory.iterdir():
        if match := _KRUSKAL_FILE.match(path.name):
            kruskal[tuple(int(g) for g in match.groups())] = path
        elif match := _DENSE_FILE.match(path.name):
            dense[tuple(int(g) for g in match.groups())] = path
    if dense:
        n_signals = 1 + max(n for n, _ in dense)
        n_atoms = 1 + max(k for _, k in dense)
        return np.stack([
            np.stack([read_tensor(dense[(n, k)]) for k in range(n_atoms)]) for n in range(n_signals)
        ])
    if not kruskal:
        raise DataFileError(f"no activation files in {directory}")
    n_signals = 1 + max(n for n, _, _ in kruskal)
    n_atoms = 1 + max(k for _, k, _ in kruskal)
    order = 1 + max(q for _, _, q in kruskal)
    try:
        return [
            [KruskalActivation(tuple(read_tensor(kruskal[(n, k, q)]) for q in range(order)))
             for k in range(n_atoms)]
            for n in range(n_signals)
        ]
    except KeyError as exc:
        raise DataFileError(f"missing activation factor {exc} in {directory}") from exc


def save_model(directory, dictionary: Dictionary, activations, metadata: Dict, force: bool = False) -> Path:
    """Write atoms, activations (Kruskal lists or a dense array) and model.json."""
    directory = ensure_output(directory, force, is_dir=True)
    for stale in directory.glob('z_*.ktns'):
        stale.unlink()
    write_tensor(directory / 'dictionary.ktns', dictionary.atoms)
    if isinstance(activations, np.ndarray):
        save_dense_activations(directory, activations)
    else:
        save_activations(directory, activations)
    metadata = dict(metadata, signal_shape=list(dictionary.signal_shape))
    (directory / 'model.json').write_text(json.dumps(metadata, indent=2))
    logger.info(f"model written to {directory}")
    return directory


def load_dictionary(path) -> Dictionary:
    """From a model directory, or a dictionary.ktns inside one."""
    path = Path(path)
    directory = path if path.is_dir() else path.parent
    meta_path = directory / 'model.json'
    if not meta_path.exists():
        raise DataFileError(f"no model.json recording the signal shape next to {path}")
    shape = json.loads(meta_path.read_text())['signal_shape']
    atoms = read_tensor(directory / 'dictionary.ktns' if path.is_dir() else path)
    return Dictionary(atoms, tuple(shape))


def load_model(directory):
    directory = Path(directory)
    if not (directory / 'model.json').exists():
        raise DataFileError(f"{directory} is not a model directory (model.json missing)")
    metadata = json.loads((directory / 'model.json').read_text())
    dictionary = Dictionary(read_tensor(directory / 'dictionary.ktns'), tuple(metadata['signal_shape']))
    return dictionary, load_activations(directory), metadata
