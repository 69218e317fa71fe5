"""
Option resolution for management commands.

Precedence: command-line flags > --config file > settings.KCSC defaults.
A --config file is either TOML key/value text (top-level keys, optionally
overridden by a table named after the command) or a manifest.json written by
an earlier run, whose recorded config is replayed. The value "latest" replays
the most recent ledger entry of the same command.
"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .exceptions import ConfigError, DataFileError
from .serializers import RunManifestSerializer

logger = logging.getLogger(__name__)

LATEST = 'latest'


def latest_config(command: str) -> Dict[str, Any]:
    """Config recorded by the most recent run of command in the ledger."""
    from .models import RunManifest

    manifest = RunManifest.latest_for(command)
    if manifest is None:
        raise DataFileError(f"no recorded {command} run to replay")
    logger.info(f"replaying {command} run written to {manifest.output_path}")
    return dict(manifest.config)


def load_config_file(path, command: str) -> Dict[str, Any]:
    if str(path) == LATEST:
        return latest_config(command)
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"config file {path} does not exist")
    if path.suffix.lower() == '.json':
        document = RunManifestSerializer.read(path)
        if document['command'] != command:
            logger.warning(f"replaying a {document['command']} manifest into {command}")
        return dict(document['config'])
    try:
        with open(path, 'rb') as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}", field='config') from exc
    section = data.pop(command, {}) if isinstance(data.get(command), dict) else {}
    values = {k: v for k, v in data.items() if not isinstance(v, dict)}
    values.update(section)
    return {k.replace('-', '_'): v for k, v in values.items()}


def resolve_options(options: Dict[str, Any], defaults: Dict[str, Any], command: str,
                    warn_unknown: bool = True) -> Dict[str, Any]:
    """Merge flags, config file values and defaults for the keys listed in defaults."""
    file_values = load_config_file(options['config'], command) if options.get('config') else {}
    unknown = sorted(set(file_values) - set(defaults))
    if unknown and warn_unknown:
        logger.warning(f"ignoring unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        if options.get(key) is not None:
            resolved[key] = options[key]
        elif key in file_values:
            resolved[key] = file_values[key]
        else:
            resolved[key] = default
    return resolved


def as_ints(value, field: str) -> Optional[Tuple[int, ...]]:
    """'25,25,25', [25, 25, 25] or 25 -> (25, 25, 25) / (25,)."""
    if value is None:
        return None
    try:
        if isinstance(value, str):
            return tuple(int(v) for v in value.split(',') if v.strip())
        if isinstance(value, (list, tuple)):
            return tuple(int(v) for v in value)
        return (int(value),)
    except ValueError as exc:
        raise ConfigError(f"--{field.replace('_', '-')} expects comma-separated integers, got {value!r}",
                          field=field) from exc


def as_floats(value, field: str) -> Optional[Tuple[float, ...]]:
    if value is None:
        return None
    try:
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(',') if v.strip())
        if isinstance(value, (list, tuple)):
            return tuple(float(v) for v in value)
        return (float(value),)
    except ValueError as exc:
        raise ConfigError(f"--{field.replace('_', '-')} expects comma-separated numbers, got {value!r}",
                          field=field) from exc


def per_mode(values: Tuple[float, ...], order: int, field: str) -> Tuple[float, ...]:
    """Broadcast a single weight to every mode."""
    if len(values) == 1:
        return values * order
    if len(values) != order:
        raise ConfigError(f"--{field} needs 1 or {order} values, got {len(values)}", field=field)
    return values


def log_grid(spec: str) -> Tuple[float, ...]:
    """'lo:hi:count' -> log-spaced values, limited to [1e-4, 100]."""
    import numpy as np

    try:
        lo, hi, count = spec.split(':')
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as exc:
        raise ConfigError(f"grid {spec!r} must read lo:hi:count", field='alpha_grid') from exc
    if not 1e-4 <= lo <= hi <= 100 or count < 1:
        raise ConfigError(f"grid {spec!r} must satisfy 1e-4 <= lo <= hi <= 100, count >= 1", field='alpha_grid')
    return tuple(float(v) for v in np.geomspace(lo, hi, count))


SOLVER_KEYS = (
    'k', 'window', 'rank', 'alpha', 'beta', 'solver', 'restarts', 'seed', 'max_sweeps', 'tol',
    'inner_max_iters', 'inner_tol', 'rho', 'dstep_max_iters', 'dstep_tol', 'mode_order',
    'monotone', 'nonnegative', 'no_gram_opt', 'threads', 'baseline_max_iters', 'baseline_tol',
    'effective_rank_tol',
)


def solver_defaults() -> Dict[str, Any]:
    """Solver option defaults taken from settings.KCSC."""
    from django.conf import settings

    kcsc = settings.KCSC
    return {
        'k': 3,
        'window': None,
        'rank': kcsc['RANK'],
        'alpha': kcsc['ALPHA'],
        'beta': kcsc['BETA'],
        'solver': 'kcsc',
        'restarts': kcsc['RESTARTS'],
        'seed': kcsc['SEED'],
        'max_sweeps': kcsc['OUTER_MAX_SWEEPS'],
        'tol': kcsc['OUTER_TOL'],
        'inner_max_iters': kcsc['INNER_MAX_ITERS'],
        'inner_tol': kcsc['INNER_TOL'],
        'rho': kcsc['RHO'],
        'dstep_max_iters': kcsc['DSTEP_MAX_ITERS'],
        'dstep_tol': kcsc['DSTEP_TOL'],
        'mode_order': None,
        'monotone': False,
        'nonnegative': False,
        'no_gram_opt': False,
        'threads': kcsc['THREADS'],
        'baseline_max_iters': kcsc['BASELINE_MAX_ITERS'],
        'baseline_tol': kcsc['BASELINE_TOL'],
        'effective_rank_tol': kcsc['EFFECTIVE_RANK_TOL'],
    }


def build_solver_config(values: Dict[str, Any], order: int, n_atoms: int = None,
                        window: Tuple[int, ...] = None):
    """
    SolverConfig from resolved option values.

    n_atoms and window, when given, come from a fixed dictionary and win over
    the option values.
    """
    from .solver import SolverConfig
    from .zstep import RegWeights

    if window is None:
        window = as_ints(values.get('window'), 'window')
        if window is None:
            raise ConfigError('--window is required', field='window')
    alpha = per_mode(as_floats(values['alpha'], 'alpha'), order, 'alpha')
    beta = per_mode(as_floats(values['beta'], 'beta'), order, 'beta')
    try:
        return SolverConfig(
            n_atoms=int(n_atoms if n_atoms is not None else values['k']),
            rank=int(values['rank']),
            window=tuple(window),
            reg=RegWeights(alpha, beta, bool(values['nonnegative'])),
            max_sweeps=int(values['max_sweeps']),
            tol=float(values['tol']),
            inner_max_iters=int(values['inner_max_iters']),
            inner_tol=float(values['inner_tol']),
            restarts=int(values['restarts']),
            seed=int(values['seed']),
            mode_order=as_ints(values.get('mode_order'), 'mode_order'),
            monotone=bool(values['monotone']),
            rho=float(values['rho']),
            dstep_max_iters=int(values['dstep_max_iters']),
            dstep_tol=float(values['dstep_tol']),
            solver=str(values['solver']),
            use_gram=not bool(values['no_gram_opt']),
            threads=max(1, int(values['threads'])),
            baseline_max_iters=int(values['baseline_max_iters']),
            baseline_tol=float(values['baseline_tol']),
            effective_rank_tol=float(values['effective_rank_tol']),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver option: {exc}") from exc
