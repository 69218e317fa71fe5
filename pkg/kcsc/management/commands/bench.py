"""
Management command to benchmark K-CSC against the dense baselines.

Usage:
    python manage.py bench --dataset data/small --out bench/small --ranks 1,2,3 --restarts 10
    python manage.py bench --dataset data/small --out bench/grid --alpha-grid 1e-3:1:7 --select-by rmse_y
    python manage.py bench --sizes 16,32,64 --out bench/timing --restarts 1 --max-sweeps 1
    python manage.py bench --sizes 64 --out bench/naive --solvers kcsc --no-gram-opt
    python manage.py bench --dataset data/small --out bench/held --task fit --holdout 2 \
        --alpha-grid 1e-4:1e-1:4 --select-by rmse_y_holdout

Writes <out>/bench.csv (one row per solver, size, rank, alpha and restart),
<out>/bench.json (rows plus per-group summaries) and <out>/manifest.json.
With --holdout H the last H signals are kept out of a fit and encoded with the
learned dictionary; rmse_y_holdout scores those reconstructions.

Plotting is left to external tools: e.g. RMSE(Z) against SNR per solver, or
log(zstep_seconds_per_iteration) against log(signal_size) per solver.
"""

import csv
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List

import numpy as np

from kcsc.config import (
    as_floats, as_ints, build_solver_config, log_grid, resolve_options, solver_defaults,
)
from kcsc.decorators import command_errors
from kcsc.exceptions import ConfigError, DataFileError
from kcsc.management.base import KcscCommand
from kcsc.serializers import RunManifestSerializer, jsonable
from kcsc.solver import SOLVERS, encode, fit
from kcsc.storage import ensure_output, load_model, read_signals
from kcsc.synthgen import SynthConfig, evaluate_fit, generate, hit_rate

CSV_COLUMNS = (
    'solver', 'task', 'signal_size', 'rank', 'alpha', 'restart', 'seed', 'gram_opt',
    'objective', 'rmse_y', 'rmse_z', 'rmse_y_holdout',
    'hit_y_1e-3', 'hit_y_1e-2', 'hit_z_1e-3', 'hit_z_1e-2',
    'zstep_seconds', 'dstep_seconds', 'total_seconds',
    'zstep_iterations', 'dstep_iterations', 'sweeps', 'zstep_seconds_per_iteration',
    'selected',
)
HIT_THRESHOLDS = {'1e-3': 1e-3, '1e-2': 1e-2}
SELECT_BY = ('objective', 'rmse_y', 'rmse_y_holdout')


def parse_solvers(value) -> List[str]:
    if isinstance(value, str):
        names = [v.strip() for v in value.split(',') if v.strip()]
    else:
        names = [str(v) for v in (value or [])]
    if not names:
        raise ConfigError('empty solver list', field='solvers')
    unknown = [n for n in names if n not in SOLVERS]
    if unknown:
        raise ConfigError(f"unknown solver(s) {', '.join(unknown)}, choose from {', '.join(SOLVERS)}",
                          field='solvers')
    return names


class Command(KcscCommand):
    help = (
        'Benchmark solvers on a synthetic dataset or on generated signals of several sizes. '
        'CSV columns: ' + ', '.join(CSV_COLUMNS)
    )
    command_name = 'bench'

    def add_arguments(self, parser):
        parser.add_argument('--dataset', help='Directory written by synth (signals.ktns, clean.ktns, truth/)')
        parser.add_argument('--sizes', help='Cubic signal sizes to generate instead of --dataset, e.g. 16,32,64')
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--solvers', help=f"Comma separated subset of {', '.join(SOLVERS)}")
        parser.add_argument('--task', choices=['encode', 'fit'],
                            help='encode with the true dictionary (default) or learn it')
        parser.add_argument('--ranks', help='Ranks to sweep, comma separated')
        parser.add_argument('--alpha-grid', help='Log-spaced alpha values lo:hi:count within [1e-4, 100]')
        parser.add_argument('--select-by', choices=SELECT_BY,
                            help='Metric whose median picks the reported alpha per solver and rank. '
                                 'objective carries the alpha-weighted penalty and so favours the smallest '
                                 'alpha; rmse_y is measured on the fitted signals themselves; '
                                 'rmse_y_holdout (with --holdout) scores signals left out of the fit')
        parser.add_argument('--holdout', type=int,
                            help='Number of trailing signals left out of a fit task and encoded with the '
                                 'learned dictionary')
        parser.add_argument('--bernoulli', type=float, help='Activation density for --sizes data')
        parser.add_argument('--snr', type=float, help='Noise level in dB for --sizes data')
        self.add_solver_arguments(parser)
        self.add_common_arguments(parser)

    def _defaults(self) -> Dict:
        defaults = solver_defaults()
        defaults.update({
            'solvers': ','.join(SOLVERS),
            'task': 'encode',
            'ranks': None,
            'alpha_grid': None,
            'select_by': 'objective',
            'holdout': 0,
            'sizes': None,
            'bernoulli': SynthConfig().bernoulli,
            'snr': None,
        })
        return defaults

    def _datasets(self, options, values):
        """(signal_size, signals, clean, truth) for every benchmarked dataset."""
        sizes = as_ints(values['sizes'], 'sizes')
        if sizes:
            window = as_ints(values['window'], 'window') or SynthConfig().window
            for n in sizes:
                config = SynthConfig(
                    signal_shape=(n,) * len(window), n_atoms=int(values['k']), window=window,
                    rank=int(values['rank']), bernoulli=float(values['bernoulli']),
                    snr=None if values['snr'] is None else float(values['snr']),
                    n_signals=1 + int(values['holdout']), seed=int(values['seed']),
                )
                data = generate(config)
                yield n ** len(window), data.signals, data.clean, (data.dictionary, data.activations)
            return
        if not options.get('dataset'):
            raise ConfigError('either --dataset or --sizes is required', field='dataset')
        directory = Path(options['dataset'])
        truth_dir = directory / 'truth'
        truth = None
        if truth_dir.exists():
            dictionary, activations, _ = load_model(truth_dir)
            truth = (dictionary, activations)
        elif values['task'] == 'encode':
            raise DataFileError(f"{truth_dir} is missing; encode benchmarks need the true dictionary")
        order = truth[0].order if truth else len(as_ints(values['window'], 'window') or ())
        signals = read_signals(directory / 'signals.ktns', order)
        clean = read_signals(directory / 'clean.ktns', order) if (directory / 'clean.ktns').exists() else None
        yield int(np.prod(signals.shape[1:])), signals, clean, truth

    def _run_once(self, task, signals, config, truth):
        start = time.perf_counter()
        with self.workers(config.threads):
            if task == 'encode':
                result = encode(signals, truth[0], config)
            else:
                result = fit(signals, config)
        return result, time.perf_counter() - start

    @staticmethod
    def split(holdout: int, signals, clean, truth):
        """Training part and held-out part (signals, clean) of a dataset."""
        if not holdout:
            return (signals, clean, truth), None
        if holdout >= signals.shape[0]:
            raise ConfigError(f"--holdout {holdout} leaves none of the {signals.shape[0]} signals to fit",
                              field='holdout')
        cut = signals.shape[0] - holdout
        held_clean = None if clean is None else clean[cut:]
        train_clean = None if clean is None else clean[:cut]
        train_truth = None if truth is None else (truth[0], truth[1][:cut])
        return (signals[:cut], train_clean, train_truth), (signals[cut:], held_clean)

    def _holdout_rmse(self, held, result, config) -> float:
        held_signals, held_clean = held
        with self.workers(config.threads):
            encoded = encode(held_signals, result.dictionary, config)
        return evaluate_fit(encoded, held_signals, held_clean)['rmse_y']

    def _group_rows(self, task, size, alpha, signals, clean, truth, config, held=None) -> List[Dict]:
        # Baseline encodes start from zero activations, so their restarts coincide.
        restarts = 1 if (config.solver != 'kcsc' and task == 'encode') else config.restarts
        rows = []
        for restart in range(restarts):
            run_config = replace(config, restarts=1, seed=config.seed + restart)
            result, total = self._run_once(task, signals, run_config, truth)
            metrics = evaluate_fit(result, signals, clean, truth)
            holdout_rmse = self._holdout_rmse(held, result, run_config) if held is not None else None
            zstep_iters = result.iterations.get('zstep', 0)
            rows.append({
                'solver': config.solver,
                'task': task,
                'signal_size': size,
                'rank': config.rank,
                'alpha': alpha,
                'restart': restart,
                'seed': run_config.seed,
                'gram_opt': config.use_gram,
                'objective': metrics['objective'],
                'rmse_y': metrics['rmse_y'],
                'rmse_z': metrics.get('rmse_z'),
                'rmse_y_holdout': holdout_rmse,
                'zstep_seconds': result.timings['zstep'],
                'dstep_seconds': result.timings['dstep'],
                'total_seconds': total,
                'zstep_iterations': zstep_iters,
                'dstep_iterations': result.iterations.get('dstep', 0),
                'sweeps': result.iterations.get('sweeps', 0),
                'zstep_seconds_per_iteration': result.timings['zstep'] / zstep_iters if zstep_iters else None,
                'selected': False,
            })
            self.stdout.write(
                f"{config.solver} size={size} R={config.rank} alpha={alpha} restart {restart}: "
                f"RMSE(Y) {metrics['rmse_y']:.3e} in {total:.2f}s"
            )
        has_z = all(r['rmse_z'] is not None for r in rows)
        for name, eps in HIT_THRESHOLDS.items():
            hit_y = hit_rate([r['rmse_y'] for r in rows], eps)
            hit_z = hit_rate([r['rmse_z'] for r in rows], eps) if has_z else None
            for row in rows:
                row[f"hit_y_{name}"] = hit_y
                row[f"hit_z_{name}"] = hit_z
        return rows

    @staticmethod
    def select(rows: List[Dict], select_by: str) -> List[Dict]:
        """Mark the alpha with the smallest median select_by metric per (size, solver, rank)."""
        groups: Dict[tuple, Dict[str, List[float]]] = {}
        for row in rows:
            key = (row['signal_size'], row['solver'], row['rank'])
            groups.setdefault(key, {}).setdefault(row['alpha'], []).append(row[select_by])
        summaries = []
        for (size, solver, rank), by_alpha in groups.items():
            medians = {alpha: float(np.median(v)) for alpha, v in by_alpha.items()}
            best = min(medians, key=medians.get)
            for row in rows:
                if (row['signal_size'], row['solver'], row['rank'], row['alpha']) == (size, solver, rank, best):
                    row['selected'] = True
            summaries.append({'signal_size': size, 'solver': solver, 'rank': rank, 'alpha': best,
                              f"median_{select_by}": medians[best]})
        return summaries

    @command_errors
    def handle(self, *args, **options):
        """Run every (dataset, solver, rank, alpha) group and write the tables"""
        self.configure_logging(options)
        values = resolve_options(options, self._defaults(), 'bench')
        solvers = parse_solvers(values['solvers'])
        if values['select_by'] not in SELECT_BY:
            raise ConfigError(f"--select-by must be one of {', '.join(SELECT_BY)}", field='select_by')
        ranks = as_ints(values['ranks'], 'ranks') or (int(values['rank']),)
        alphas = log_grid(values['alpha_grid']) if values['alpha_grid'] else (values['alpha'],)
        task = values['task']
        if task not in ('encode', 'fit'):
            raise ConfigError(f"--task must be encode or fit, got {task!r}", field='task')
        holdout = int(values['holdout'] or 0)
        if holdout < 0 or (holdout and task != 'fit'):
            raise ConfigError('--holdout takes a positive count and needs --task fit', field='holdout')
        if values['select_by'] == 'rmse_y_holdout' and not holdout:
            raise ConfigError('--select-by rmse_y_holdout needs --holdout', field='select_by')

        out = ensure_output(options['out'], options['force'], is_dir=True)
        rows = []
        start = time.perf_counter()
        for size, signals, clean, truth in self._datasets(options, values):
            (signals, clean, truth), held = self.split(holdout, signals, clean, truth)
            order = signals.ndim - 1
            for solver in solvers:
                for rank in ranks:
                    for alpha in alphas:
                        point = dict(values, solver=solver, rank=rank, alpha=alpha)
                        if task == 'encode':
                            config = build_solver_config(point, order, truth[0].n_atoms, truth[0].window)
                        else:
                            config = build_solver_config(point, order)
                        label = ','.join(f"{a:g}" for a in as_floats(alpha, 'alpha'))
                        rows.extend(self._group_rows(task, size, label, signals, clean, truth, config, held))
        summaries = self.select(rows, values['select_by'])
        elapsed = time.perf_counter() - start

        with open(out / 'bench.csv', 'w', newline='') as handle:
            writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: '' if row.get(k) is None else row[k] for k in CSV_COLUMNS})
        RunManifestSerializer.write(jsonable({'columns': CSV_COLUMNS, 'rows': rows, 'selected': summaries}),
                                    out / 'bench.json')
        inputs = [options['dataset']] if options.get('dataset') else []
        self.record_run(out / 'manifest.json', values, int(values['seed']), inputs, out,
                        timings={'bench': elapsed}, metrics={'selected': summaries}, rows=rows)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(rows)} rows to {out / 'bench.csv'}"))
