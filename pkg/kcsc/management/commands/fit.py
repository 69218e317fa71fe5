"""
Management command to learn a dictionary and Kruskal activations.

Usage:
    python manage.py fit --signals data/small/signals.ktns --out models/small --k 3 --window 5,5,5 --rank 2
    python manage.py fit --signals data/small/signals.ktns --out models/fista --k 3 --window 5,5,5 \
        --solver convfista-fd --alpha 0.1
    python manage.py fit --config models/small/manifest.json --signals ... --out models/replay
    python manage.py fit --signals data/eeg.ktns --out models/eeg --k 2 --window 3,3,3 --nonnegative \
        --dead-channels 0
    python manage.py fit --config latest --signals ... --out models/again
"""

from pathlib import Path

from kcsc.config import as_ints, build_solver_config, resolve_options, solver_defaults
from kcsc.decorators import command_errors
from kcsc.exceptions import ConfigError
from kcsc.management.base import KcscCommand
from kcsc.serializers import FitResultSerializer
from kcsc.solver import channel_mask, fit
from kcsc.storage import ensure_output, load_model, read_signals, save_model
from kcsc.synthgen import evaluate_fit


def load_reference(options, order):
    """Optional clean signals and true model given with --clean / --truth."""
    clean = read_signals(options['clean'], order) if options.get('clean') else None
    truth = None
    if options.get('truth'):
        dictionary, activations, _ = load_model(options['truth'])
        truth = (dictionary, activations)
    return clean, truth


class Command(KcscCommand):
    help = 'Learn a convolutional dictionary with low-rank sparse activations'
    command_name = 'fit'

    def add_arguments(self, parser):
        parser.add_argument('--signals', required=True, help='Signal tensor (N, n_1, ..., n_p) or a single signal')
        parser.add_argument('--out', required=True, help='Model directory')
        parser.add_argument('--clean', help='Clean signals for RMSE(Y)')
        parser.add_argument('--truth', help='True model directory for RMSE(Z)')
        parser.add_argument('--dead-channels',
                            help='Comma separated indices along the first signal axis left out of the fit '
                                 'and filled in from the model')
        self.add_solver_arguments(parser)
        self.add_common_arguments(parser)

    @command_errors
    def handle(self, *args, **options):
        """Fit and write the model directory"""
        self.configure_logging(options)
        values = resolve_options(options, dict(solver_defaults(), dead_channels=None), 'fit')
        window = as_ints(values['window'], 'window')
        if window is None:
            raise ConfigError('--window is required', field='window')
        config = build_solver_config(values, len(window))
        signals = read_signals(options['signals'], config.order)
        clean, truth = load_reference(options, config.order)
        dead = as_ints(values['dead_channels'], 'dead_channels') or ()
        mask = channel_mask(signals.shape[1:], dead) if dead else None

        out = ensure_output(options['out'], options['force'], is_dir=True)
        with self.workers(config.threads):
            result = fit(signals, config, mask=mask)
        metrics = evaluate_fit(result, signals, clean, truth)
        metrics['effective_ranks'] = result.effective_ranks
        if dead:
            metrics['dead_channels'] = list(dead)

        metadata = FitResultSerializer.serialize(result, config.to_dict())
        activations = result.dense_activations if result.dense_activations is not None else result.activations
        save_model(out, result.dictionary, activations, metadata, force=True)
        inputs = [options['signals']] + [p for p in (options.get('clean'), options.get('truth')) if p]
        self.record_run(Path(out) / 'manifest.json', values, config.seed, inputs, out,
                        timings=result.timings, metrics=metrics)
        self.stdout.write(self.style.SUCCESS(
            f"{config.solver}: objective {result.final_objective:.6e} after "
            f"{result.iterations['sweeps']} sweeps (restart {result.restart}), RMSE(Y) {metrics['rmse_y']:.3e}"
        ))
        if 'rmse_z' in metrics:
            self.stdout.write(f"RMSE(Z) {metrics['rmse_z']:.3e}")
