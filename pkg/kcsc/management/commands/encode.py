"""
Management command to encode signals against a fixed dictionary.

Usage:
    python manage.py encode --signals data/small/signals.ktns --dictionary data/small/truth \
        --out codes/r2 --r 2 --truth data/small/truth
"""

from pathlib import Path

from kcsc.config import build_solver_config, resolve_options, solver_defaults
from kcsc.decorators import command_errors
from kcsc.management.base import KcscCommand
from kcsc.management.commands.fit import load_reference
from kcsc.serializers import FitResultSerializer
from kcsc.solver import encode
from kcsc.storage import ensure_output, load_dictionary, read_signals, save_model
from kcsc.synthgen import evaluate_fit


class Command(KcscCommand):
    help = 'Compute Kruskal (or dense baseline) activations for a fixed dictionary'
    command_name = 'encode'

    def add_arguments(self, parser):
        parser.add_argument('--signals', required=True)
        parser.add_argument('--dictionary', required=True, help='Model directory or its dictionary.ktns')
        parser.add_argument('--out', required=True, help='Output model directory')
        parser.add_argument('--clean', help='Clean signals for RMSE(Y)')
        parser.add_argument('--truth', help='True model directory for RMSE(Z)')
        self.add_solver_arguments(parser, with_shape=False)
        self.add_common_arguments(parser)

    @command_errors
    def handle(self, *args, **options):
        """Encode and write activations"""
        self.configure_logging(options)
        values = resolve_options(options, solver_defaults(), 'encode')
        dictionary = load_dictionary(options['dictionary'])
        config = build_solver_config(values, dictionary.order, dictionary.n_atoms, dictionary.window)
        signals = read_signals(options['signals'], dictionary.order)
        clean, truth = load_reference(options, dictionary.order)

        out = ensure_output(options['out'], options['force'], is_dir=True)
        with self.workers(config.threads):
            result = encode(signals, dictionary, config)
        metrics = evaluate_fit(result, signals, clean, truth)
        metrics['effective_ranks'] = result.effective_ranks

        metadata = FitResultSerializer.serialize(result, config.to_dict())
        activations = result.dense_activations if result.dense_activations is not None else result.activations
        save_model(out, result.dictionary, activations, metadata, force=True)
        inputs = [options['signals'], options['dictionary']]
        inputs += [p for p in (options.get('clean'), options.get('truth')) if p]
        self.record_run(Path(out) / 'manifest.json', values, config.seed, inputs, out,
                        timings=result.timings, metrics=metrics)
        summary = f"{config.solver} R={config.rank}: RMSE(Y) {metrics['rmse_y']:.3e}"
        if 'rmse_z' in metrics:
            summary += f", RMSE(Z) {metrics['rmse_z']:.3e}"
        self.stdout.write(self.style.SUCCESS(summary))
