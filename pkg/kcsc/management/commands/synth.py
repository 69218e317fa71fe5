"""
Management command to generate a synthetic dataset from the convolutional model.

Usage:
    python manage.py synth --out data/small --shape 25,25,25 --k 3 --window 5,5,5 \
        --rank 2 --bernoulli 0.2 --snr 25 --n 10 --seed 7
    python manage.py synth --out data/small --preset small --snr 10
    python manage.py synth --out data/planted --planted-channel 0 --shape 16,24,32 --window 3,3,3 --k 2

Writes <out>/signals.ktns, <out>/clean.ktns, <out>/truth/ (a model directory
holding the true dictionary and activations) and <out>/manifest.json.
"""

import time

from kcsc.config import as_ints, resolve_options
from kcsc.decorators import command_errors
from kcsc.exceptions import ConfigError
from kcsc.management.base import KcscCommand
from kcsc.storage import ensure_output, save_model, write_tensor
from kcsc.synthgen import PRESETS, SynthConfig, generate, planted_spectrogram


class Command(KcscCommand):
    help = 'Generate synthetic signals with known dictionary and Kruskal activations'
    command_name = 'synth'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--preset', choices=sorted(PRESETS), help='Start from a named parameter set')
        parser.add_argument('--shape', help='Signal shape, comma separated')
        parser.add_argument('--k', type=int, help='Number of atoms')
        parser.add_argument('--window', help='Atom window, comma separated')
        parser.add_argument('--rank', type=int, help='True CP rank of each activation')
        parser.add_argument('--bernoulli', type=float, help='Probability of a nonzero factor entry')
        parser.add_argument('--snr', type=float, help='Noise level in dB (noiseless when omitted)')
        parser.add_argument('--n', type=int, help='Number of signals')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--planted-channel', type=int,
                            help='Nonnegative spectrogram-like tensor with this channel zeroed')
        self.add_common_arguments(parser)

    def _defaults(self, preset):
        if preset is not None and preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}, choose from {', '.join(sorted(PRESETS))}",
                              field='preset')
        base = PRESETS[preset] if preset else SynthConfig()
        return {
            'preset': preset,
            'shape': list(base.signal_shape),
            'k': base.n_atoms,
            'window': list(base.window),
            'rank': base.rank,
            'bernoulli': base.bernoulli,
            'snr': base.snr,
            'n': base.n_signals,
            'seed': base.seed,
            'planted_channel': None,
        }

    @command_errors
    def handle(self, *args, **options):
        """Generate and write the dataset"""
        self.configure_logging(options)
        preset = resolve_options(options, {'preset': None}, 'synth', warn_unknown=False)['preset']
        values = resolve_options(options, self._defaults(preset), 'synth')
        config = SynthConfig(
            signal_shape=as_ints(values['shape'], 'shape'),
            n_atoms=int(values['k']),
            window=as_ints(values['window'], 'window'),
            rank=int(values['rank']),
            bernoulli=float(values['bernoulli']),
            snr=None if values['snr'] is None else float(values['snr']),
            n_signals=int(values['n']),
            seed=int(values['seed']),
        )
        config.validate()

        out = ensure_output(options['out'], options['force'], is_dir=True)
        start = time.perf_counter()
        if values['planted_channel'] is not None:
            observed, clean, dataset = planted_spectrogram(
                config.signal_shape, config.n_atoms, config.window, config.rank,
                config.bernoulli, int(values['planted_channel']), config.seed,
            )
            signals, clean = observed[None], clean[None]
        else:
            dataset = generate(config)
            signals, clean = dataset.signals, dataset.clean
        elapsed = time.perf_counter() - start

        write_tensor(out / 'signals.ktns', signals)
        write_tensor(out / 'clean.ktns', clean)
        save_model(out / 'truth', dataset.dictionary, dataset.activations,
                   {'kind': 'kruskal', 'synth': config.to_dict()}, force=True)
        self.record_run(
            out / 'manifest.json', values, config.seed, [], out,
            timings={'generate': elapsed},
            metrics={'n_signals': int(signals.shape[0]), 'signal_shape': list(signals.shape[1:])},
        )
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {signals.shape[0]} signals of shape {signals.shape[1:]} to {out}"
        ))
