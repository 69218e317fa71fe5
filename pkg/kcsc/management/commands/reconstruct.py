"""
Management command to rebuild signals from a fitted model, optionally
leaving some atoms out (atom-removal denoising).

Usage:
    python manage.py reconstruct --model models/small --out recon.ktns
    python manage.py reconstruct --model models/eeg --out clean.ktns --exclude-atoms 2
    python manage.py reconstruct --model models/eeg --out clean.ktns --exclude-atoms 0,3 --signal 1
"""

import time

import numpy as np

from kcsc.config import as_ints
from kcsc.decorators import command_errors
from kcsc.exceptions import ConfigError, DimensionError
from kcsc.management.base import KcscCommand, file_manifest_path
from kcsc.solver import reconstruct
from kcsc.storage import ensure_output, load_model, read_signals, write_tensor
from kcsc.synthgen import rmse


class Command(KcscCommand):
    help = 'Reconstruct signals from a model directory, excluding the listed atoms'
    command_name = 'reconstruct'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Model directory written by fit or encode')
        parser.add_argument('--out', required=True, help='Output tensor file (.ktns)')
        parser.add_argument('--exclude-atoms', action='append', default=[],
                            help='Atom indices to leave out, comma separated or repeated')
        parser.add_argument('--signal', type=int, help='Reconstruct only this signal')
        parser.add_argument('--reference', help='Signals to report RMSE against')
        self.add_common_arguments(parser)

    @command_errors
    def handle(self, *args, **options):
        """Reconstruct and write"""
        self.configure_logging(options)
        excluded = sorted({k for value in options['exclude_atoms'] for k in as_ints(value, 'exclude_atoms')})
        dictionary, activations, _ = load_model(options['model'])
        n_signals = len(activations)
        indices = range(n_signals)
        if options['signal'] is not None:
            if not 0 <= options['signal'] < n_signals:
                raise ConfigError(f"signal {options['signal']} outside the {n_signals} modelled signals",
                                  field='signal')
            indices = [options['signal']]

        out = ensure_output(options['out'], options['force'])
        start = time.perf_counter()
        recon = np.stack([reconstruct(dictionary, activations[n], excluded) for n in indices])
        elapsed = time.perf_counter() - start

        metrics = {'excluded_atoms': excluded, 'n_signals': len(recon)}
        if options.get('reference'):
            reference = read_signals(options['reference'], dictionary.order)
            if reference.shape[0] != n_signals:
                raise DimensionError(f"reference holds {reference.shape[0]} signals, model {n_signals}")
            metrics['rmse_y'] = rmse(reference[list(indices)], recon)

        write_tensor(out, recon if options['signal'] is None else recon[0])
        config = {'exclude_atoms': excluded, 'signal': options['signal']}
        inputs = [options['model']] + ([options['reference']] if options.get('reference') else [])
        self.record_run(file_manifest_path(out), config, None, inputs, out,
                        timings={'reconstruct': elapsed}, metrics=metrics)
        self.stdout.write(self.style.SUCCESS(
            f"Reconstructed {len(recon)} signal(s) without atoms {excluded} to {out}"
        ))
