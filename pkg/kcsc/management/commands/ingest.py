"""
Management command to turn a multichannel recording into a
channels x frequencies x frames tensor.

Usage:
    python manage.py ingest --input eeg.raw --out eeg.ktns
    python manage.py ingest --input eeg.csv --rate 250 --out eeg.ktns --band 1,20 --crop 0,20
"""

import time

from kcsc.config import as_floats, resolve_options
from kcsc.decorators import command_errors
from kcsc.exceptions import ConfigError
from kcsc.management.base import KcscCommand, file_manifest_path
from kcsc.storage import ensure_output, write_tensor
from kcsc.stf_ingest import StftConfig, bandpass, load_recording, stft_tensor


def _pair(value, field):
    pair = as_floats(value, field)
    if len(pair) != 2:
        raise ConfigError(f"--{field} expects two values lo,hi", field=field)
    return pair


class Command(KcscCommand):
    help = 'Band-pass filter a recording and write its STFT magnitude tensor'
    command_name = 'ingest'

    def add_arguments(self, parser):
        parser.add_argument('--input', required=True, help='.raw/.bin recording with a .json header, or .csv')
        parser.add_argument('--out', required=True, help='Output tensor file (.ktns)')
        parser.add_argument('--rate', type=float, help='Sample rate in Hz (required for CSV)')
        parser.add_argument('--stft-window', type=int, help='STFT window length in samples')
        parser.add_argument('--overlap', type=float, help='Fractional window overlap in [0, 1)')
        parser.add_argument('--band', help='Band-pass edges in Hz, lo,hi')
        parser.add_argument('--crop', help='Kept frequency range in Hz, lo,hi')
        parser.add_argument('--output', choices=['magnitude', 'power'])
        parser.add_argument('--uncentered', action='store_true', default=None,
                            help='Frames start at sample 0 instead of being centered')
        self.add_common_arguments(parser)

    @command_errors
    def handle(self, *args, **options):
        """Read, filter, transform and write"""
        from django.conf import settings

        self.configure_logging(options)
        kcsc = settings.KCSC
        values = resolve_options(options, {
            'rate': None,
            'stft_window': kcsc['STFT_WINDOW'],
            'overlap': kcsc['STFT_OVERLAP'],
            'band': [kcsc['BAND_LOW'], kcsc['BAND_HIGH']],
            'crop': [kcsc['CROP_LOW'], kcsc['CROP_HIGH']],
            'output': 'magnitude',
            'uncentered': False,
        }, 'ingest')
        band = _pair(values['band'], 'band')
        crop = _pair(values['crop'], 'crop')
        config = StftConfig(
            window=int(values['stft_window']), overlap=float(values['overlap']),
            band_low=band[0], band_high=band[1], crop_low=crop[0], crop_high=crop[1],
            output=values['output'], centered=not values['uncentered'],
        )

        out = ensure_output(options['out'], options['force'])
        start = time.perf_counter()
        recording = load_recording(options['input'], values['rate'])
        config.validate(recording.rate)
        filtered = bandpass(recording, config.band_low, config.band_high)
        tensor = stft_tensor(filtered, config)
        elapsed = time.perf_counter() - start

        write_tensor(out, tensor)
        self.record_run(
            file_manifest_path(out), dict(values, rate=recording.rate), None, [options['input']], out,
            timings={'ingest': elapsed},
            metrics={'shape': list(tensor.shape), 'stft': config.to_dict()},
        )
        self.stdout.write(self.style.SUCCESS(f"Wrote tensor {tensor.shape} to {out}"))
