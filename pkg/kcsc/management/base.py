"""
Shared plumbing for the kcsc management commands: common flags, solver
flags, verbosity-driven log level, the FFT worker cap and run manifests.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Optional

from django.core.management.base import BaseCommand
from scipy import fft

from kcsc.models import RunManifest
from kcsc.serializers import RunManifestSerializer, jsonable

logger = logging.getLogger(__name__)


class KcscCommand(BaseCommand):
    """Base class for commands that produce files and a run manifest."""

    command_name = ''

    def add_common_arguments(self, parser):
        parser.add_argument('--config', help='TOML key/value file, an earlier manifest.json to replay, or "latest" for the last recorded run')
        parser.add_argument('--force', action='store_true', help='Overwrite existing outputs')

    def add_solver_arguments(self, parser, with_shape: bool = True):
        if with_shape:
            parser.add_argument('--k', type=int, help='Number of atoms')
            parser.add_argument('--window', help='Atom window, comma separated (e.g. 5,5,5)')
        parser.add_argument('--rank', '--r', dest='rank', type=int, help='CP rank R of each activation')
        parser.add_argument('--alpha', help='l1 weight, one value or one per mode')
        parser.add_argument('--beta', help='Frobenius weight, one value or one per mode')
        parser.add_argument('--solver', help='kcsc, fcsc-shm or convfista-fd')
        parser.add_argument('--restarts', type=int)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--max-sweeps', type=int)
        parser.add_argument('--tol', type=float, help='Outer relative objective change')
        parser.add_argument('--inner-max-iters', type=int)
        parser.add_argument('--inner-tol', type=float)
        parser.add_argument('--rho', type=float, help='D-step ADMM penalty')
        parser.add_argument('--dstep-max-iters', type=int)
        parser.add_argument('--dstep-tol', type=float)
        parser.add_argument('--mode-order', help='Order in which modes are visited, 0-based (e.g. 2,0,1)')
        parser.add_argument('--monotone', action='store_true', default=None,
                            help='ISTA steps and rejection of objective-raising updates')
        parser.add_argument('--nonnegative', action='store_true', default=None,
                            help='Non-negative activation factors')
        parser.add_argument('--no-gram-opt', action='store_true', default=None,
                            help='Assemble gradients naively instead of from frequency Gram blocks')
        parser.add_argument('--threads', type=int, help='Cap on FFT workers and per-signal threads')
        parser.add_argument('--baseline-max-iters', type=int)
        parser.add_argument('--baseline-tol', type=float)
        parser.add_argument('--effective-rank-tol', type=float)

    def configure_logging(self, options):
        if options.get('verbosity', 1) > 1:
            logging.getLogger('kcsc').setLevel(logging.DEBUG)

    @contextmanager
    def workers(self, threads: int):
        with fft.set_workers(max(1, int(threads))):
            yield

    def record_run(self, manifest_path, config: Dict, seed: Optional[int], input_paths: Iterable,
                   output_path, timings: Dict = None, metrics: Dict = None, rows=None) -> Dict:
        """Write manifest.json and mirror it into the run ledger."""
        document = jsonable({
            'command': self.command_name,
            'config': config,
            'seed': seed,
            'input_paths': [str(p) for p in input_paths],
            'output_path': str(output_path),
            'timings': timings or {},
            'metrics': metrics or {},
            'rows': rows or [],
        })
        RunManifestSerializer.write(document, manifest_path)
        RunManifest.record(**document)
        logger.info(f"manifest written to {manifest_path}")
        return document


def file_manifest_path(output) -> Path:
    """Manifest path for a single-file output: <output>.manifest.json."""
    output = Path(output)
    return output.with_name(output.name + '.manifest.json')
