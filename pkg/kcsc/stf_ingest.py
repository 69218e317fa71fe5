"""
Multichannel recordings to space-time-frequency tensors.

Recordings are band-pass filtered with a zero-phase frequency-domain filter
(flat pass band, raised-cosine edges), then turned into per-channel Hann
STFT magnitudes stacked as (channels, frequencies, frames).
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict

import numpy as np
from scipy import fft, signal

from .exceptions import ConfigError, DataFileError, DimensionError

logger = logging.getLogger(__name__)

TAPER_HZ = 0.5


@dataclass(frozen=True)
class MultichannelRecording:
    data: np.ndarray     # (channels, samples)
    rate: float

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if data.size == 0:
            raise DataFileError('empty recording')
        if not np.all(np.isfinite(data)):
            raise DataFileError('recording holds non-finite samples')
        if self.rate <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.rate}", field='rate')
        object.__setattr__(self, 'data', data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class StftConfig:
    window: int = 1024
    overlap: float = 0.5
    band_low: float = 1.0
    band_high: float = 20.0
    crop_low: float = 0.0
    crop_high: float = 20.0
    output: str = 'magnitude'
    centered: bool = True

    @property
    def hop(self) -> int:
        return int(round(self.window * (1.0 - self.overlap)))

    def validate(self, rate: float):
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError(f"overlap must lie in [0, 1), got {self.overlap}", field='overlap')
        if self.window < 2 or self.hop < 1:
            raise ConfigError(f"window {self.window} with overlap {self.overlap} gives no hop", field='window')
        if not 0.0 <= self.band_low < self.band_high < rate / 2.0:
            raise ConfigError(
                f"band [{self.band_low}, {self.band_high}] Hz must satisfy 0 <= low < high < Nyquist ({rate / 2.0})",
                field='band',
            )
        if self.crop_low > self.crop_high:
            raise ConfigError(f"crop [{self.crop_low}, {self.crop_high}] Hz is empty", field='crop')
        if self.output not in ('magnitude', 'power'):
            raise ConfigError(f"output must be magnitude or power, got {self.output!r}", field='output')

    def to_dict(self) -> Dict:
        return asdict(self)


def bandpass_gain(freqs: np.ndarray, low: float, high: float, taper: float = TAPER_HZ) -> np.ndarray:
    """Unit gain on [low, high], raised-cosine ramps of width taper on both sides, zero elsewhere."""
    gain = np.zeros_like(freqs, dtype=np.float64)
    gain[(freqs >= low) & (freqs <= high)] = 1.0
    rising = (freqs >= low - taper) & (freqs < low)
    gain[rising] = 0.5 * (1.0 + np.cos(np.pi * (low - freqs[rising]) / taper))
    falling = (freqs > high) & (freqs <= high + taper)
    gain[falling] = 0.5 * (1.0 + np.cos(np.pi * (freqs[falling] - high) / taper))
    return gain


def bandpass(rec: MultichannelRecording, low: float, high: float) -> MultichannelRecording:
    nyquist = rec.rate / 2.0
    if not 0.0 <= low < high < nyquist:
        raise ConfigError(f"band [{low}, {high}] Hz outside (0, {nyquist}) Hz", field='band')
    spectrum = fft.rfft(rec.data, axis=1)
    freqs = fft.rfftfreq(rec.samples, d=1.0 / rec.rate)
    filtered = fft.irfft(spectrum * bandpass_gain(freqs, low, high), n=rec.samples, axis=1)
    return MultichannelRecording(filtered, rec.rate)


def frame_count(samples: int, window: int, hop: int, centered: bool = True) -> int:
    if centered:
        return -(-samples // hop) + 1
    if samples < window:
        return 0
    return (samples - window) // hop + 1


def stft_tensor(rec: MultichannelRecording, config: StftConfig) -> np.ndarray:
    """Nonnegative (channels, frequencies, frames) spectrogram tensor."""
    config.validate(rec.rate)
    if rec.samples < config.window and not config.centered:
        raise DimensionError(f"window {config.window} longer than the {rec.samples}-sample recording")
    noverlap = config.window - config.hop
    freqs, _, spectra = signal.stft(
        rec.data, fs=rec.rate, window='hann', nperseg=config.window, noverlap=noverlap,
        boundary='zeros' if config.centered else None, padded=config.centered,
        detrend=False, return_onesided=True, scaling='spectrum', axis=-1,
    )
    # scaling='spectrum' divides by the window sum; undo it to keep raw DFT magnitudes.
    spectra = spectra * signal.get_window('hann', config.window).sum()
    keep = (freqs >= config.crop_low) & (freqs <= config.crop_high)
    magnitude = np.abs(spectra[:, keep, :])
    if config.output == 'power':
        magnitude = magnitude ** 2
    logger.info(f"STFT tensor {magnitude.shape} from {rec.channels} channels at {rec.rate} Hz")
    return magnitude


def load_recording(path, rate: float = None) -> MultichannelRecording:
    """
    Read a recording.

    - `.csv`: one column per channel, one row per sample; rate must be given.
    - `.raw` / `.bin`: interleaved little-endian samples with a sidecar
      `<name>.json` header {"channels", "rate", "dtype": "f32" | "f64"}.
    """
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"recording {path} does not exist")
    if path.suffix.lower() == '.csv':
        if rate is None:
            raise ConfigError('CSV recordings need --rate', field='rate')
        try:
            data = np.loadtxt(path, delimiter=',', ndmin=2)
        except ValueError as exc:
            raise DataFileError(f"cannot parse {path}: {exc}") from exc
        return MultichannelRecording(data.T, rate)

    header_path = path.with_suffix('.json')
    if not header_path.exists():
        raise DataFileError(f"raw recording {path} needs a header {header_path}")
    try:
        header = json.loads(header_path.read_text())
        channels = int(header['channels'])
        dtype = {'f32': '<f4', 'f64': '<f8'}[header.get('dtype', 'f32')]
        file_rate = float(header['rate'])
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataFileError(f"malformed recording header {header_path}: {exc}") from exc
    raw = np.fromfile(path, dtype=dtype)
    if raw.size % channels:
        raise DataFileError(f"{raw.size} samples do not split into {channels} channels")
    return MultichannelRecording(raw.reshape(-1, channels).T.astype(np.float64), rate or file_rate)
