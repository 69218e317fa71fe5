"""
Fourier conventions: unnormalized forward DFT, 1/prod(n) on the inverse.

Under this convention ||t||_F^2 = ||dft(t)||_F^2 / prod(n), which is the
constant every frequency-domain objective and gradient is calibrated against.
"""

from typing import List, Sequence

import numpy as np
from scipy import fft

from .exceptions import DimensionError
from .tensor_core import kruskal_compose


def dft(t: np.ndarray) -> np.ndarray:
    return fft.fftn(t)


def idft(s: np.ndarray) -> np.ndarray:
    """Inverse DFT, returning the real part."""
    return np.real(fft.ifftn(s))


def dft_stack(t: np.ndarray) -> np.ndarray:
    """DFT over every axis but the leading (stack) one."""
    return fft.fftn(t, axes=tuple(range(1, t.ndim)))


def idft_stack(s: np.ndarray) -> np.ndarray:
    return np.real(fft.ifftn(s, axes=tuple(range(1, s.ndim))))


def modewise_dft(factors: Sequence[np.ndarray]) -> List[np.ndarray]:
    """1-D DFT of every column of every factor matrix."""
    return [fft.fft(f, axis=0) for f in factors]


def kruskal_spectrum(factors: Sequence[np.ndarray]) -> np.ndarray:
    """DFT of a Kruskal tensor, computed through its transformed factors."""
    return kruskal_compose(modewise_dft(factors))


def circular_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"circular convolution needs equal shapes, got {a.shape} and {b.shape}")
    return idft(dft(a) * dft(b))


def parseval_scale(shape: Sequence[int]) -> float:
    """Factor mapping squared spectral norms back to squared time-domain norms."""
    return 1.0 / float(np.prod(shape))
