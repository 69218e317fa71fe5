"""
Unconstrained multivariate CSC encoders used as comparison points.

Both solve min_Z 1/2 ||Y - sum_k D_k * Z_k||^2 + alpha sum_k ||Z_k||_1 with
full activation tensors of signal shape:

- fcsc_shm_encode: ADMM, per-frequency systems solved by Sherman-Morrison
  (identity plus one rank-one term per frequency).
- convfista_fd_encode: FISTA with the gradient evaluated in the Fourier domain.

Activation sets are arrays of shape (N, K, n_1, ..., n_p).
"""

import logging
from typing import NamedTuple

import numpy as np
from scipy import fft

from .dstep import BALANCE_FACTOR, BALANCE_RATIO, ShermanMorrisonCache
from .exceptions import DimensionError, DivergenceError
from .spectral import dft_stack, idft_stack
from .tensor_core import Dictionary

logger = logging.getLogger(__name__)


class DenseEncoding(NamedTuple):
    activations: np.ndarray    # (N, K, n_1, ..., n_p)
    iterations: int


def _as_batch(signals: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    signals = np.asarray(signals, dtype=np.float64)
    if signals.shape == dictionary.signal_shape:
        signals = signals[None]
    if signals.shape[1:] != dictionary.signal_shape:
        raise DimensionError(
            f"signals of shape {signals.shape[1:]} do not match dictionary signal shape {dictionary.signal_shape}"
        )
    return signals


def soft_threshold(x: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def dense_reconstruction(atom_spectra: np.ndarray, activations: np.ndarray) -> np.ndarray:
    """sum_k D_k * Z_k for every signal, from atom spectra (K, ...) and activations (N, K, ...)."""
    spectra = fft.fftn(activations, axes=tuple(range(2, activations.ndim)))
    return np.real(fft.ifftn(np.sum(atom_spectra[None] * spectra, axis=1),
                             axes=tuple(range(1, activations.ndim - 1))))


def dense_objective(signals: np.ndarray, dictionary: Dictionary, activations: np.ndarray,
                    alpha: float) -> float:
    signals = _as_batch(signals, dictionary)
    recon = dense_reconstruction(dft_stack(dictionary.padded()), activations)
    return 0.5 * float(np.sum((signals - recon) ** 2)) + alpha * float(np.sum(np.abs(activations)))


def fidelity_gradient(signal_spectra: np.ndarray, atom_spectra: np.ndarray,
                      activations: np.ndarray) -> np.ndarray:
    """Gradient of 1/2 ||Y - sum_k D_k * Z_k||^2 with respect to Z, shape (N, K, ...)."""
    axes = tuple(range(2, activations.ndim))
    z_hat = fft.fftn(activations, axes=axes)
    residual = np.sum(atom_spectra[None] * z_hat, axis=1) - signal_spectra
    return np.real(fft.ifftn(np.conj(atom_spectra)[None] * residual[:, None], axes=axes))


def fcsc_shm_encode(signals: np.ndarray, dictionary: Dictionary, alpha: float,
                    rho: float = None, tol: float = 1e-6, max_iters: int = 500,
                    init: np.ndarray = None) -> DenseEncoding:
    signals = _as_batch(signals, dictionary)
    n_signals = signals.shape[0]
    shape = dictionary.signal_shape
    n_atoms = dictionary.n_atoms
    if rho is None:
        rho = 50.0 * alpha + 1.0

    atom_spectra = dft_stack(dictionary.padded())
    rows = atom_spectra.reshape(n_atoms, -1).T[None]          # (1, F, K)
    signal_spectra = dft_stack(signals).reshape(n_signals, -1)
    data_rhs = np.conj(rows[0])[None] * signal_spectra[:, :, None]  # (N, F, K)
    solver = ShermanMorrisonCache.build(rows, rho)

    y = np.zeros((n_signals, n_atoms) + shape) if init is None else np.array(init, dtype=np.float64)
    u = np.zeros_like(y)
    x = y
    iterations = 0
    for iterations in range(1, max_iters + 1):
        target = dft_stack((y - u).reshape((-1,) + shape)).reshape(n_signals, n_atoms, -1)
        x_hat = np.stack([
            solver.solve(data_rhs[n] + rho * target[n].T).T for n in range(n_signals)
        ])
        x = idft_stack(x_hat.reshape((-1,) + shape)).reshape(y.shape)
        y_prev = y
        y = soft_threshold(x + u, alpha / rho)
        u = u + x - y
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"non-finite activations after {iterations} ADMM iterations (rho {rho})",
                phase='fcsc-shm',
            )

        primal = np.linalg.norm(x - y) / max(np.linalg.norm(x), np.linalg.norm(y), 1.0)
        dual = rho * np.linalg.norm(y - y_prev) / max(rho * np.linalg.norm(u), 1.0)
        if max(primal, dual) < tol:
            break
        if primal > BALANCE_RATIO * dual:
            rho *= BALANCE_FACTOR
            u /= BALANCE_FACTOR
            solver = ShermanMorrisonCache.build(rows, rho)
        elif dual > BALANCE_RATIO * primal:
            rho /= BALANCE_FACTOR
            u *= BALANCE_FACTOR
            solver = ShermanMorrisonCache.build(rows, rho)

    logger.debug(f"fcsc-shm: {iterations} iterations, final rho={rho:.3e}")
    return DenseEncoding(y, iterations)


def convfista_fd_encode(signals: np.ndarray, dictionary: Dictionary, alpha: float,
                        tol: float = 1e-6, max_iters: int = 500,
                        init: np.ndarray = None) -> DenseEncoding:
    signals = _as_batch(signals, dictionary)
    n_signals = signals.shape[0]
    atom_spectra = dft_stack(dictionary.padded())
    signal_spectra = dft_stack(signals)
    lipschitz = max(float(np.max(np.sum(np.abs(atom_spectra) ** 2, axis=0))), 1e-12)
    step = 1.0 / lipschitz

    current = np.zeros((n_signals, dictionary.n_atoms) + dictionary.signal_shape) if init is None \
        else np.array(init, dtype=np.float64)
    momentum = current
    t = 1.0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = fidelity_gradient(signal_spectra, atom_spectra, momentum)
        updated = soft_threshold(momentum - step * grad, step * alpha)
        if not np.all(np.isfinite(updated)):
            raise DivergenceError(
                f"non-finite activations after {iterations} iterations (step {step:.3e})",
                phase='convfista-fd',
            )
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momentum = updated + ((t - 1.0) / t_next) * (updated - current)
        t = t_next
        change = float(np.max(np.abs(updated - current)))
        current = updated
        if change <= tol:
            break

    logger.debug(f"convfista-fd: {iterations} iterations, L={lipschitz:.4e}")
    return DenseEncoding(current, iterations)
