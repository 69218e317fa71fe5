"""
Dictionary update with the activations fixed.

ADMM on the split d = g, where g is constrained to the atom window and the
unit Frobenius ball. The d-update decouples across frequencies into

    (rho I + sum_n a_n^H a_n) x = sum_n a_n^H y_n + rho (g - u)

with a_n the row of the K activation spectra of signal n at that frequency.
The system is rho times the identity plus N rank-one terms; its inverse is
applied through N successive Sherman-Morrison updates.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, DivergenceError
from .spectral import dft_stack, idft_stack, kruskal_spectrum
from .tensor_core import (
    Dictionary, KruskalActivation, crop, project_unit_ball, zero_pad,
)

logger = logging.getLogger(__name__)

BALANCE_RATIO = 10.0
BALANCE_FACTOR = 2.0


def compose_activation_spectra(activations: Sequence[KruskalActivation]) -> np.ndarray:
    """Spectra of the composed activations of one signal, shape (K, n_1, ..., n_p)."""
    return np.stack([kruskal_spectrum(z.factors) for z in activations])


@dataclass
class ShermanMorrisonCache:
    """Rank-one corrections c_n and denominators delta_n of the per-frequency systems."""

    rho: float
    columns: np.ndarray     # (N, F, K) the vectors u_n = conj(a_n)
    corrections: np.ndarray  # (N, F, K)
    denominators: np.ndarray  # (N, F)

    @classmethod
    def build(cls, activation_rows: np.ndarray, rho: float) -> 'ShermanMorrisonCache':
        """activation_rows: (N, F, K) activation spectra, frequencies flattened."""
        columns = np.conj(activation_rows)
        corrections = np.empty_like(columns)
        denominators = np.empty(columns.shape[:2])
        cache = cls(rho, columns, corrections, denominators)
        for n in range(columns.shape[0]):
            c = cache._apply_partial(columns[n], n)
            corrections[n] = c
            denominators[n] = 1.0 + np.real(np.sum(np.conj(columns[n]) * c, axis=1))
        return cache

    def _apply_partial(self, v: np.ndarray, upto: int) -> np.ndarray:
        """Apply the inverse of rho I + sum_{n < upto} u_n u_n^H to v (F, K)."""
        out = v / self.rho
        for n in range(upto):
            c = self.corrections[n]
            coef = np.sum(np.conj(c) * v, axis=1) / self.denominators[n]
            out = out - c * coef[:, None]
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._apply_partial(rhs, self.columns.shape[0])


def sherman_morrison_solve(activation_rows: np.ndarray, rho: float, rhs: np.ndarray) -> np.ndarray:
    """Solve every per-frequency system at once; activation_rows (N, F, K), rhs (F, K)."""
    return ShermanMorrisonCache.build(activation_rows, rho).solve(rhs)


def project_atoms(padded: np.ndarray, window: Sequence[int]) -> np.ndarray:
    """Exact projection onto {supported on the window} and {||d||_F <= 1}."""
    out = np.zeros_like(padded)
    for k, atom in enumerate(padded):
        out[k] = zero_pad(project_unit_ball(crop(atom, window)), atom.shape)
    return out


@dataclass
class DStepWarmStart:
    """Scaled dual and penalty carried from one dictionary update to the next."""

    rho: Optional[float] = None
    u: Optional[np.ndarray] = None


@dataclass
class DStepState:
    rho: float
    d: np.ndarray
    g: np.ndarray
    u: np.ndarray
    activation_spectra: np.ndarray  # (N, K, n_1, ..., n_p)


def dstep_solve(signals: np.ndarray, activation_spectra: np.ndarray, window: Sequence[int],
                rho: float = 1.0, tol: float = 1e-6, max_iters: int = 100,
                init: np.ndarray = None, warm: DStepWarmStart = None) -> Tuple[Dictionary, int]:
    """
    Update the atoms for fixed activations.

    signals: (N, n_1, ..., n_p) or a single signal; activation_spectra:
    (N, K, n_1, ..., n_p) or (K, n_1, ..., n_p). init holds starting atoms of
    shape (K, w_1, ..., w_p). When warm holds a dual of matching shape the
    iteration resumes from it and its penalty; warm is updated on return.
    Returns the dictionary and the iteration count.
    """
    signals = np.asarray(signals, dtype=np.float64)
    window = tuple(window)
    if signals.ndim == len(window):
        signals = signals[None]
    if activation_spectra.ndim == len(window) + 1:
        activation_spectra = activation_spectra[None]
    n_signals, n_atoms = activation_spectra.shape[:2]
    shape = signals.shape[1:]
    if activation_spectra.shape[2:] != shape or signals.shape[0] != n_signals:
        raise DimensionError(
            f"activation spectra {activation_spectra.shape} do not match signals {signals.shape}"
        )
    if len(window) != len(shape) or any(w > n for w, n in zip(window, shape)):
        raise DimensionError(f"window {window} does not fit signal shape {shape}")

    if init is None:
        init = np.zeros((n_atoms,) + window)
    g = project_atoms(np.stack([zero_pad(np.asarray(a, dtype=np.float64), shape) for a in init]), window)
    u = np.zeros_like(g)
    if warm is not None and warm.u is not None and warm.u.shape == g.shape:
        rho, u = warm.rho, warm.u.copy()
    state = DStepState(rho, g.copy(), g, u, activation_spectra)

    rows = activation_spectra.reshape(n_signals, n_atoms, -1).transpose(0, 2, 1)
    signal_spectra = dft_stack(signals).reshape(n_signals, -1)
    data_rhs = np.einsum('nfk,nf->fk', np.conj(rows), signal_spectra)
    solver = ShermanMorrisonCache.build(rows, state.rho)

    iterations = 0
    for iterations in range(1, max_iters + 1):
        target = dft_stack(state.g - state.u).reshape(n_atoms, -1).T
        d_hat = solver.solve(data_rhs + state.rho * target)
        state.d = idft_stack(d_hat.T.reshape((n_atoms,) + shape))
        g_prev = state.g
        state.g = project_atoms(state.d + state.u, window)
        state.u = state.u + state.d - state.g

        if not (np.all(np.isfinite(state.d)) and np.all(np.isfinite(state.u))):
            raise DivergenceError(
                f"non-finite atoms after {iterations} ADMM iterations; try a smaller rho (now {state.rho})",
                phase='dstep',
            )

        primal = np.linalg.norm(state.d - state.g) / max(np.linalg.norm(state.d), np.linalg.norm(state.g), 1.0)
        dual = state.rho * np.linalg.norm(state.g - g_prev) / max(state.rho * np.linalg.norm(state.u), 1.0)
        logger.debug(f"dstep iteration {iterations}: primal={primal:.3e} dual={dual:.3e} rho={state.rho:.3e}")
        if max(primal, dual) < tol:
            break

        if primal > BALANCE_RATIO * dual:
            state.rho *= BALANCE_FACTOR
            state.u /= BALANCE_FACTOR
            solver = ShermanMorrisonCache.build(rows, state.rho)
        elif dual > BALANCE_RATIO * primal:
            state.rho /= BALANCE_FACTOR
            state.u *= BALANCE_FACTOR
            solver = ShermanMorrisonCache.build(rows, state.rho)

    if warm is not None:
        warm.rho, warm.u = state.rho, state.u.copy()
    atoms = np.stack([crop(a, window) for a in state.g])
    return Dictionary(atoms, shape), iterations
