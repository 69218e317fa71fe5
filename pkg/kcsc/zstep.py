"""
Activation update of TC-FISTA.

For a fixed mode q, the Kruskal activations of all K atoms depend linearly
on their mode-q factors. Working on mode-q unfoldings in the Fourier domain,
the reconstruction at mode-q frequency t is

    x_t = C_t w_t,   C_t[i, (k, r)] = D_k[t, i] * B_k[i, r],

with B_k the reverse Khatri-Rao product of the other (transformed) factors
and w_t the K*R transformed mode-q coefficients at frequency t. The Gram
matrix of the whole subproblem is therefore block-diagonal once coefficients
are laid out frequency-major: one Hermitian (KR x KR) block G_t = C_t^H C_t
per frequency. Both G and the linear term b_t = C_t^H y_t are built once per
subproblem.

With the unnormalized DFT, the fidelity is (1/M) * 1/2 * sum_t ||y_t - C_t w_t||^2
and its gradient with respect to the real factors is (n_q/M) Re(IDFT_q[G w - b]).
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from .exceptions import ConfigError, DimensionError, DivergenceError
from .spectral import dft, dft_stack, modewise_dft
from .tensor_core import (
    Dictionary, KruskalActivation, khatri_rao_reverse, stack_mode, unfold,
    unstack_mode,
)

logger = logging.getLogger(__name__)

LIPSCHITZ_FLOOR = 1e-12


@dataclass(frozen=True)
class RegWeights:
    """Per-mode sparsity (alpha) and identifiability (beta) weights."""

    alpha: Tuple[float, ...]
    beta: Tuple[float, ...]
    nonnegative: bool = False

    @classmethod
    def uniform(cls, order: int, alpha: float, beta: float, nonnegative: bool = False) -> 'RegWeights':
        return cls((float(alpha),) * order, (float(beta),) * order, nonnegative)

    def validate(self, order: int):
        if len(self.alpha) != order or len(self.beta) != order:
            raise ConfigError(
                f"expected {order} alpha and beta weights, got {len(self.alpha)} and {len(self.beta)}",
                field='alpha',
            )
        if any(a < 0 for a in self.alpha):
            raise ConfigError('alpha weights must be nonnegative', field='alpha')
        if any(b < 0 for b in self.beta):
            raise ConfigError('beta weights must be nonnegative', field='beta')


@dataclass
class ModeSubproblemCache:
    """Frequency-major precomputations of one mode subproblem."""

    mode: int
    lin_term: np.ndarray            # (n_q, K*R)
    gram_blocks: Optional[np.ndarray]  # (n_q, K*R, K*R), None on the naive path
    lipschitz: float
    scale: float                    # n_q / M
    signal_energy: float            # ||y_hat||^2
    design: Optional[np.ndarray] = None   # (n_q, M/n_q, K*R), naive path only
    signal_unfolded: Optional[np.ndarray] = None


class ModeUpdate(NamedTuple):
    activations: List[KruskalActivation]
    iterations: int


def assemble_A(factor_spectra: Sequence[Sequence[np.ndarray]], mode: int) -> List[np.ndarray]:
    """
    Diagonal blocks B_k of the block-diagonal operator A, one per atom.

    factor_spectra[k][i] is the transformed mode-i factor of atom k.
    """
    blocks = []
    for spectra in factor_spectra:
        others = [s for i, s in enumerate(spectra) if i != mode]
        if not others:
            rank = spectra[mode].shape[1]
            blocks.append(np.ones((1, rank), dtype=complex))
        else:
            blocks.append(khatri_rao_reverse(others))
    return blocks


def mode_design(blocks: Sequence[np.ndarray], atom_spectra: np.ndarray, mode: int) -> np.ndarray:
    """Per-frequency design matrices C_t stacked as (n_q, M/n_q, K*R)."""
    columns = []
    for block, spectrum in zip(blocks, atom_spectra):
        d_unf = unfold(spectrum, mode)
        if d_unf.shape[1] != block.shape[0]:
            raise DimensionError(
                f"atom spectrum unfolding {d_unf.shape} does not match block {block.shape}"
            )
        columns.append(d_unf[:, :, None] * block[None, :, :])
    return np.concatenate(columns, axis=2)


def compute_gram(blocks: Sequence[np.ndarray], atom_spectra: np.ndarray, mode: int) -> np.ndarray:
    """Hermitian Gram blocks G_t = C_t^H C_t, shape (n_q, K*R, K*R)."""
    design = mode_design(blocks, atom_spectra, mode)
    return np.conj(np.swapaxes(design, 1, 2)) @ design


def linear_term(blocks: Sequence[np.ndarray], atom_spectra: np.ndarray,
                signal_spectrum: np.ndarray, mode: int) -> np.ndarray:
    """b_t = C_t^H y_t for every mode-q frequency, shape (n_q, K*R)."""
    y_unf = unfold(signal_spectrum, mode)
    parts = []
    for block, spectrum in zip(blocks, atom_spectra):
        weighted = y_unf * np.conj(unfold(spectrum, mode))
        parts.append(weighted @ np.conj(block))
    return np.concatenate(parts, axis=1)


def gram_matvec(gram_blocks: np.ndarray, z_hat: np.ndarray) -> np.ndarray:
    """Block-diagonal product, one (KR x KR) block per frequency."""
    if z_hat.shape != gram_blocks.shape[:2]:
        raise DimensionError(
            f"frequency-major layout {z_hat.shape} does not match Gram blocks {gram_blocks.shape}"
        )
    return np.einsum('tij,tj->ti', gram_blocks, z_hat)


def estimate_lipschitz(gram_blocks: np.ndarray, scale: float = 1.0, tol: float = 1e-6,
                       max_iters: int = 1000) -> float:
    """
    Largest eigenvalue over all frequency blocks, by power iteration, times scale.

    Blocks are Hermitian PSD so the Rayleigh quotient converges from below to
    the top eigenvalue of every block at once.
    """
    n_blocks, size, _ = gram_blocks.shape
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n_blocks, size)) + 1j * rng.standard_normal((n_blocks, size))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    estimate = np.zeros(n_blocks)
    for _ in range(max_iters):
        w = np.einsum('tij,tj->ti', gram_blocks, v)
        rayleigh = np.real(np.einsum('ti,ti->t', np.conj(v), w))
        norms = np.linalg.norm(w, axis=1)
        alive = norms > 0
        v[alive] = w[alive] / norms[alive, None]
        previous, estimate = estimate, np.maximum(rayleigh, 0.0)
        top = estimate.max()
        if top == 0.0 or abs(top - previous.max()) <= tol * top:
            break
    top = float(estimate.max()) * scale
    return max(top, LIPSCHITZ_FLOOR)


def prox_g(x: np.ndarray, step: float, alpha: float, beta: float, nonnegative: bool = False) -> np.ndarray:
    """Weighted soft-thresholding followed by the ridge shrinkage of beta."""
    if step <= 0:
        raise ConfigError(f"prox step must be positive, got {step}", field='step')
    shrink = 1.0 / (1.0 + 2.0 * step * beta)
    if nonnegative:
        return np.maximum(x - step * alpha, 0.0) * shrink
    return np.sign(x) * np.maximum(np.abs(x) - step * alpha, 0.0) * shrink


def build_mode_cache(signal_spectrum: np.ndarray, atom_spectra: np.ndarray,
                     activations: Sequence[KruskalActivation], mode: int,
                     use_gram: bool = True) -> ModeSubproblemCache:
    """Precompute the linear term and the Gram blocks (or the raw design) of mode q."""
    shape = signal_spectrum.shape
    n_q = shape[mode]
    total = float(np.prod(shape))
    scale = n_q / total
    factor_spectra = [modewise_dft(z.factors) for z in activations]
    blocks = assemble_A(factor_spectra, mode)
    lin = linear_term(blocks, atom_spectra, signal_spectrum, mode)
    gram = compute_gram(blocks, atom_spectra, mode)
    lipschitz = estimate_lipschitz(gram, scale)
    energy = float(np.sum(np.abs(signal_spectrum) ** 2))
    if use_gram:
        return ModeSubproblemCache(mode, lin, gram, lipschitz, scale, energy)
    return ModeSubproblemCache(
        mode, lin, None, lipschitz, scale, energy,
        design=mode_design(blocks, atom_spectra, mode), signal_unfolded=unfold(signal_spectrum, mode),
    )


def gradient_mode_q(cache: ModeSubproblemCache, stacked: np.ndarray) -> np.ndarray:
    """Gradient of the fidelity with respect to the stacked mode-q factors (n_q, K*R)."""
    z_hat = fft.fft(stacked, axis=0)
    if cache.gram_blocks is not None:
        residual = gram_matvec(cache.gram_blocks, z_hat) - cache.lin_term
    else:
        recon = np.einsum('tij,tj->ti', cache.design, z_hat)
        residual = np.einsum('tij,ti->tj', np.conj(cache.design), recon - cache.signal_unfolded)
    # F^H = n_q * ifft, and the Parseval constant is 1/M.
    return cache.scale * np.real(fft.ifft(residual, axis=0))


def frequency_fidelity(cache: ModeSubproblemCache, stacked: np.ndarray) -> float:
    """Fidelity 1/2 ||y - recon||^2 evaluated from the cached Gram blocks."""
    if cache.gram_blocks is None:
        raise ConfigError('frequency_fidelity needs the Gram blocks')
    z_hat = fft.fft(stacked, axis=0)
    quad = np.real(np.vdot(z_hat, gram_matvec(cache.gram_blocks, z_hat)))
    cross = np.real(np.vdot(cache.lin_term, z_hat))
    n_q = stacked.shape[0]
    return 0.5 * (cache.scale / n_q) * (quad - 2.0 * cross + cache.signal_energy)


def penalty(stacked: np.ndarray, alpha: float, beta: float) -> float:
    return alpha * float(np.sum(np.abs(stacked))) + beta * float(np.sum(stacked ** 2))


def fista_mode_q(signal: np.ndarray, dictionary: Dictionary,
                 activations: Sequence[KruskalActivation], mode: int, reg: RegWeights,
                 tol: float = 1e-5, max_iters: int = 200, monotone: bool = False,
                 use_gram: bool = True, signal_spectrum: np.ndarray = None,
                 atom_spectra: np.ndarray = None) -> ModeUpdate:
    """
    Solve the mode-q subproblem with FISTA (ISTA when monotone).

    Stops when the sup-norm change of the factors falls under tol, or after
    max_iters iterations. Momentum restarts at t = 1 on every call.
    """
    if signal_spectrum is None:
        signal_spectrum = dft(signal)
    if atom_spectra is None:
        atom_spectra = dft_stack(dictionary.padded())
    cache = build_mode_cache(signal_spectrum, atom_spectra, activations, mode, use_gram)
    step = 1.0 / cache.lipschitz
    alpha, beta = reg.alpha[mode], reg.beta[mode]

    current = stack_mode(activations, mode)
    momentum = current
    t = 1.0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = gradient_mode_q(cache, momentum)
        updated = prox_g(momentum - step * grad, step, alpha, beta, reg.nonnegative)
        if not np.all(np.isfinite(updated)):
            raise DivergenceError(
                f"non-finite factors in mode {mode} after {iterations} iterations (step {step:.3e})",
                phase='zstep',
            )
        if monotone:
            momentum = updated
        else:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            momentum = updated + ((t - 1.0) / t_next) * (updated - current)
            t = t_next
        change = float(np.max(np.abs(updated - current))) if updated.size else 0.0
        current = updated
        if change <= tol:
            break
    else:
        logger.debug(f"mode {mode}: iteration budget {max_iters} exhausted")

    logger.debug(f"mode {mode}: {iterations} iterations, L={cache.lipschitz:.4e}")
    return ModeUpdate(unstack_mode(activations, mode, current), iterations)
