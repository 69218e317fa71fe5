"""
Dense tensors, Kruskal (CP) factor sets and the unfolding algebra.

Dense tensors are plain float64 numpy arrays stored row-major. Modes are
0-based numpy axes. The mode-q unfolding orders its columns with the first
remaining mode varying fastest, so that

    unfold(kruskal_compose(F), q) == F[q] @ khatri_rao_reverse(F without q).T

holds exactly.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError

# Largest norm still treated as inside the unit ball.
UNIT_BALL_SLACK = 1e-12


def as_dense(data, shape: Sequence[int] = None) -> np.ndarray:
    """Validate and return a float64 dense tensor."""
    t = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(n) for n in shape)
        if t.size != int(np.prod(shape)):
            raise DimensionError(f"data length {t.size} does not match shape {shape}")
        t = t.reshape(shape)
    if t.ndim < 1 or any(n < 1 for n in t.shape):
        raise DimensionError(f"tensor shape must have positive entries, got {t.shape}")
    return t


@dataclass(frozen=True)
class KruskalActivation:
    """Rank-R activation tensor held as p factor matrices of shape (n_q, R)."""

    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.asarray(f) for f in self.factors)
        check_conformal(factors)
        object.__setattr__(self, 'factors', factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    def compose(self) -> np.ndarray:
        return kruskal_compose(self.factors)

    def replace_mode(self, mode: int, factor: np.ndarray) -> 'KruskalActivation':
        factors = list(self.factors)
        factors[mode] = factor
        return KruskalActivation(tuple(factors))


@dataclass(frozen=True)
class Dictionary:
    """K atoms of identical support, stored as a (K, w_1, ..., w_p) stack."""

    atoms: np.ndarray
    signal_shape: Tuple[int, ...]

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64)
        signal_shape = tuple(int(n) for n in self.signal_shape)
        if atoms.ndim != len(signal_shape) + 1:
            raise DimensionError(
                f"atom stack of shape {atoms.shape} does not match signal shape {signal_shape}"
            )
        if any(w > n for w, n in zip(atoms.shape[1:], signal_shape)):
            raise DimensionError(
                f"atom support {atoms.shape[1:]} exceeds signal shape {signal_shape}"
            )
        norms = np.sqrt(np.sum(atoms.reshape(atoms.shape[0], -1) ** 2, axis=1))
        if np.any(norms > 1.0 + UNIT_BALL_SLACK):
            raise DimensionError(f"atoms must lie in the unit Frobenius ball, norms {norms}")
        atoms.setflags(write=False)
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'signal_shape', signal_shape)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def window(self) -> Tuple[int, ...]:
        return tuple(self.atoms.shape[1:])

    @property
    def order(self) -> int:
        return self.atoms.ndim - 1

    def padded(self) -> np.ndarray:
        """Atoms zero-padded to the signal shape, shape (K, n_1, ..., n_p)."""
        return np.stack([zero_pad(atom, self.signal_shape) for atom in self.atoms])


def check_conformal(factors: Sequence[np.ndarray], shape: Sequence[int] = None) -> int:
    """Return the shared column count of a factor list, or raise DimensionError."""
    if len(factors) == 0:
        raise DimensionError("at least one factor matrix is required")
    ranks = {f.shape[1] if f.ndim == 2 else None for f in factors}
    if len(ranks) != 1 or None in ranks:
        raise DimensionError(
            f"factor matrices must share their column count, got {[f.shape for f in factors]}"
        )
    if shape is not None and tuple(f.shape[0] for f in factors) != tuple(shape):
        raise DimensionError(
            f"factor row counts {[f.shape[0] for f in factors]} do not match shape {tuple(shape)}"
        )
    return ranks.pop()


def _letters(count: int) -> str:
    return ''.join(chr(ord('a') + i) for i in range(count))


def kruskal_compose(factors: Sequence[np.ndarray], rank: int = None) -> np.ndarray:
    """Sum over r of the outer products of column r of every factor."""
    shared = check_conformal(factors)
    if rank is not None and rank != shared:
        raise DimensionError(f"factors carry {shared} columns, rank {rank} requested")
    target = _letters(len(factors))
    operation = ','.join(i + 'z' for i in target) + '->' + target
    return np.einsum(operation, *factors)


def khatri_rao_reverse(mats: Sequence[np.ndarray]) -> np.ndarray:
    """
    Column-wise Kronecker product of the matrices taken in reverse order.

    For [A, B, C] column r of the result is kron(C[:, r], kron(B[:, r], A[:, r])).
    """
    n_columns = check_conformal(mats)
    reverse = list(mats)[::-1]
    target = _letters(len(reverse))
    operation = ','.join(i + 'z' for i in target) + '->' + target + 'z'
    return np.einsum(operation, *reverse).reshape((-1, n_columns))


def _check_mode(order: int, mode: int):
    if not 0 <= mode < order:
        raise DimensionError(f"mode {mode} out of range for an order-{order} tensor")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-q matricization, shape (n_q, prod of the other dims)."""
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape((t.shape[mode], -1), order='F')


def fold(mat: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of unfold."""
    shape = tuple(shape)
    _check_mode(len(shape), mode)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    return np.moveaxis(np.reshape(mat, moved, order='F'), 0, mode)


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(t) ** 2)))


def project_unit_ball(t: np.ndarray) -> np.ndarray:
    norm = frobenius_norm(t)
    if norm <= 1.0:
        return t
    return t / norm


def zero_pad(t: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Place t at the origin of a zero tensor of the given shape."""
    out = np.zeros(tuple(shape), dtype=t.dtype)
    out[tuple(slice(0, w) for w in t.shape)] = t
    return out


def crop(t: np.ndarray, window: Sequence[int]) -> np.ndarray:
    """Keep the leading window of every axis."""
    return t[tuple(slice(0, w) for w in window)]


def random_factors(shape: Sequence[int], rank: int, rng: np.random.Generator,
                   nonnegative: bool = False) -> Tuple[np.ndarray, ...]:
    """Uniform factor matrices, U[0, 1] when nonnegative else U[-1, 1]."""
    low = 0.0 if nonnegative else -1.0
    return tuple(rng.uniform(low, 1.0, size=(n, rank)) for n in shape)


def compose_all(activations: Sequence[KruskalActivation]) -> np.ndarray:
    """Dense (K, n_1, ..., n_p) stack of composed activations."""
    return np.stack([z.compose() for z in activations])


def stack_mode(activations: Sequence[KruskalActivation], mode: int) -> np.ndarray:
    """Mode-q factors of all atoms side by side: shape (n_q, K*R), atom-major columns."""
    return np.concatenate([z.factors[mode] for z in activations], axis=1)


def unstack_mode(activations: Sequence[KruskalActivation], mode: int,
                 stacked: np.ndarray) -> List[KruskalActivation]:
    rank = activations[0].rank
    return [
        z.replace_mode(mode, np.ascontiguousarray(stacked[:, k * rank:(k + 1) * rank]))
        for k, z in enumerate(activations)
    ]
