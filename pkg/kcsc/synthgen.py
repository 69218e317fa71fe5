"""
Synthetic datasets drawn from the convolutional model, and evaluation metrics.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ConfigError, DimensionError
from .spectral import dft_stack, idft, kruskal_spectrum
from .tensor_core import Dictionary, KruskalActivation, compose_all

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    signal_shape: Tuple[int, ...] = (25, 25, 25)
    n_atoms: int = 3
    window: Tuple[int, ...] = (5, 5, 5)
    rank: int = 2
    bernoulli: float = 0.2
    snr: Optional[float] = None
    n_signals: int = 10
    seed: int = 0

    def validate(self):
        if not 0.0 < self.bernoulli <= 1.0:
            raise ConfigError(f"Bernoulli probability must lie in (0, 1], got {self.bernoulli}", field='bernoulli')
        if self.rank < 1:
            raise ConfigError(f"true rank must be at least 1, got {self.rank}", field='rank')
        if self.n_atoms < 1 or self.n_signals < 1:
            raise ConfigError('need at least one atom and one signal', field='k')
        if len(self.window) != len(self.signal_shape) or any(
                w > n for w, n in zip(self.window, self.signal_shape)):
            raise DimensionError(f"window {self.window} larger than signal {self.signal_shape}")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['signal_shape'] = list(self.signal_shape)
        data['window'] = list(self.window)
        return data


PRESETS = {
    'small': SynthConfig((25, 25, 25), 3, (5, 5, 5), 2, 0.2, None, 10),
    'large': SynthConfig((128, 128, 128), 3, (5, 5, 5), 2, 0.02, None, 10),
}


class SyntheticDataset(NamedTuple):
    signals: np.ndarray          # (N, n_1, ..., n_p), noisy when an SNR is set
    clean: np.ndarray            # (N, n_1, ..., n_p)
    dictionary: Dictionary
    activations: List[List[KruskalActivation]]


def _bernoulli_uniform(rng: np.random.Generator, size, probability: float,
                       low: float = -1.0, high: float = 1.0) -> np.ndarray:
    mask = rng.random(size) < probability
    return np.where(mask, rng.uniform(low, high, size), 0.0)


def synthesize(dictionary: Dictionary, activations: Sequence[KruskalActivation]) -> np.ndarray:
    """Signal of the convolutional model for one set of activations."""
    atom_spectra = dft_stack(dictionary.padded())
    spectrum = sum(d * kruskal_spectrum(z.factors) for d, z in zip(atom_spectra, activations))
    return idft(spectrum)


def add_noise(clean: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise scaled so that snr(clean, noisy) equals snr_db exactly."""
    noise = rng.standard_normal(clean.shape)
    target_mse = np.var(clean) / (10.0 ** (snr_db / 10.0))
    return clean + noise * np.sqrt(target_mse / np.mean(noise ** 2))


def generate(config: SynthConfig) -> SyntheticDataset:
    config.validate()
    rng = np.random.default_rng(config.seed)
    atoms = rng.uniform(-1.0, 1.0, size=(config.n_atoms,) + tuple(config.window))
    atoms /= np.sqrt(np.sum(atoms.reshape(config.n_atoms, -1) ** 2, axis=1)).reshape(
        (-1,) + (1,) * len(config.window))
    dictionary = Dictionary(atoms, config.signal_shape)

    activations, clean, noisy = [], [], []
    for _ in range(config.n_signals):
        acts = [
            KruskalActivation(tuple(
                _bernoulli_uniform(rng, (n, config.rank), config.bernoulli) for n in config.signal_shape
            ))
            for _ in range(config.n_atoms)
        ]
        signal = synthesize(dictionary, acts)
        activations.append(acts)
        clean.append(signal)
        noisy.append(add_noise(signal, config.snr, rng) if config.snr is not None else signal)
    logger.info(f"generated {config.n_signals} signals of shape {config.signal_shape} "
                f"(K={config.n_atoms}, R*={config.rank}, p_B={config.bernoulli}, snr={config.snr})")
    return SyntheticDataset(np.stack(noisy), np.stack(clean), dictionary, activations)


def planted_spectrogram(shape: Sequence[int] = (16, 24, 32), n_atoms: int = 2,
                        window: Sequence[int] = (3, 3, 3), rank: int = 2,
                        bernoulli: float = 0.3, dead_channel: int = 0,
                        seed: int = 0) -> Tuple[np.ndarray, np.ndarray, SyntheticDataset]:
    """
    Nonnegative channels x frequencies x frames tensor with one dead channel.

    Returns (observed, clean, dataset); observed equals clean with the
    dead_channel slice zeroed.
    """
    shape, window = tuple(shape), tuple(window)
    if not 0 <= dead_channel < shape[0]:
        raise DimensionError(f"dead channel {dead_channel} outside {shape[0]} channels")
    rng = np.random.default_rng(seed)
    atoms = rng.uniform(0.0, 1.0, size=(n_atoms,) + window)
    atoms /= np.sqrt(np.sum(atoms.reshape(n_atoms, -1) ** 2, axis=1)).reshape((-1,) + (1,) * len(window))
    dictionary = Dictionary(atoms, shape)
    acts = []
    for _ in range(n_atoms):
        # Channel loadings are dense so that every channel carries the shared activity.
        channel = rng.uniform(0.5, 1.0, size=(shape[0], rank))
        others = tuple(_bernoulli_uniform(rng, (n, rank), bernoulli, 0.0, 1.0) for n in shape[1:])
        acts.append(KruskalActivation((channel,) + others))
    clean = synthesize(dictionary, acts)
    observed = clean.copy()
    observed[dead_channel] = 0.0
    dataset = SyntheticDataset(observed[None], clean[None], dictionary, [acts])
    return observed, clean, dataset


def snr(ref: np.ndarray, noisy: np.ndarray) -> float:
    """10 log10(Var(ref) / MSE(ref, noisy)); +inf when the tensors coincide."""
    if ref.shape != noisy.shape:
        raise DimensionError(f"snr needs equal shapes, got {ref.shape} and {noisy.shape}")
    mse = float(np.mean((ref - noisy) ** 2))
    if mse == 0.0:
        return float('inf')
    return float(10.0 * np.log10(np.var(ref) / mse))


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    if np.shape(a) != np.shape(b):
        raise DimensionError(f"rmse needs equal shapes, got {np.shape(a)} and {np.shape(b)}")
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def hit_rate(rmses: Sequence[float], eps: float) -> float:
    if len(rmses) == 0:
        raise ConfigError('hit rate of an empty list', field='rmses')
    return float(np.mean(np.asarray(rmses) < eps))


def match_atoms(true_atoms: np.ndarray, estimated_atoms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Assignment of estimated atoms to true atoms maximizing absolute correlation.

    Returns (order, signs): estimated atom order[k] matches true atom k, with
    sign signs[k].
    """
    true_flat = true_atoms.reshape(true_atoms.shape[0], -1)
    est_flat = estimated_atoms.reshape(estimated_atoms.shape[0], -1)
    norms = np.outer(np.linalg.norm(true_flat, axis=1), np.linalg.norm(est_flat, axis=1))
    correlation = (true_flat @ est_flat.T) / np.where(norms > 0, norms, 1.0)
    rows, cols = linear_sum_assignment(-np.abs(correlation))
    order = cols[np.argsort(rows)]
    signs = np.sign(correlation[np.arange(len(order)), order])
    signs[signs == 0] = 1.0
    return order, signs


def activation_rmse(true_activations: np.ndarray, estimated_activations: np.ndarray,
                    true_atoms: np.ndarray = None, estimated_atoms: np.ndarray = None) -> float:
    """
    RMSE between composed activation stacks (N, K, ...), after aligning atom
    order and sign when both dictionaries are given.
    """
    estimated = np.asarray(estimated_activations)
    if true_atoms is not None and estimated_atoms is not None:
        order, signs = match_atoms(true_atoms, estimated_atoms)
        estimated = estimated[:, order] * signs.reshape((1, -1) + (1,) * (estimated.ndim - 2))
    return rmse(true_activations, estimated)


def evaluate_fit(result, signals: np.ndarray, clean: np.ndarray = None,
                 truth: Tuple[Dictionary, List[List[KruskalActivation]]] = None) -> Dict[str, float]:
    """
    RMSE(Y) of the reconstructions against the clean signals (or the inputs
    when no clean copy exists) and, given the true model, RMSE(Z) of the
    composed activations after atom alignment.
    """
    from .solver import reconstruct

    reference = signals if clean is None else clean
    if result.dense_activations is not None:
        per_signal = result.dense_activations
    else:
        per_signal = result.activations
    recon = np.stack([reconstruct(result.dictionary, acts) for acts in per_signal])
    metrics = {'objective': float(result.final_objective), 'rmse_y': rmse(reference, recon)}
    if truth is not None:
        true_dictionary, true_activations = truth
        if true_dictionary.n_atoms != result.dictionary.n_atoms:
            logger.warning(f"RMSE(Z) skipped: {true_dictionary.n_atoms} true atoms, "
                           f"{result.dictionary.n_atoms} estimated")
        else:
            true_dense = np.stack([compose_all(acts) for acts in true_activations])
            metrics['rmse_z'] = activation_rmse(true_dense, result.composed_activations(),
                                                true_dictionary.atoms, result.dictionary.atoms)
    return metrics
