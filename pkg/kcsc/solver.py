"""
Alternating minimization of the Kruskal convolutional dictionary learning
objective: mode-wise activation updates (TC-FISTA) and ADMM dictionary
updates, with random restarts and effective-rank reporting.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import baselines
from .dstep import DStepWarmStart, compose_activation_spectra, dstep_solve
from .exceptions import ConfigError, DimensionError, DivergenceError, UnknownAtomError
from .spectral import dft_stack, idft, kruskal_spectrum
from .tensor_core import (
    Dictionary, KruskalActivation, compose_all, project_unit_ball, random_factors,
)
from .zstep import RegWeights, fista_mode_q

logger = logging.getLogger(__name__)

SOLVERS = ('kcsc', 'fcsc-shm', 'convfista-fd')
DESCENT_SLACK = 1e-9
ENERGY_FLOOR = 1e-12
BUDGET_GROWTH = 2
BUDGET_CAP = 8


@dataclass(frozen=True)
class SolverConfig:
    n_atoms: int
    rank: int
    window: Tuple[int, ...]
    reg: RegWeights
    max_sweeps: int = 50
    tol: float = 1e-4
    inner_max_iters: int = 200
    inner_tol: float = 1e-5
    restarts: int = 5
    seed: int = 0
    mode_order: Optional[Tuple[int, ...]] = None
    monotone: bool = False
    rho: float = 1.0
    dstep_max_iters: int = 100
    dstep_tol: float = 1e-6
    solver: str = 'kcsc'
    use_gram: bool = True
    threads: int = 1
    baseline_max_iters: int = 500
    baseline_tol: float = 1e-6
    effective_rank_tol: float = 1e-3

    @property
    def order(self) -> int:
        return len(self.window)

    def modes(self) -> Tuple[int, ...]:
        return self.mode_order if self.mode_order is not None else tuple(range(self.order))

    def validate(self, signal_shape: Sequence[int]):
        signal_shape = tuple(signal_shape)
        if self.rank < 1:
            raise ConfigError(f"rank must be at least 1, got {self.rank}", field='rank')
        if self.n_atoms < 1:
            raise ConfigError(f"need at least one atom, got {self.n_atoms}", field='k')
        if len(self.window) != len(signal_shape) or any(w > n for w, n in zip(self.window, signal_shape)):
            raise DimensionError(f"window {self.window} does not fit signal shape {signal_shape}")
        if self.tol <= 0 or self.inner_tol < 0:
            raise ConfigError('tolerances must be positive', field='tol')
        if self.restarts < 1:
            raise ConfigError('restarts must be at least 1', field='restarts')
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}, choose from {', '.join(SOLVERS)}", field='solver')
        if sorted(self.modes()) != list(range(self.order)):
            raise ConfigError(f"mode order {self.modes()} must visit every mode once", field='mode_order')
        self.reg.validate(self.order)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['window'] = list(self.window)
        data['mode_order'] = list(self.mode_order) if self.mode_order is not None else None
        data['reg'] = {
            'alpha': list(self.reg.alpha),
            'beta': list(self.reg.beta),
            'nonnegative': self.reg.nonnegative,
        }
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SolverConfig':
        data = dict(data)
        reg = data.pop('reg')
        data['reg'] = RegWeights(tuple(reg['alpha']), tuple(reg['beta']), bool(reg['nonnegative']))
        data['window'] = tuple(data['window'])
        if data.get('mode_order') is not None:
            data['mode_order'] = tuple(data['mode_order'])
        return cls(**data)


@dataclass
class FitResult:
    dictionary: Dictionary
    activations: Optional[List[List[KruskalActivation]]]
    objective_trace: List[float]
    effective_ranks: List[List[int]]
    timings: Dict[str, float]
    iterations: Dict[str, int]
    restart: int = 0
    restart_objectives: List[float] = field(default_factory=list)
    dense_activations: Optional[np.ndarray] = None

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    def composed_activations(self) -> np.ndarray:
        """Dense activations, shape (N, K, n_1, ..., n_p)."""
        if self.dense_activations is not None:
            return self.dense_activations
        return np.stack([compose_all(acts) for acts in self.activations])


def _as_batch(signals) -> np.ndarray:
    if isinstance(signals, (list, tuple)):
        signals = np.stack([np.asarray(s, dtype=np.float64) for s in signals])
    return np.asarray(signals, dtype=np.float64)


def _atom_spectra(dictionary: Dictionary) -> np.ndarray:
    return dft_stack(dictionary.padded())


def _reconstruct_spectrum(atom_spectra: np.ndarray, activations: Sequence[KruskalActivation],
                          keep: Iterable[int] = None) -> np.ndarray:
    keep = range(len(activations)) if keep is None else keep
    total = np.zeros(atom_spectra.shape[1:], dtype=complex)
    for k in keep:
        total += atom_spectra[k] * kruskal_spectrum(activations[k].factors)
    return total


def regularization(activations: Sequence[KruskalActivation], reg: RegWeights) -> float:
    value = 0.0
    for z in activations:
        for q, factor in enumerate(z.factors):
            value += reg.alpha[q] * float(np.sum(np.abs(factor))) + reg.beta[q] * float(np.sum(factor ** 2))
    return value


def _signal_objective(signal: np.ndarray, atom_spectra: np.ndarray,
                      activations: Sequence[KruskalActivation], reg: RegWeights) -> float:
    recon = idft(_reconstruct_spectrum(atom_spectra, activations))
    return 0.5 * float(np.sum((signal - recon) ** 2)) + regularization(activations, reg)


def objective(signals, dictionary: Dictionary, activations: Sequence[Sequence[KruskalActivation]],
              reg: RegWeights) -> float:
    """Full objective: fidelity plus per-mode l1 and squared Frobenius penalties."""
    signals = _as_batch(signals)
    atom_spectra = _atom_spectra(dictionary)
    return sum(
        _signal_objective(signal, atom_spectra, acts, reg)
        for signal, acts in zip(signals, activations)
    )


def reconstruct(dictionary: Dictionary, activations, exclude_atoms: Iterable[int] = ()) -> np.ndarray:
    """
    Sum of atom contributions for one signal, leaving out exclude_atoms.

    activations is either a list of KruskalActivation or a dense (K, ...) array.
    """
    exclude = set(exclude_atoms)
    unknown = sorted(k for k in exclude if not 0 <= k < dictionary.n_atoms)
    if unknown:
        raise UnknownAtomError(f"unknown atom index {unknown}, dictionary holds {dictionary.n_atoms} atoms")
    keep = [k for k in range(dictionary.n_atoms) if k not in exclude]
    atom_spectra = _atom_spectra(dictionary)
    if isinstance(activations, np.ndarray):
        if not keep:
            return np.zeros(dictionary.signal_shape)
        return baselines.dense_reconstruction(atom_spectra[keep], activations[keep][None])[0]
    return idft(_reconstruct_spectrum(atom_spectra, activations, keep))


def effective_rank(activation: KruskalActivation, tol: float = 1e-3) -> int:
    """Number of rank-one components carrying more than tol of the largest component energy."""
    if tol < 0:
        raise ConfigError('effective rank tolerance must be nonnegative', field='tol')
    energies = np.prod([np.linalg.norm(f, axis=0) for f in activation.factors], axis=0)
    top = float(np.max(energies)) if energies.size else 0.0
    if top == 0.0:
        return 0
    return int(np.sum(energies > tol * top))


def initial_dictionary(n_atoms: int, window: Sequence[int], signal_shape: Sequence[int],
                       rng: np.random.Generator) -> Dictionary:
    atoms = rng.uniform(-1.0, 1.0, size=(n_atoms,) + tuple(window))
    return Dictionary(np.stack([project_unit_ball(a) for a in atoms]), signal_shape)


class _Problem:
    """
    Signals, their spectra and the per-phase bookkeeping of one run.

    With a mask, unobserved entries are refilled with the current
    reconstruction before every sweep. The full-data objective on the filled
    signals majorizes the masked objective and touches it at the fill point,
    so decreasing one decreases the other.
    """

    def __init__(self, signals: np.ndarray, config: SolverConfig, mask: np.ndarray = None):
        self.observed = signals
        self.mask = mask
        self.signals = signals if mask is None else np.where(mask, signals, 0.0)
        self.signal_spectra = dft_stack(self.signals)
        self.energy = 0.5 * float(np.sum(self.signals ** 2))
        self.config = config
        self.inner_budget = config.inner_max_iters
        self.dstep_budget = config.dstep_max_iters
        self.dstep_warm = DStepWarmStart()
        self.timings = {'zstep': 0.0, 'dstep': 0.0}
        self.iterations = {'zstep': 0, 'dstep': 0, 'sweeps': 0}

    def reconstruction(self, dictionary: Dictionary, activations) -> np.ndarray:
        return np.stack([reconstruct(dictionary, acts) for acts in activations])

    def fill(self, dictionary: Dictionary, activations):
        if self.mask is None:
            return
        self.signals = np.where(self.mask, self.observed, self.reconstruction(dictionary, activations))
        self.signal_spectra = dft_stack(self.signals)

    def _penalty(self, activations) -> float:
        if self.config.solver != 'kcsc':
            return self.config.reg.alpha[0] * float(np.sum(np.abs(activations)))
        return sum(regularization(acts, self.config.reg) for acts in activations)

    def objective(self, dictionary: Dictionary, activations, surrogate: bool = False) -> float:
        """Objective on the observed entries; surrogate=True uses the current filled signals."""
        if self.mask is not None and not surrogate:
            residual = np.where(self.mask, self.observed - self.reconstruction(dictionary, activations), 0.0)
            return 0.5 * float(np.sum(residual ** 2)) + self._penalty(activations)
        if self.config.solver != 'kcsc':
            return baselines.dense_objective(self.signals, dictionary, activations, self.config.reg.alpha[0])
        atom_spectra = _atom_spectra(dictionary)
        return sum(
            _signal_objective(signal, atom_spectra, acts, self.config.reg)
            for signal, acts in zip(self.signals, activations)
        )

    def _sweep_signal(self, n: int, dictionary: Dictionary, atom_spectra: np.ndarray,
                      acts: List[KruskalActivation]) -> Tuple[List[KruskalActivation], int, bool]:
        config = self.config
        signal = self.signals[n]
        total, exhausted = 0, False
        current = _signal_objective(signal, atom_spectra, acts, config.reg) if config.monotone else None
        for mode in config.modes():
            update = fista_mode_q(
                signal, dictionary, acts, mode, config.reg,
                tol=config.inner_tol, max_iters=self.inner_budget,
                monotone=config.monotone, use_gram=config.use_gram,
                signal_spectrum=self.signal_spectra[n], atom_spectra=atom_spectra,
            )
            total += update.iterations
            exhausted = exhausted or update.iterations >= self.inner_budget
            if config.monotone:
                candidate = _signal_objective(signal, atom_spectra, update.activations, config.reg)
                if candidate > current + DESCENT_SLACK * max(1.0, abs(current)):
                    logger.warning(f"signal {n} mode {mode}: rejected step raising the objective "
                                   f"from {current:.6e} to {candidate:.6e}")
                    continue
                current = candidate
            acts = update.activations
        return acts, total, exhausted

    def zstep(self, dictionary: Dictionary, activations):
        config = self.config
        start = time.perf_counter()
        if config.solver == 'kcsc':
            atom_spectra = _atom_spectra(dictionary)
            indices = range(len(self.signals))
            if config.threads > 1 and len(self.signals) > 1:
                with ThreadPoolExecutor(max_workers=config.threads) as pool:
                    results = list(pool.map(
                        lambda n: self._sweep_signal(n, dictionary, atom_spectra, activations[n]), indices))
            else:
                results = [self._sweep_signal(n, dictionary, atom_spectra, activations[n]) for n in indices]
            activations = [acts for acts, _, _ in results]
            self.iterations['zstep'] += sum(count for _, count, _ in results)
            if any(exhausted for _, _, exhausted in results):
                self.inner_budget = self._grown(self.inner_budget, config.inner_max_iters, 'zstep')
        else:
            encoder = baselines.fcsc_shm_encode if config.solver == 'fcsc-shm' else baselines.convfista_fd_encode
            kwargs = {'rho': None} if config.solver == 'fcsc-shm' else {}
            encoding = encoder(
                self.signals, dictionary, config.reg.alpha[0], tol=config.baseline_tol,
                max_iters=config.baseline_max_iters, init=activations, **kwargs,
            )
            activations = encoding.activations
            self.iterations['zstep'] += encoding.iterations
        self.timings['zstep'] += time.perf_counter() - start
        return activations

    def dstep(self, dictionary: Dictionary, activations) -> Dictionary:
        config = self.config
        start = time.perf_counter()
        if config.solver == 'kcsc':
            spectra = np.stack([compose_activation_spectra(acts) for acts in activations])
        else:
            spectra = dft_stack(activations.reshape((-1,) + self.signals.shape[1:])).reshape(
                activations.shape)
        updated, iterations = dstep_solve(
            self.signals, spectra, config.window, rho=config.rho,
            tol=config.dstep_tol, max_iters=self.dstep_budget, init=dictionary.atoms,
            warm=self.dstep_warm,
        )
        self.iterations['dstep'] += iterations
        if iterations >= self.dstep_budget:
            self.dstep_budget = self._grown(self.dstep_budget, config.dstep_max_iters, 'dstep')
        self.timings['dstep'] += time.perf_counter() - start
        return updated

    @staticmethod
    def _grown(budget: int, configured: int, phase: str) -> int:
        grown = min(budget * BUDGET_GROWTH, configured * BUDGET_CAP)
        if grown > budget:
            logger.debug(f"{phase} budget exhausted, raised from {budget} to {grown} iterations")
        return grown


def _initial_activations(signals: np.ndarray, config: SolverConfig, rng: np.random.Generator):
    if config.solver != 'kcsc':
        return np.zeros((signals.shape[0], config.n_atoms) + signals.shape[1:])
    return [
        [KruskalActivation(random_factors(signals.shape[1:], config.rank, rng, config.reg.nonnegative))
         for _ in range(config.n_atoms)]
        for _ in range(signals.shape[0])
    ]


def channel_mask(signal_shape: Sequence[int], dead_channels: Iterable[int]) -> np.ndarray:
    """Observation mask hiding whole slices along the first signal axis."""
    mask = np.ones(tuple(signal_shape), dtype=bool)
    for channel in dead_channels:
        if not 0 <= channel < mask.shape[0]:
            raise DimensionError(f"channel {channel} outside {mask.shape[0]} channels")
        mask[channel] = False
    return mask


def _check_mask(mask, shape: Tuple[int, ...]) -> Optional[np.ndarray]:
    """Boolean observation mask broadcast to the signal batch; None when everything is observed."""
    if mask is None:
        return None
    try:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), shape)
    except ValueError as exc:
        raise DimensionError(f"mask of shape {np.shape(mask)} does not broadcast to signals {shape}") from exc
    if mask.all():
        return None
    if not mask.any():
        raise ConfigError('mask hides every entry', field='mask')
    return mask


def _check_activations(activations, signals: np.ndarray, config: SolverConfig):
    """Starting activations in the layout the configured solver works on."""
    n_signals, shape = signals.shape[0], signals.shape[1:]
    if config.solver != 'kcsc':
        activations = np.array(activations, dtype=np.float64)
        expected = (n_signals, config.n_atoms) + shape
        if activations.shape != expected:
            raise DimensionError(f"starting activations {activations.shape}, expected {expected}")
        return activations
    if len(activations) != n_signals or any(len(acts) != config.n_atoms for acts in activations):
        raise DimensionError(f"starting activations must hold {config.n_atoms} atoms for each of "
                             f"{n_signals} signals")
    for acts in activations:
        for z in acts:
            if z.shape != shape or z.rank != config.rank:
                raise DimensionError(f"starting activation of shape {z.shape} and rank {z.rank} does not "
                                     f"match signals {shape} with rank {config.rank}")
    return [list(acts) for acts in activations]


def _run(problem: _Problem, dictionary: Dictionary, activations, learn_dictionary: bool,
         restart: int) -> FitResult:
    config = problem.config
    trace = [problem.objective(dictionary, activations)]
    for sweep in range(1, config.max_sweeps + 1):
        problem.fill(dictionary, activations)
        activations = problem.zstep(dictionary, activations)
        if learn_dictionary:
            candidate = problem.dstep(dictionary, activations)
            if config.monotone:
                before = problem.objective(dictionary, activations, surrogate=True)
                after = problem.objective(candidate, activations, surrogate=True)
                if after > before + DESCENT_SLACK * max(1.0, abs(before)):
                    logger.warning(f"sweep {sweep}: rejected dictionary update raising the objective "
                                   f"from {before:.6e} to {after:.6e}")
                    candidate = dictionary
            dictionary = candidate
        value = problem.objective(dictionary, activations)
        if not np.isfinite(value):
            raise DivergenceError(f"objective became non-finite at sweep {sweep}", phase='solver')
        previous = trace[-1]
        trace.append(value)
        problem.iterations['sweeps'] = sweep
        # An objective at rounding level of the signal energy counts as converged.
        scale = max(abs(previous), ENERGY_FLOOR * problem.energy, 1e-300)
        relative = abs(previous - value) / scale
        logger.debug(f"restart {restart} sweep {sweep}: objective={value:.6e} relative change={relative:.3e}")
        if relative < config.tol:
            break

    if config.solver == 'kcsc':
        ranks = [[effective_rank(z, config.effective_rank_tol) for z in acts] for acts in activations]
        return FitResult(dictionary, activations, trace, ranks, dict(problem.timings),
                         dict(problem.iterations), restart)
    return FitResult(dictionary, None, trace, [], dict(problem.timings), dict(problem.iterations),
                     restart, dense_activations=activations)


def _best_of_restarts(signals, config: SolverConfig, learn_dictionary: bool,
                      dictionary: Dictionary = None, init_activations=None, mask=None) -> FitResult:
    signals = _as_batch(signals)
    config.validate(signals.shape[1:])
    if dictionary is not None and (dictionary.signal_shape != signals.shape[1:]
                                   or dictionary.n_atoms != config.n_atoms
                                   or dictionary.window != config.window):
        raise DimensionError(
            f"dictionary of {dictionary.n_atoms} atoms {dictionary.window} on signals "
            f"{dictionary.signal_shape} does not match signals {signals.shape[1:]} "
            f"with config K={config.n_atoms} window {config.window}"
        )
    mask = _check_mask(mask, signals.shape)
    if init_activations is not None:
        init_activations = _check_activations(init_activations, signals, config)
    # Baseline encodes start from zero activations: restarts would repeat the same convex solve.
    if dictionary is not None and init_activations is not None:
        restarts = 1
    elif config.solver != 'kcsc' and not learn_dictionary:
        restarts = 1
    else:
        restarts = config.restarts

    best, objectives = None, []
    for restart in range(restarts):
        rng = np.random.default_rng([config.seed, restart])
        start_dictionary = dictionary if dictionary is not None else initial_dictionary(
            config.n_atoms, config.window, signals.shape[1:], rng)
        activations = init_activations if init_activations is not None else \
            _initial_activations(signals, config, rng)
        problem = _Problem(signals, config, mask)
        try:
            result = _run(problem, start_dictionary, activations, learn_dictionary, restart)
        except DivergenceError as exc:
            raise exc.with_restart(restart) from exc
        objectives.append(result.final_objective)
        logger.info(f"restart {restart}: objective {result.final_objective:.6e} "
                    f"after {result.iterations['sweeps']} sweeps")
        if best is None or result.final_objective < best.final_objective:
            best = result
    best.restart_objectives = objectives
    logger.info(f"kept restart {best.restart} with objective {best.final_objective:.6e}")
    return best


def fit(signals, config: SolverConfig, mask=None, init_dictionary: Dictionary = None,
        init_activations=None) -> FitResult:
    """
    Learn the dictionary and the activations, keeping the best restart.

    mask marks observed entries (broadcast against the signal batch); the
    fidelity only counts those. init_dictionary and init_activations replace
    the random starting point; given both, a single run is made.
    """
    return _best_of_restarts(signals, config, learn_dictionary=True, dictionary=init_dictionary,
                             init_activations=init_activations, mask=mask)


def encode(signals, dictionary: Dictionary, config: SolverConfig, mask=None,
           init_activations=None) -> FitResult:
    """Activations only, for a fixed dictionary."""
    config = replace(config, n_atoms=dictionary.n_atoms, window=dictionary.window)
    return _best_of_restarts(signals, config, learn_dictionary=False, dictionary=dictionary,
                             init_activations=init_activations, mask=mask)
