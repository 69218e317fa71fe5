import numpy as np

from kcsc.tensor_core import Dictionary, KruskalActivation, project_unit_ball


def random_problem(shape=(4, 5, 3), n_atoms=2, window=(2, 2, 2), rank=2, seed=0):
    """A random signal, a feasible dictionary and random Kruskal activations."""
    rng = np.random.default_rng(seed)
    atoms = np.stack([project_unit_ball(a) for a in rng.uniform(-1, 1, (n_atoms,) + tuple(window))])
    dictionary = Dictionary(atoms, shape)
    activations = [
        KruskalActivation(tuple(rng.standard_normal((n, rank)) for n in shape))
        for _ in range(n_atoms)
    ]
    signal = rng.standard_normal(shape)
    return signal, dictionary, activations


def direct_convolution_sum(dictionary, dense_activations):
    """sum_k d_k * z_k by explicit circular index arithmetic (slow reference)."""
    shape = dictionary.signal_shape
    out = np.zeros(shape)
    for atom, z in zip(dictionary.atoms, dense_activations):
        for offset in np.ndindex(*atom.shape):
            if atom[offset] == 0.0:
                continue
            out += atom[offset] * np.roll(z, offset, axis=tuple(range(len(shape))))
    return out
