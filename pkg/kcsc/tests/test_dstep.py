import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from kcsc.dstep import (
    DStepWarmStart, ShermanMorrisonCache, compose_activation_spectra, dstep_solve, project_atoms,
    sherman_morrison_solve,
)
from kcsc.exceptions import DimensionError
from kcsc.spectral import dft, idft, kruskal_spectrum
from kcsc.tensor_core import KruskalActivation, project_unit_ball, zero_pad
from kcsc.tests.utils import random_problem


class ShermanMorrisonTests(SimpleTestCase):

    def test_matches_dense_solves(self):
        rng = np.random.default_rng(0)
        for n_signals in (1, 2):
            for n_atoms in (1, 3):
                rows = rng.standard_normal((n_signals, 12, n_atoms)) + 1j * rng.standard_normal((n_signals, 12, n_atoms))
                rhs = rng.standard_normal((12, n_atoms)) + 1j * rng.standard_normal((12, n_atoms))
                rho = 0.7
                solved = sherman_morrison_solve(rows, rho, rhs)
                for f in range(12):
                    system = rho * np.eye(n_atoms, dtype=complex)
                    for n in range(n_signals):
                        system += np.outer(np.conj(rows[n, f]), rows[n, f])
                    assert_allclose(solved[f], np.linalg.solve(system, rhs[f]), atol=1e-8)

    def test_cache_reuse(self):
        rng = np.random.default_rng(1)
        rows = rng.standard_normal((2, 5, 2)) + 0j
        cache = ShermanMorrisonCache.build(rows, 2.0)
        first = rng.standard_normal((5, 2)) + 0j
        second = rng.standard_normal((5, 2)) + 0j
        assert_allclose(cache.solve(first + second), cache.solve(first) + cache.solve(second), atol=1e-12)


class ProjectionTests(SimpleTestCase):

    def test_support_and_norm(self):
        padded = np.random.default_rng(2).standard_normal((2, 6, 6)) * 3.0
        projected = project_atoms(padded, (2, 3))
        self.assertTrue(np.all(projected[:, 2:, :] == 0.0))
        self.assertTrue(np.all(projected[:, :, 3:] == 0.0))
        norms = np.linalg.norm(projected.reshape(2, -1), axis=1)
        self.assertTrue(np.all(norms <= 1.0 + 1e-12))


class DStepTests(SimpleTestCase):

    def test_output_is_feasible(self):
        signal, dictionary, acts = random_problem((6, 5, 4), 3, (3, 2, 2), 2, seed=4)
        spectra = compose_activation_spectra(acts)
        updated, iterations = dstep_solve(signal, spectra, dictionary.window, max_iters=50)
        self.assertEqual(updated.atoms.shape, (3, 3, 2, 2))
        self.assertTrue(np.all(np.linalg.norm(updated.atoms.reshape(3, -1), axis=1) <= 1.0 + 1e-12))
        self.assertGreaterEqual(iterations, 1)

    def test_delta_activation_recovers_atom(self):
        shape, window = (6, 6, 6), (3, 3, 3)
        atom = project_unit_ball(np.random.default_rng(5).uniform(-1, 1, window)) * 0.8
        signal = zero_pad(atom, shape)
        delta = np.zeros(shape)
        delta[0, 0, 0] = 1.0
        updated, _ = dstep_solve(signal, dft(delta)[None], window, tol=1e-10, max_iters=500)
        assert_allclose(updated.atoms[0], atom, atol=1e-5)

    def test_recovers_atoms_from_fixed_activations(self):
        shape, window = (16, 16, 16), (3, 3, 3)
        rng = np.random.default_rng(8)
        atoms = np.stack([project_unit_ball(a) * 0.8 for a in rng.uniform(-1, 1, (2,) + window)])
        acts = [KruskalActivation(tuple(rng.standard_normal((n, 2)) for n in shape)) for _ in range(2)]
        spectra = compose_activation_spectra(acts)
        signal = idft(sum(dft(zero_pad(a, shape)) * s for a, s in zip(atoms, spectra)))

        updated, _ = dstep_solve(signal, spectra, window, tol=1e-10, max_iters=2000)
        rmse = np.sqrt(np.mean((updated.atoms - atoms) ** 2))
        self.assertLess(rmse, 1e-3)

    def test_zero_activations_return_projected_start(self):
        shape, window = (5, 5, 5), (2, 2, 2)
        init = np.random.default_rng(9).uniform(-2, 2, (2,) + window)
        spectra = np.zeros((2,) + shape, dtype=complex)
        updated, _ = dstep_solve(np.zeros(shape), spectra, window, max_iters=50, init=init)
        expected = np.stack([project_unit_ball(a) for a in init])
        assert_allclose(updated.atoms, expected, atol=1e-12)
        self.assertTrue(np.all(np.linalg.norm(updated.atoms.reshape(2, -1), axis=1) <= 1.0 + 1e-12))

    def test_warm_start_resumes_converged_iteration(self):
        shape, window = (6, 6, 6), (3, 3, 3)
        atom = project_unit_ball(np.random.default_rng(5).uniform(-1, 1, window)) * 0.8
        signal = zero_pad(atom, shape)
        delta = np.zeros(shape)
        delta[0, 0, 0] = 1.0
        warm = DStepWarmStart()
        first, first_iterations = dstep_solve(signal, dft(delta)[None], window, tol=1e-6,
                                              max_iters=5000, warm=warm)
        self.assertLess(first_iterations, 5000)
        self.assertEqual(warm.u.shape, (1,) + shape)
        self.assertGreater(warm.rho, 0.0)

        _, second_iterations = dstep_solve(signal, dft(delta)[None], window, tol=1e-6,
                                           max_iters=5000, init=first.atoms, warm=warm)
        self.assertLessEqual(second_iterations, 2)

    def test_fidelity_does_not_increase_from_start(self):
        signal, dictionary, acts = random_problem((5, 5, 5), 2, (2, 2, 2), 1, seed=6)
        spectra = compose_activation_spectra(acts)

        def fidelity(atoms):
            recon_hat = sum(dft(zero_pad(a, signal.shape)) * s for a, s in zip(atoms, spectra))
            return 0.5 * float(np.sum((signal - idft(recon_hat)) ** 2))

        updated, _ = dstep_solve(signal, spectra, dictionary.window, tol=1e-9, max_iters=300,
                                 init=dictionary.atoms)
        self.assertLessEqual(fidelity(updated.atoms), fidelity(dictionary.atoms) + 1e-6)

    def test_multiple_signals(self):
        rng = np.random.default_rng(7)
        signals = rng.standard_normal((2, 4, 4))
        spectra = np.stack([
            np.stack([kruskal_spectrum([rng.standard_normal((4, 1)), rng.standard_normal((4, 1))])
                      for _ in range(2)])
            for _ in range(2)
        ])
        updated, _ = dstep_solve(signals, spectra, (2, 2), max_iters=20)
        self.assertEqual(updated.signal_shape, (4, 4))

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            dstep_solve(np.zeros((4, 4)), np.zeros((2, 4, 5), dtype=complex), (2, 2))
        with self.assertRaises(DimensionError):
            dstep_solve(np.zeros((4, 4)), np.zeros((2, 4, 4), dtype=complex), (5, 2))
