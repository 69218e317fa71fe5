import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from kcsc.exceptions import DimensionError
from kcsc.tensor_core import (
    Dictionary, KruskalActivation, as_dense, check_conformal, compose_all, crop, fold, frobenius_norm,
    khatri_rao_reverse, kruskal_compose, project_unit_ball, random_factors,
    stack_mode, unfold, unstack_mode, zero_pad,
)


class KhatriRaoTests(SimpleTestCase):

    def test_reverse_order_single_column(self):
        result = khatri_rao_reverse([np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]])])
        assert_array_equal(result.ravel(), [3.0, 6.0, 4.0, 8.0])

    def test_columns_are_reverse_kronecker_products(self):
        rng = np.random.default_rng(1)
        a, b, c = (rng.standard_normal((n, 3)) for n in (2, 3, 4))
        result = khatri_rao_reverse([a, b, c])
        self.assertEqual(result.shape, (24, 3))
        for r in range(3):
            assert_allclose(result[:, r], np.kron(c[:, r], np.kron(b[:, r], a[:, r])))

    def test_mismatched_columns(self):
        with self.assertRaises(DimensionError):
            khatri_rao_reverse([np.ones((2, 2)), np.ones((3, 3))])


class UnfoldingTests(SimpleTestCase):

    def test_matricization_identity_every_mode(self):
        rng = np.random.default_rng(2)
        for trial in range(5):
            shape = tuple(rng.integers(2, 6, size=3))
            factors = [rng.standard_normal((n, 2)) for n in shape]
            dense = kruskal_compose(factors)
            for mode in range(3):
                others = [f for i, f in enumerate(factors) if i != mode]
                expected = factors[mode] @ khatri_rao_reverse(others).T
                assert_allclose(unfold(dense, mode), expected, atol=1e-12)

    def test_fold_inverts_unfold(self):
        t = np.arange(24.0).reshape(2, 3, 4)
        for mode in range(3):
            assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)

    def test_mode_out_of_range(self):
        with self.assertRaises(DimensionError):
            unfold(np.zeros((2, 2)), 2)


class KruskalActivationTests(SimpleTestCase):

    def test_rank_one_compose_is_outer_product(self):
        a, b = np.array([[1.0], [2.0]]), np.array([[3.0], [4.0], [5.0]])
        z = KruskalActivation((a, b))
        assert_array_equal(z.compose(), np.outer(a[:, 0], b[:, 0]))
        self.assertEqual(z.shape, (2, 3))
        self.assertEqual(z.rank, 1)

    def test_nonconformal_factors(self):
        with self.assertRaises(DimensionError):
            KruskalActivation((np.ones((2, 2)), np.ones((3, 1))))
        with self.assertRaises(DimensionError):
            check_conformal([np.ones((2, 2))], shape=(3,))

    def test_compose_rejects_wrong_rank(self):
        with self.assertRaises(DimensionError):
            kruskal_compose([np.ones((2, 2)), np.ones((2, 2))], rank=3)

    def test_stack_and_unstack_mode(self):
        rng = np.random.default_rng(3)
        acts = [KruskalActivation(random_factors((3, 4), 2, rng)) for _ in range(3)]
        stacked = stack_mode(acts, 1)
        self.assertEqual(stacked.shape, (4, 6))
        rebuilt = unstack_mode(acts, 1, stacked * 2.0)
        for old, new in zip(acts, rebuilt):
            assert_array_equal(new.factors[1], 2.0 * old.factors[1])
            assert_array_equal(new.factors[0], old.factors[0])

    def test_nonnegative_random_factors(self):
        factors = random_factors((5, 6), 3, np.random.default_rng(0), nonnegative=True)
        self.assertTrue(all(np.all(f >= 0) for f in factors))


class DictionaryTests(SimpleTestCase):

    def test_atoms_outside_unit_ball_rejected(self):
        with self.assertRaises(DimensionError):
            Dictionary(np.full((1, 2, 2), 1.0), (4, 4))

    def test_window_larger_than_signal_rejected(self):
        with self.assertRaises(DimensionError):
            Dictionary(np.zeros((1, 5, 2)), (4, 4))

    def test_padded_and_readonly(self):
        atoms = np.full((2, 2, 2), 0.25)
        dictionary = Dictionary(atoms, (4, 3))
        padded = dictionary.padded()
        self.assertEqual(padded.shape, (2, 4, 3))
        assert_array_equal(crop(padded[0], (2, 2)), atoms[0])
        self.assertEqual(padded[0, 2:].sum(), 0.0)
        with self.assertRaises(ValueError):
            dictionary.atoms[0, 0, 0] = 1.0
        atoms[0, 0, 0] = 0.0  # caller's array stays writable

    def test_projection_and_padding(self):
        t = np.full((2, 2), 1.0)
        self.assertAlmostEqual(np.linalg.norm(project_unit_ball(t)), 1.0)
        small = np.full((2, 2), 0.1)
        assert_array_equal(project_unit_ball(small), small)
        assert_array_equal(zero_pad(np.ones((1, 2)), (2, 3)), [[1, 1, 0], [0, 0, 0]])

    def test_frobenius_norm(self):
        self.assertAlmostEqual(frobenius_norm(np.array([[3.0, 0.0], [0.0, -4.0]])), 5.0)
        self.assertAlmostEqual(frobenius_norm(np.array([3j, 4.0])), 5.0)
        self.assertEqual(frobenius_norm(np.zeros((2, 2, 2))), 0.0)

    def test_compose_all_stacks_atoms(self):
        rng = np.random.default_rng(0)
        acts = [KruskalActivation(random_factors((3, 4), 2, rng)) for _ in range(3)]
        stacked = compose_all(acts)
        self.assertEqual(stacked.shape, (3, 3, 4))
        assert_allclose(stacked[1], acts[1].compose())


class AsDenseTests(SimpleTestCase):

    def test_reshape_and_length_check(self):
        self.assertEqual(as_dense(range(6), (2, 3)).shape, (2, 3))
        with self.assertRaises(DimensionError):
            as_dense(range(5), (2, 3))
