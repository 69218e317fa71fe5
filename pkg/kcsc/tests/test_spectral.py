import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from kcsc.exceptions import DimensionError
from kcsc.spectral import (
    circular_convolve, dft, dft_stack, idft, idft_stack, kruskal_spectrum, parseval_scale,
)
from kcsc.tensor_core import Dictionary, kruskal_compose, zero_pad
from kcsc.tests.utils import direct_convolution_sum


class FourierConventionTests(SimpleTestCase):

    def test_parseval(self):
        t = np.random.default_rng(0).standard_normal((4, 5, 6))
        self.assertAlmostEqual(
            float(np.sum(t ** 2)), parseval_scale(t.shape) * float(np.sum(np.abs(dft(t)) ** 2)), places=10)

    def test_inverse(self):
        t = np.random.default_rng(1).standard_normal((3, 4))
        assert_allclose(idft(dft(t)), t, atol=1e-12)
        stack = np.random.default_rng(2).standard_normal((2, 3, 4))
        assert_allclose(idft_stack(dft_stack(stack)), stack, atol=1e-12)
        assert_allclose(dft_stack(stack)[1], dft(stack[1]))

    def test_kruskal_spectrum_matches_dense_dft(self):
        rng = np.random.default_rng(3)
        factors = [rng.standard_normal((n, 2)) for n in (3, 4, 5)]
        assert_allclose(kruskal_spectrum(factors), dft(kruskal_compose(factors)), atol=1e-10)


class CircularConvolutionTests(SimpleTestCase):

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(4)
        atom = rng.uniform(-0.3, 0.3, (2, 3))
        z = rng.standard_normal((5, 4))
        dictionary = Dictionary(atom[None], z.shape)
        expected = direct_convolution_sum(dictionary, z[None])
        assert_allclose(circular_convolve(zero_pad(atom, z.shape), z), expected, atol=1e-12)

    def test_delta_is_identity(self):
        z = np.random.default_rng(5).standard_normal((4, 4))
        delta = np.zeros_like(z)
        delta[0, 0] = 1.0
        assert_allclose(circular_convolve(delta, z), z, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            circular_convolve(np.zeros((2, 2)), np.zeros((2, 3)))
