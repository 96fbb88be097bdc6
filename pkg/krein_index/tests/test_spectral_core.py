import math
import unittest

import numpy as np
import numpy.testing as npt

from krein_index.errors import GridError, NonIntegrableInputError
from krein_index.spectral_core import (SKEW_ADJOINT, Multiplier, RealField, analyze, antiderivative_multiplier,
                                       bessel_multiplier, coarsen, derivative_matrix, derivative_multiplier,
                                       field_from_function, fourier_basis, fractional_derivative_multiplier,
                                       hilbert_matrix, hilbert_multiplier, inner_product, interpolate,
                                       inverse_fractional_multiplier, inverse_transform, make_grid, parseval_pairing,
                                       random_band_limited_field, refine, regularized_quarter_root_multiplier,
                                       spectral_tail, synthesize, transform)

# pylint: disable=missing-class-docstring,missing-function-docstring

SAMPLES = 100


class TestSpectralGrid(unittest.TestCase):

    def test_small_grid(self):
        grid = make_grid(8, 4.0)
        self.assertEqual(grid.spacing, 1.0)
        self.assertEqual(sorted(grid.wavenumbers), [-0.5, -0.375, -0.25, -0.125, 0.0, 0.125, 0.25, 0.375])
        self.assertEqual(int(np.sum(grid.wavenumbers == 0)), 1)
        self.assertEqual(grid.points[0], -4.0)
        self.assertEqual(grid.points[grid.n // 2], 0.0)

    def test_spacing(self):
        grid = make_grid(1024, 200.0)
        self.assertEqual(grid.spacing, 0.390625)
        self.assertAlmostEqual(grid.spacing * grid.n, 2 * grid.half_length)

    def test_rejects_bad_parameters(self):
        with self.assertRaises(GridError):
            make_grid(7, 4.0)
        with self.assertRaises(GridError):
            make_grid(6, 4.0)
        with self.assertRaises(GridError):
            make_grid(8, 0.0)
        with self.assertRaises(ValueError):
            make_grid(8, -1.0)

    def test_outer_mask(self):
        grid = make_grid(40, 10.0)
        mask = grid.outer_mask()
        self.assertTrue(np.all(np.abs(grid.points[mask]) >= 9.5))
        self.assertFalse(mask[grid.n // 2])


class TestRealField(unittest.TestCase):

    def test_shape_checked(self):
        with self.assertRaises(GridError):
            RealField(make_grid(8, 4.0), np.zeros(9))

    def test_arithmetic_needs_same_grid(self):
        f = RealField(make_grid(8, 4.0), np.ones(8))
        g = RealField(make_grid(8, 5.0), np.ones(8))
        with self.assertRaises(GridError):
            _ = f + g
        npt.assert_array_equal((2.0 * f - f).values, np.ones(8))

    def test_values_are_read_only(self):
        f = RealField(make_grid(8, 4.0), np.ones(8))
        with self.assertRaises(ValueError):
            f.values[0] = 3.0


class TestMultipliers(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = make_grid(128, 10.0)
        self.rng = np.random.default_rng(7)

    def test_order_zero_is_identity(self):
        npt.assert_array_equal(fractional_derivative_multiplier(self.grid, 0.0).symbol_values, np.ones(self.grid.n))

    def test_negative_order_rejected(self):
        with self.assertRaises(ValueError):
            fractional_derivative_multiplier(self.grid, -0.5)

    def test_second_order_on_sine_mode(self):
        k0 = 3
        omega = math.pi * k0 / self.grid.half_length
        f = field_from_function(self.grid, lambda x: np.sin(omega * x))
        out = fractional_derivative_multiplier(self.grid, 2.0).apply(f)
        npt.assert_allclose(out.values, omega ** 2 * f.values, atol=1e-10)

    def test_semigroup_split(self):
        grid = make_grid(512, 40.0)
        f = field_from_function(grid, lambda x: 1.0 / np.cosh(x))
        full = inner_product(fractional_derivative_multiplier(grid, 1.0).apply(f), f)
        half = fractional_derivative_multiplier(grid, 0.5).apply(f)
        self.assertGreater(full, 0.0)
        self.assertLessEqual(abs(full - inner_product(half, half)), 1e-10 * full)

    def test_hilbert_squares_to_minus_identity(self):
        j = hilbert_multiplier(self.grid)
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng)
            self.assertLessEqual((j.apply(j.apply(f)) + f).l2_norm(), 1e-10 * f.l2_norm())

    def test_fractional_orders_compose(self):
        for a, b in ((0.5, 0.5), (0.3, 1.2), (1.0, 1.0)):
            outer = fractional_derivative_multiplier(self.grid, a)
            product = outer.compose(fractional_derivative_multiplier(self.grid, b))
            direct = fractional_derivative_multiplier(self.grid, a + b)
            for _ in range(SAMPLES):
                f = random_band_limited_field(self.grid, self.rng)
                expected = direct.apply(f)
                with self.subTest(a=a, b=b):
                    self.assertLessEqual((product.apply(f) - expected).l2_norm(), 1e-10 * expected.l2_norm())

    def test_self_adjoint_and_skew_pairings(self):
        m = bessel_multiplier(self.grid, 0.7, 1.0)
        skew = (hilbert_multiplier(self.grid), derivative_multiplier(self.grid))
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng, mean_zero=False)
            g = random_band_limited_field(self.grid, self.rng, mean_zero=False)
            scale = f.l2_norm() * g.l2_norm()
            self.assertLessEqual(abs(inner_product(m.apply(f), g) - inner_product(f, m.apply(g))), 1e-10 * scale)
            for op in skew:
                pairing = inner_product(op.apply(f), g) + inner_product(f, op.apply(g))
                self.assertLessEqual(abs(pairing), 1e-9 * scale)

    def test_hilbert_on_cosine(self):
        omega = 2.0 * math.pi / self.grid.half_length
        f = field_from_function(self.grid, lambda x: np.cos(omega * x))
        out = hilbert_multiplier(self.grid).apply(f)
        npt.assert_allclose(out.values, -np.sin(omega * self.grid.points), atol=1e-12)

    def test_hilbert_kills_constants(self):
        out = hilbert_multiplier(self.grid).apply(RealField(self.grid, np.full(self.grid.n, 3.0)))
        npt.assert_allclose(out.values, 0.0, atol=1e-14)

    def test_hilbert_factorization(self):
        d = derivative_multiplier(self.grid)
        j = hilbert_multiplier(self.grid)
        abs_d = fractional_derivative_multiplier(self.grid, 1.0)
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng)
            df = d.apply(f)
            self.assertLessEqual((df - j.apply(abs_d.apply(f))).l2_norm(), 1e-10 * df.l2_norm())

    def test_antiderivative_inverts_derivative(self):
        d = derivative_multiplier(self.grid)
        anti = antiderivative_multiplier(self.grid)
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng)
            self.assertLessEqual((d.apply(anti.apply(f)) - f).l2_norm(), 1e-12 * f.l2_norm())

    def test_antiderivative_is_skew(self):
        anti = antiderivative_multiplier(self.grid)
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng)
            self.assertLessEqual(abs(inner_product(anti.apply(f), f)), 1e-12 * inner_product(f, f))

    def test_antiderivative_refuses_mean(self):
        f = random_band_limited_field(self.grid, self.rng, mean_zero=False)
        with self.assertRaises(NonIntegrableInputError):
            antiderivative_multiplier(self.grid).apply(f)

    def test_inverse_fractional(self):
        inverse = inverse_fractional_multiplier(self.grid, 0.5)
        forward = fractional_derivative_multiplier(self.grid, 0.5)
        f = random_band_limited_field(self.grid, self.rng)
        npt.assert_allclose(inverse.apply(forward.apply(f)).values, f.values, atol=1e-12)
        with self.assertRaises(NonIntegrableInputError):
            inverse.apply(RealField(self.grid, np.ones(self.grid.n)))

    def test_quarter_root(self):
        root = regularized_quarter_root_multiplier(self.grid, 0.0)
        npt.assert_allclose(root.symbol_values.real, fractional_derivative_multiplier(self.grid, 0.5).symbol_values.real)
        self.assertAlmostEqual(regularized_quarter_root_multiplier(self.grid, 0.01).symbol_values[0].real, 0.1)
        with self.assertRaises(ValueError):
            regularized_quarter_root_multiplier(self.grid, -1e-3)

    def test_adjointness_validated(self):
        with self.assertRaises(ValueError):
            Multiplier(self.grid, 1j * np.ones(self.grid.n), "bad")
        with self.assertRaises(ValueError):
            Multiplier(self.grid, np.ones(self.grid.n), "bad", adjointness=SKEW_ADJOINT)

    def test_compose(self):
        d = derivative_multiplier(self.grid)
        composed = d.compose(d)
        self.assertTrue(composed.is_self_adjoint)
        npt.assert_allclose(composed.symbol_values.real[1:self.grid.n // 2],
                            -(2 * np.pi * self.grid.wavenumbers[1:self.grid.n // 2]) ** 2)
        with self.assertRaises(ValueError):
            d.basis_diagonal()

    def test_parseval(self):
        for _ in range(SAMPLES):
            f = random_band_limited_field(self.grid, self.rng, mean_zero=False)
            g = random_band_limited_field(self.grid, self.rng, mean_zero=False)
            scale = f.l2_norm() * g.l2_norm()
            self.assertLessEqual(abs(inner_product(f, g) - parseval_pairing(f, g)), 1e-10 * scale)


class TestFourierBasis(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = make_grid(32, 5.0)
        self.rng = np.random.default_rng(11)

    def test_orthonormal(self):
        basis = fourier_basis(self.grid)
        npt.assert_allclose(basis.T @ basis, np.eye(self.grid.n), atol=1e-12)

    def test_analyze_synthesize(self):
        f = random_band_limited_field(self.grid, self.rng, modes=8, mean_zero=False)
        npt.assert_allclose(synthesize(self.grid, analyze(f)).values, f.values, atol=1e-12)

    def test_derivative_matrix_matches_multiplier(self):
        f = random_band_limited_field(self.grid, self.rng, modes=8)
        npt.assert_allclose(derivative_matrix(self.grid) @ analyze(f),
                            analyze(derivative_multiplier(self.grid).apply(f)), atol=1e-11)

    def test_hilbert_matrix_matches_multiplier(self):
        f = random_band_limited_field(self.grid, self.rng, modes=8)
        npt.assert_allclose(hilbert_matrix(self.grid) @ analyze(f),
                            analyze(hilbert_multiplier(self.grid).apply(f)), atol=1e-12)

    def test_interpolate_band_limited(self):
        omega = math.pi / self.grid.half_length
        f = field_from_function(self.grid, lambda x: np.cos(omega * x) + 0.5 * np.sin(3 * omega * x))
        x = np.array([-4.3, -0.1, 0.77, 2.5])
        npt.assert_allclose(interpolate(f, x), np.cos(omega * x) + 0.5 * np.sin(3 * omega * x), atol=1e-12)
        npt.assert_allclose(interpolate(f, self.grid.points), f.values, atol=1e-12)


class TestTransform(unittest.TestCase):

    def test_single_mode(self):
        grid = make_grid(16, 8.0)
        # x starts at -half_length, so the second cosine mode keeps its sign at the first sample
        f = field_from_function(grid, lambda x: np.cos(2.0 * np.pi * x / 8.0))
        coefficients = transform(f)
        expected = np.zeros(16)
        expected[[2, 14]] = 8.0
        npt.assert_allclose(coefficients, expected, atol=1e-12)
        npt.assert_allclose(inverse_transform(grid, coefficients).values, f.values, atol=1e-14)


class TestPaddedGrids(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = make_grid(64, 8.0)
        self.rng = np.random.default_rng(19)

    def test_refine_samples_the_interpolant(self):
        f = random_band_limited_field(self.grid, self.rng, modes=12, mean_zero=False)
        fine = refine(f, 3)
        points = -self.grid.half_length + self.grid.spacing / 3.0 * np.arange(3 * self.grid.n)
        npt.assert_allclose(fine, interpolate(f, points), atol=1e-11)
        npt.assert_allclose(coarsen(self.grid, fine).values, f.values, atol=1e-12)

    def test_coarsen_projects_products(self):
        omega = math.pi / self.grid.half_length
        f = field_from_function(self.grid, lambda x: np.cos(20 * omega * x))
        # cos² = ½ + ½cos(40ωx); the second mode lies above the band and is dropped, not aliased
        square = coarsen(self.grid, refine(f, 2) ** 2)
        npt.assert_allclose(square.values, 0.5, atol=1e-12)

    def test_rejects_bad_sizes(self):
        f = random_band_limited_field(self.grid, self.rng)
        with self.assertRaises(GridError):
            refine(f, 0)
        with self.assertRaises(GridError):
            coarsen(self.grid, np.zeros(self.grid.n + 1))

    def test_spectral_tail(self):
        smooth = field_from_function(self.grid, lambda x: np.exp(-x ** 2))
        self.assertLess(spectral_tail(smooth), 1e-6)
        alternating = RealField(self.grid, (-1.0) ** np.arange(self.grid.n))
        self.assertAlmostEqual(spectral_tail(alternating), 1.0)
        self.assertEqual(spectral_tail(RealField(self.grid, np.zeros(self.grid.n))), 0.0)
        with self.assertRaises(ValueError):
            spectral_tail(smooth, band=1.0)


if __name__ == "__main__":
    unittest.main()
