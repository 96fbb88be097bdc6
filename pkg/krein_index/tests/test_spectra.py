import math
import unittest

import numpy as np
import numpy.testing as npt

from krein_index.errors import FredholmError, ResolutionError
from krein_index.operators import DenseMatrix, bbm_linearization, bbm_symmetrize, kdv_linearization, sandwich
from krein_index.spectra import (EigenClass, HamiltonianKind, KreinTolerances, bbm_bracket, bbm_energy,
                                 bbm_generalized_spectrum, bbm_slope, bbm_slope_closed_form, check_quadruple_symmetry,
                                 classify_krein, classify_spectrum, constrained_quantity, deflate_kernel,
                                 generalized_kernel_dim, hamiltonian_spectrum, sandwiched_constrained_quantity,
                                 sandwiched_hamiltonian_eigenvalues, sandwiched_kernel_hint, slope_analytic,
                                 spectrum_distance, symmetric_spectrum)
from krein_index.spectral_core import analyze, derivative_multiplier, make_grid
from krein_index.waves import bbm_wave, sech_profile, solve_ground_state

# pylint: disable=missing-class-docstring,missing-function-docstring


def exact_tols(tol: float = 1e-8) -> KreinTolerances:
    return KreinTolerances(zero_tol=tol, re_tol=tol, im_tol=tol, sig_tol=tol)


class TestSymmetricSpectrum(unittest.TestCase):

    def test_counts(self):
        report = symmetric_spectrum(DenseMatrix("diag", np.diag([3.0, -1.0, 0.0, 1.0, -2.0])))
        npt.assert_allclose(report.eigenvalues, [-2.0, -1.0, 0.0, 1.0, 3.0], atol=1e-14)
        self.assertEqual(report.negative_count, 2)
        self.assertEqual(report.kernel_dim, 1)
        self.assertAlmostEqual(report.zero_tol, 3e-8)

    def test_explicit_zero_tol(self):
        report = symmetric_spectrum(DenseMatrix("diag", np.diag([-1e-6, 1.0])), zero_tol=1e-5)
        self.assertEqual(report.negative_count, 0)
        self.assertEqual(report.kernel_dim, 1)

    def test_hinted_kernel_is_not_counted_negative(self):
        matrix = DenseMatrix("shifted", np.diag([-2.0, -1e-3, 1.0]))
        self.assertEqual(symmetric_spectrum(matrix).negative_count, 2)
        report = symmetric_spectrum(matrix, kernel_hint=np.array([0.0, 1.0, 0.0]))
        self.assertEqual(report.negative_count, 1)
        self.assertEqual(report.kernel_dim, 1)
        self.assertAlmostEqual(report.kernel_eigenvalues[0], -1e-3, places=14)
        self.assertAlmostEqual(report.kernel_overlap, 1.0)

    def test_hint_picks_direction_by_overlap(self):
        matrix = DenseMatrix("lifted", np.diag([-1.0, 0.3, 2.0]))
        hint = np.array([0.05, 1.0, 0.02])
        report = symmetric_spectrum(matrix, kernel_hint=hint)
        self.assertEqual((report.negative_count, report.kernel_dim), (1, 1))
        self.assertAlmostEqual(report.kernel_eigenvalues[0], 0.3, places=14)

    def test_weak_overlap_warns(self):
        matrix = DenseMatrix("blurred", np.diag([-1.0, 0.0, 2.0]))
        with self.assertLogs("krein_index.spectra", level="WARNING"):
            report = symmetric_spectrum(matrix, kernel_hint=np.array([0.0, 1.0, 0.3]))
        self.assertEqual(report.kernel_dim, 1)

    def test_unresolved_kernel_raises(self):
        matrix = DenseMatrix("smeared", np.diag([1.0, 2.0, 3.0, 4.0, 5.0]))
        with self.assertRaises(ResolutionError):
            symmetric_spectrum(matrix, kernel_hint=np.ones(5))
        with self.assertRaises(ValueError):
            symmetric_spectrum(matrix, kernel_hint=np.zeros(5))

    def test_deflation_zeroes_kernel_eigenvalue(self):
        rotation = np.linalg.qr(np.random.default_rng(5).standard_normal((4, 4)))[0]
        entries = rotation @ np.diag([-1.0, 2e-4, 1.0, 3.0]) @ rotation.T
        matrix = DenseMatrix("rotated", 0.5 * (entries + entries.T))
        report = symmetric_spectrum(matrix, kernel_hint=rotation[:, 1])
        deflated = deflate_kernel(matrix, report)
        npt.assert_allclose(np.linalg.eigvalsh(deflated.entries), [-1.0, 0.0, 1.0, 3.0], atol=1e-12)
        npt.assert_allclose(deflated.entries @ rotation[:, 1], 0.0, atol=1e-12)
        with self.assertRaises(ValueError):
            deflate_kernel(DenseMatrix("other", matrix.entries), report)


class TestKreinClassification(unittest.TestCase):

    def test_real_and_complex(self):
        eigenvalues = np.array([2.0, -2.0, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j, 0.0])
        result = classify_krein(eigenvalues, np.eye(7, dtype=complex), np.eye(7), exact_tols())
        self.assertEqual(result.k_r, 1)
        self.assertEqual(result.k_c, 2)
        self.assertEqual(result.k_i_minus, 0)
        self.assertEqual(result.k_ham, 3)
        self.assertEqual(result.count(EigenClass.REAL_NEG), 1)
        self.assertEqual(result.count(EigenClass.COMPLEX), 4)
        self.assertEqual(result.count(EigenClass.ZERO), 1)

    def test_negative_signature_pair(self):
        eigenvalues = np.array([1j, -1j])
        result = classify_krein(eigenvalues, np.eye(2, dtype=complex), -np.eye(2), exact_tols())
        self.assertEqual(result.k_i_minus, 2)
        self.assertEqual(result.labels, (EigenClass.IMAG_NEG_SIG, EigenClass.IMAG_NEG_SIG))
        npt.assert_allclose(result.form_values, [-1.0, -1.0])

    def test_positive_signature_and_indeterminate(self):
        eigenvalues = np.array([1j, -1j, 2j, -2j])
        result = classify_krein(eigenvalues, np.eye(4, dtype=complex), np.diag([1.0, 1.0, 0.0, 0.0]), exact_tols())
        self.assertEqual(result.k_ham, 0)
        self.assertEqual(result.count(EigenClass.IMAG_POS_SIG), 2)
        self.assertEqual(result.count(EigenClass.INDET), 2)
        self.assertEqual(len(result.indeterminate), 2)

    def test_cluster_labels_follow_their_own_eigenvector(self):
        # eigh sorts the form eigenvalues ascending, opposite to the member order here
        eigenvalues = np.array([1e-13 + 1j, -1e-13 + 1j])
        tols = KreinTolerances(zero_tol=1e-6, re_tol=1e-8, im_tol=1e-6, sig_tol=1e-8)
        result = classify_krein(eigenvalues, np.eye(2, dtype=complex), np.diag([1.0, -1.0]), tols)
        npt.assert_allclose(result.form_values, [1.0, -1.0])
        self.assertEqual(result.labels, (EigenClass.IMAG_POS_SIG, EigenClass.IMAG_NEG_SIG))
        self.assertEqual(result.k_i_minus, 2)

    def test_frame_export(self):
        eigenvalues = np.array([1j, -1j, 0.5, -0.5])
        result = classify_krein(eigenvalues, np.eye(4, dtype=complex), np.eye(4), exact_tols())
        frame = result.to_frame()
        self.assertEqual(list(frame.columns), ["re", "im", "class", "krein_form_value"])
        self.assertEqual(list(frame["class"]), ["REAL_NEG", "IMAG_POS_SIG", "IMAG_POS_SIG", "REAL_POS"])
        self.assertTrue(math.isnan(frame["krein_form_value"].iloc[0]))


class TestSpectrumGeometry(unittest.TestCase):

    def test_distance(self):
        a = np.array([1.0, -1.0, 2j])
        self.assertEqual(spectrum_distance(a, a[::-1]), 0.0)
        self.assertAlmostEqual(spectrum_distance(a, np.array([1.0, -1.0, 2.2j])), 0.2 / 2.2)

    def test_quadruple_symmetry(self):
        self.assertEqual(check_quadruple_symmetry(np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])), 0.0)
        self.assertGreater(check_quadruple_symmetry(np.array([1.0, 2.0])), 0.1)


class TestGkdvSpectra(unittest.TestCase):
    """The mKdV-type wave √2 sech x (s = 2, p = 2, c = 1), stable with ⟨U, U⟩ = 4"""

    @classmethod
    def setUpClass(cls) -> None:
        cls.grid = make_grid(256, 20.0)
        cls.U = sech_profile(cls.grid, 2.0, 1.0)
        cls.L = kdv_linearization(cls.U)
        cls.A = cls.L.assemble()
        cls.dU = derivative_multiplier(cls.grid).apply(cls.U.field)
        cls.report = symmetric_spectrum(cls.A, kernel_hint=analyze(cls.dU))

    def test_negative_count(self):
        report = self.report
        self.assertEqual(report.negative_count, 1)
        self.assertEqual(report.kernel_dim, 1)
        # L = -∂² + 1 - 6 sech² has eigenvalues -3 and 0 below its continuum
        self.assertAlmostEqual(report.eigenvalues[0], -3.0, places=8)

    def test_kernel_is_translation(self):
        kernel = self.report.kernel_fields()[0]
        overlap = abs(np.dot(kernel.values, self.dU.values)) / (np.linalg.norm(kernel.values) *
                                                               np.linalg.norm(self.dU.values))
        self.assertAlmostEqual(overlap, 1.0, places=8)

    def test_kernel_eigenvalue_is_numerically_zero(self):
        scale = float(np.max(np.abs(self.report.eigenvalues)))
        self.assertLessEqual(abs(self.report.kernel_eigenvalues[0]), 1e-9 * scale)
        self.assertGreater(self.report.kernel_overlap, 0.999999)

    def test_deflated_spectrum_has_no_split_kernel(self):
        spectrum = hamiltonian_spectrum(deflate_kernel(self.A, self.report))
        classification = classify_spectrum(spectrum)
        self.assertEqual((classification.k_r, classification.k_c), (0, 0))
        self.assertEqual(classification.count(EigenClass.ZERO), 2)

    def test_constrained_quantity(self):
        self.assertAlmostEqual(self.U.mass(), 4.0, places=10)
        slope = slope_analytic(2.0, 2.0, 1.0, self.U.mass())
        self.assertAlmostEqual(slope, 2.0, places=10)
        d = constrained_quantity(self.A, self.dU, kernel_hint=self.dU)
        self.assertAlmostEqual(d, -0.5 * slope, places=6)

    def test_sandwiched_constrained_quantity(self):
        d = constrained_quantity(self.A, self.dU, kernel_hint=self.dU)
        regularized = sandwiched_constrained_quantity(self.L, self.dU, 1e-3, kernel_hint=self.dU)
        self.assertLessEqual(abs(regularized - d), 1e-3 * abs(d))
        self.assertLess(sandwiched_constrained_quantity(self.L, self.dU, 0.0), 0.0)

    def test_fredholm_violation(self):
        # ψ₀ = U is even; its antiderivative is odd and overlaps the odd kernel ∂U
        with self.assertRaises(FredholmError):
            constrained_quantity(self.A, self.U.field - self.U.field.mean(), kernel_hint=self.dU)

    def test_hamiltonian_spectrum(self):
        spectrum = hamiltonian_spectrum(self.A)
        self.assertEqual(spectrum.eigenvalues.size, self.grid.n - 2)
        self.assertLessEqual(check_quadruple_symmetry(spectrum.eigenvalues), 1e-6)
        classification = classify_spectrum(spectrum)
        self.assertEqual(classification.k_r, 0)
        self.assertEqual(classification.k_c, 0)
        self.assertEqual(classification.k_i_minus, 0)
        self.assertEqual(classification.count(EigenClass.ZERO), 2)

    def test_generalized_kernel(self):
        self.assertEqual(generalized_kernel_dim(self.L), 2)

    def test_sandwiched_spectrum_matches(self):
        spectrum = hamiltonian_spectrum(self.A)
        sandwiched = sandwiched_hamiltonian_eigenvalues(sandwich(self.L, 0.0))
        self.assertLessEqual(spectrum_distance(spectrum.eigenvalues, sandwiched), 1e-6)

    def test_sandwich_preserves_negative_count(self):
        for eps in (1e-1, 1e-2, 1e-3):
            with self.subTest(eps=eps):
                report = symmetric_spectrum(sandwich(self.L, eps), kernel_hint=sandwiched_kernel_hint(self.dU, eps))
                self.assertEqual(report.negative_count, 1)


class TestBbmSlope(unittest.TestCase):

    def test_bracket_at_s_one(self):
        # s = 1: c(2c - p)N + 2c(c-1)G
        self.assertAlmostEqual(bbm_bracket(1.0, 2.0, 2.0, 3.0, 5.0), 2.0 * 2.0 * 3.0 + 2.0 * 2.0 * 1.0 * 5.0)

    def test_closed_form_matches_energy_derivative(self):
        s, p, c = 1.5, 1.0, 1.5
        N, G = 2.0, 3.0
        alpha, beta = 2.0 / p - 1.0 / s, 1.0 / s - 1.0

        def energy(speed):
            return (speed - 1.0) ** alpha * speed ** beta * (speed * N + (speed - 1.0) * G)

        h = 1e-5
        fd = (energy(c + h) - energy(c - h)) / (2 * h)
        self.assertAlmostEqual(bbm_slope_closed_form(s, p, c, N, G), fd, places=6)

    def test_unstable_near_one_for_large_power(self):
        self.assertLess(bbm_bracket(2.0, 6.0, 1.05, 1.0, 1.0), 0.0)
        self.assertGreater(bbm_bracket(2.0, 6.0, 3.0, 1.0, 1.0), 0.0)

    def test_wave_family(self):
        grid = make_grid(256, 20.0)
        Q = solve_ground_state(2.0, 2.0, grid)
        slope = bbm_slope(lambda speed: bbm_wave(Q, speed), 2.0, 1e-3, Q)
        self.assertTrue(slope.consistent)
        self.assertGreater(slope.bracket, 0.0)
        self.assertGreater(slope.finite_difference, 0.0)
        self.assertGreater(bbm_energy(bbm_wave(Q, 2.0)), 0.0)
        with self.assertRaises(ValueError):
            bbm_slope(lambda speed: bbm_wave(Q, speed), 1.0005, 1e-3, Q)


class TestBbmSpectrum(unittest.TestCase):

    def test_symmetrized_matches_generalized_problem(self):
        Q = solve_ground_state(2.0, 2.0, make_grid(256, 20.0))
        L0 = bbm_linearization(bbm_wave(Q, 2.0))
        spectrum = hamiltonian_spectrum(bbm_symmetrize(L0), HamiltonianKind.BBM)
        self.assertLessEqual(spectrum_distance(bbm_generalized_spectrum(L0), spectrum.eigenvalues), 1e-6)
        self.assertEqual(classify_spectrum(spectrum).k_ham, 0)


if __name__ == "__main__":
    unittest.main()
