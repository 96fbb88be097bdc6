"""Stability verdicts: the index formula evaluated for fKdV/fBBM waves and cross-checked against the spectrum"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from json_encoder.json import json_encoder

from krein_index.errors import ExistenceWindowError, KreinIndexError, TheoryConsistencyError
from krein_index.operators import (DenseMatrix, LinOperator, bbm_linearization, bbm_symmetrize, conjugate,
                                   kdv_linearization, sandwich, schrodinger_operator)
from krein_index.spectra import (HamiltonianKind, SpectralReport, bbm_energy, bbm_slope, check_quadruple_symmetry,
                                 classify_spectrum, constrained_quantity, deflate_kernel, generalized_kernel_dim,
                                 hamiltonian_spectrum, sandwiched_constrained_quantity,
                                 sandwiched_hamiltonian_eigenvalues, sandwiched_kernel_hint, slope_analytic,
                                 spectrum_distance, symmetric_spectrum)
from krein_index.spectral_core import (RealField, SpectralGrid, analyze, antiderivative_multiplier,
                                       bessel_multiplier, derivative_multiplier, field_from_function,
                                       fractional_derivative_multiplier, hilbert_multiplier, inner_product, make_grid,
                                       parseval_pairing, random_band_limited_field,
                                       regularized_quarter_root_multiplier)
from krein_index.waves import (SolverOptions, WaveModel, WaveProfile, bbm_wave, bo_profile, check_existence_window,
                               kdv_wave, solve_ground_state)

logger = logging.getLogger(__name__)

DEGENERACY_REL = 1e-3
"""|slope| <= DEGENERACY_REL·mass/c is treated as the borderline p = 2s family"""
EPSILONS = (1e-1, 1e-2, 1e-3, 0.0)


class Verdict(str, Enum):
    STABLE = "STABLE"
    UNSTABLE = "UNSTABLE"
    DEGENERATE = "DEGENERATE"


@dataclass(frozen=True)
class NumericsConfig:
    """Grid and solver settings of one verdict run"""
    n: int
    half_length: float
    solver: SolverOptions
    zero_fraction: float = 0.05
    slope_step: float = 1e-3
    """BBM finite-difference step, relative to c - 1"""

    @classmethod
    def for_dispersion(cls, s: float, **overrides) -> "NumericsConfig":
        """ℓ = 40, n = 1024 for s = 2; the algebraic tails of s < 2 waves need ℓ = 200, n = 2048.

        Below s = 1 the wave's spectrum reaches further out, so n doubles and the box shrinks to ℓ = 100.
        """
        if s == 2:
            defaults = {"n": 1024, "half_length": 40.0}
        elif s >= 1:
            defaults = {"n": 2048, "half_length": 200.0}
        else:
            defaults = {"n": 4096, "half_length": 100.0}
        defaults["solver"] = SolverOptions.for_dispersion(s, tol=1e-10, max_iters=1000)
        return cls(**{**defaults, **overrides})

    def grid(self) -> SpectralGrid:
        return make_grid(self.n, self.half_length)

    def to_dict(self) -> dict:
        return {"n": self.n, "half_length": self.half_length, "solver": self.solver.to_dict(),
                "zero_fraction": self.zero_fraction, "slope_step": self.slope_step}


@dataclass
class KreinIndexResult:
    """Index formula and direct spectral counts for one wave"""
    s: float
    p: float
    c: float
    model: WaveModel
    n_L: int = None
    d: float = None
    """Constrained quantity ⟨L⁻¹∂⁻¹ψ₀, ∂⁻¹ψ₀⟩"""
    slope: float = None
    """∂_c⟨U_c, U_c⟩ for fKdV, ∂_c⟨(I+M)U_c, U_c⟩ for fBBM"""
    K_formula: Optional[int] = None
    k_r: int = None
    k_c: int = None
    k_i_minus: int = None
    K_direct: int = None
    verdict: Verdict = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def k_ham(self) -> int:
        """K_Ham as reported: the formula's value, or the direct count where the formula degenerates"""
        return self.K_formula if self.K_formula is not None else self.K_direct

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "p": self.p,
            "c": self.c,
            "model": self.model.value,
            "n_L": self.n_L,
            "d": self.d,
            "slope": self.slope,
            "K_formula": self.K_formula,
            "k_r": self.k_r,
            "k_c": self.k_c,
            "k_i_minus": self.k_i_minus,
            "K_direct": self.K_direct,
            "verdict": self.verdict.value if self.verdict else None,
            "diagnostics": self.diagnostics,
        }

    def to_row(self) -> dict:
        """Flat sweep-CSV row"""
        return {
            "s": self.s, "p": self.p, "c": self.c, "model": self.model.value, "n_L": self.n_L,
            "slope": self.slope, "K_formula": self.K_formula, "k_r": self.k_r, "k_c": self.k_c,
            "k_i_minus": self.k_i_minus, "verdict": self.verdict.value if self.verdict else None,
        }


@json_encoder.register(KreinIndexResult)
def encode_krein_index_result(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


@contextmanager
def _stage(name: str):
    """Tag toolkit errors raised inside the block with the pipeline stage"""
    try:
        yield
    except KreinIndexError as err:
        if err.stage is None:
            err.stage = name
        raise


def classify_index(K: int, k_r: int, k_c: int) -> tuple[Verdict, Optional[str]]:
    """STABLE for K = 0, UNSTABLE for odd K; even K > 0 only bounds the instability"""
    if K == 0:
        return Verdict.STABLE, None
    if K % 2 == 1:
        return Verdict.UNSTABLE, None
    if k_r + k_c > 0:
        return Verdict.UNSTABLE, f"K_Ham={K} is even; unstable eigenvalues found directly"
    return Verdict.STABLE, f"K_Ham={K} is even with no real or complex eigenvalues: negative Krein signature only"


def _finish(result: KreinIndexResult, mass: float, psi_matrix: DenseMatrix, kernel: SpectralReport,
            numerics: NumericsConfig, kind: HamiltonianKind) -> KreinIndexResult:
    """Shared tail of the pipeline: degeneracy, Hamiltonian spectrum, counts and verdict.

    `kernel` is the spectral report of `psi_matrix`; its kernel eigenvalues are deflated to 0 before ∂_x A is formed.
    """
    degenerate = abs(result.slope) <= DEGENERACY_REL * mass / result.c
    if degenerate:
        result.diagnostics.append(
            f"|slope| = {abs(result.slope):.3e} within the degeneracy band {DEGENERACY_REL:g}·mass/c; "
            "the generalized kernel is larger than two and the index formula does not apply")
    else:
        result.K_formula = result.n_L - (1 if result.slope > 0 else 0)
        from_d = result.n_L - (1 if result.d < 0 else 0)
        if from_d != result.K_formula:
            raise TheoryConsistencyError(
                f"slope {result.slope:.6e} and constrained quantity {result.d:.6e} disagree in sign")

    with _stage("hamiltonian"):
        spectrum = hamiltonian_spectrum(deflate_kernel(psi_matrix, kernel), kind, numerics.zero_fraction)
        asymmetry = check_quadruple_symmetry(spectrum.eigenvalues)
        if asymmetry > 1e-6:
            result.diagnostics.append(f"Hamiltonian spectrum breaks λ ↦ -λ, conj(λ) symmetry by {asymmetry:.2e}")

    with _stage("classify"):
        classification = classify_spectrum(spectrum)
        result.k_r = classification.k_r
        result.k_c = classification.k_c
        result.k_i_minus = classification.k_i_minus
        result.K_direct = classification.k_ham
        if classification.indeterminate:
            result.diagnostics.append(f"{len(classification.indeterminate)} eigenvalues with indeterminate signature")
        if degenerate:
            result.verdict = Verdict.DEGENERATE
            return result
        if result.K_formula != result.K_direct:
            raise TheoryConsistencyError(
                f"index formula gives K_Ham={result.K_formula} but the spectrum has k_r={result.k_r}, "
                f"k_c={result.k_c}, k_i⁻={result.k_i_minus}")

    result.verdict, note = classify_index(result.K_formula, result.k_r, result.k_c)
    if note:
        result.diagnostics.append(note)
    return result


def kdv_verdict(s: float, p: float, c: float, numerics: NumericsConfig = None) -> KreinIndexResult:
    """Hamiltonian-Krein index of the fKdV wave at (s, p, c), by formula and by direct spectrum.

    Raises TheoryConsistencyError when the two disagree; other failures carry the stage they came from.
    """
    check_existence_window(s, p)
    if c <= 0:
        raise ExistenceWindowError(f"fKdV speed must be positive, got {c}")
    numerics = numerics or NumericsConfig.for_dispersion(s)
    result = KreinIndexResult(s=s, p=p, c=c, model=WaveModel.FKDV)
    logger.info("fKdV verdict s=%g p=%g c=%g", s, p, c)

    with _stage("solve"):
        Q = solve_ground_state(s, p, numerics.grid(), numerics.solver)
    with _stage("scale"):
        U = kdv_wave(Q, c)
        result.diagnostics.extend(U.warnings)
    with _stage("linearize"):
        L = kdv_linearization(U)
        A = L.assemble()
    with _stage("counts"):
        translation = derivative_multiplier(U.grid).apply(U.field)
        report = symmetric_spectrum(A, kernel_hint=analyze(translation))
        result.n_L = report.negative_count
        if report.kernel_dim != 1:
            result.diagnostics.append(f"kernel of L has dimension {report.kernel_dim}, expected 1")
    with _stage("constraint"):
        result.d = constrained_quantity(A, translation, report.zero_tol, kernel_hint=translation)
    with _stage("slope"):
        result.slope = slope_analytic(s, p, c, Q.mass())
        if abs(result.slope) > DEGENERACY_REL * U.mass() / c:
            mismatch = abs(-2.0 * result.d - result.slope) / abs(result.slope)
            if mismatch > 1e-3:
                result.diagnostics.append(f"-2d differs from the scaling-law slope by {100 * mismatch:.2f}%")

    return _finish(result, U.mass(), A, report, numerics, HamiltonianKind.KDV)


def bbm_verdict(s: float, p: float, c: float, numerics: NumericsConfig = None) -> KreinIndexResult:
    """Index of the fBBM wave at (s, p, c > 1) through the symmetrized problem (I+M)^{-1/2} L₀ (I+M)^{-1/2}"""
    check_existence_window(s, p)
    if c <= 1:
        raise ExistenceWindowError(f"fBBM waves need speed c > 1, got {c}")
    numerics = numerics or NumericsConfig.for_dispersion(s)
    result = KreinIndexResult(s=s, p=p, c=c, model=WaveModel.FBBM)
    logger.info("fBBM verdict s=%g p=%g c=%g", s, p, c)

    with _stage("solve"):
        Q = solve_ground_state(s, p, numerics.grid(), numerics.solver)
    with _stage("scale"):
        U = bbm_wave(Q, c)
        result.diagnostics.extend(U.warnings)
    with _stage("linearize"):
        L0 = bbm_linearization(U)
        A0 = L0.assemble()
        symmetrized = bbm_symmetrize(L0)
    with _stage("counts"):
        translation = derivative_multiplier(U.grid).apply(U.field)
        psi0 = bessel_multiplier(U.grid, s, 0.5).apply(translation)
        report = symmetric_spectrum(A0, kernel_hint=analyze(translation))
        result.n_L = report.negative_count
        sym_report = symmetric_spectrum(symmetrized, kernel_hint=analyze(psi0))
        if sym_report.negative_count != result.n_L:
            raise TheoryConsistencyError(
                f"n of the symmetrized operator is {sym_report.negative_count}, n(L0) is {result.n_L}")
    with _stage("constraint"):
        result.d = constrained_quantity(symmetrized, psi0, sym_report.zero_tol, kernel_hint=psi0)
    with _stage("slope"):
        dc = numerics.slope_step * (c - 1.0)
        slope = bbm_slope(lambda speed: bbm_wave(Q, speed), c, dc, Q)
        result.slope = slope.finite_difference
        if not slope.consistent:
            result.diagnostics.append(
                f"finite-difference slope {slope.finite_difference:.6e} vs closed form {slope.closed_form:.6e}")
        if abs(result.slope) > DEGENERACY_REL * bbm_energy(U) / c and np.sign(slope.bracket) != np.sign(result.slope):
            raise TheoryConsistencyError(
                f"closed-form bracket {slope.bracket:.6e} and finite-difference slope {result.slope:.6e} "
                "disagree in sign")

    return _finish(result, bbm_energy(U), symmetrized, sym_report, numerics, HamiltonianKind.BBM)


class SweepAxis(str, Enum):
    P = "p"
    C = "c"
    S = "s"


@dataclass
class SweepPoint:
    value: float
    result: Optional[KreinIndexResult] = None
    error: Optional[str] = None
    error_type: Optional[str] = None

    @property
    def status(self) -> str:
        return "ok" if self.error is None else f"error:{self.error_type}"

    def to_row(self, axis: SweepAxis, fixed: dict, model: WaveModel) -> dict:
        if self.result is not None:
            row = self.result.to_row()
        else:
            params = {**fixed, axis.value: self.value}
            row = {"s": params["s"], "p": params["p"], "c": params["c"], "model": model.value, "n_L": None,
                   "slope": None, "K_formula": None, "k_r": None, "k_c": None, "k_i_minus": None, "verdict": None}
        row["status"] = self.status
        return row


@dataclass
class SweepResult:
    axis: SweepAxis
    model: WaveModel
    fixed: dict
    points: list[SweepPoint]

    @property
    def results(self) -> list[KreinIndexResult]:
        return [pt.result for pt in self.points if pt.result is not None]

    @property
    def brackets(self) -> list[tuple[float, float]]:
        """Intervals between consecutive decided points whose verdicts differ"""
        decided = [pt for pt in self.points
                   if pt.result is not None and pt.result.verdict in (Verdict.STABLE, Verdict.UNSTABLE)]
        return [(a.value, b.value) for a, b in zip(decided, decided[1:]) if a.result.verdict != b.result.verdict]

    @property
    def bracket(self) -> Optional[tuple[float, float]]:
        brackets = self.brackets
        return brackets[0] if brackets else None

    def summary_line(self) -> str:
        if self.bracket is None:
            return "no flip"
        lo, hi = self.bracket
        return f"flip in ({lo:g}, {hi:g})"

    def to_frame(self) -> pd.DataFrame:
        columns = ["s", "p", "c", "model", "n_L", "slope", "K_formula", "k_r", "k_c", "k_i_minus", "verdict", "status"]
        rows = [pt.to_row(self.axis, self.fixed, self.model) for pt in self.points]
        return pd.DataFrame(rows, columns=columns)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.value,
            "model": self.model.value,
            "fixed": self.fixed,
            "bracket": list(self.bracket) if self.bracket else None,
            "points": [{"value": pt.value, "status": pt.status, "error": pt.error, "result": pt.result}
                       for pt in self.points],
        }


@json_encoder.register(SweepResult)
def encode_sweep_result(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def _run_point(args: tuple) -> SweepPoint:
    axis, value, fixed, model, numerics = args
    params = {**fixed, axis.value: value}
    point_numerics = numerics or NumericsConfig.for_dispersion(params["s"])
    verdict_fn = bbm_verdict if model == WaveModel.FBBM else kdv_verdict
    try:
        return SweepPoint(value, result=verdict_fn(params["s"], params["p"], params["c"], point_numerics))
    except KreinIndexError as err:
        logger.warning("Sweep point %s=%g failed: %s", axis.value, value, err)
        return SweepPoint(value, error=str(err), error_type=type(err).__name__)


def sweep(axis: SweepAxis, start: float, stop: float, steps: int, fixed: dict, model: WaveModel = WaveModel.FKDV,
          numerics: NumericsConfig = None, max_workers: int = None) -> SweepResult:
    """Run the verdict pipeline on `steps` evenly spaced values of one parameter.

    Args:
        axis: parameter to vary
        start: first value
        stop: last value (inclusive)
        steps: number of points; 0 gives an empty sweep
        fixed: values of s, p and c; the swept one is ignored
        model: FKDV or FBBM
        numerics: grid/solver settings; None picks the per-dispersion defaults at every point
        max_workers: run points in a process pool of this size when > 1
    """
    axis = SweepAxis(axis)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    fixed = {key: fixed.get(key) for key in ("s", "p", "c")}
    values = [float(v) for v in np.linspace(start, stop, steps)]
    tasks = [(axis, value, fixed, model, numerics) for value in values]
    logger.info("Sweeping %s over %d points in [%g, %g]", axis.value, steps, start, stop)

    if max_workers and max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as executor:
            points = list(executor.map(_run_point, tasks))
    else:
        points = [_run_point(task) for task in tasks]
    return SweepResult(axis, model, fixed, points)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class SelfCheckReport:
    case: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))

    def table(self) -> str:
        width = max(len(check.name) for check in self.checks) if self.checks else 0
        lines = [f"{check.name.ljust(width)}  {'PASS' if check.passed else 'FAIL'}  {check.detail}"
                 for check in self.checks]
        lines.append(f"{self.case}: {'all checks passed' if self.passed else 'FAILED'}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"case": self.case, "passed": self.passed, "checks": [check.to_dict() for check in self.checks]}


@json_encoder.register(SelfCheckReport)
def encode_self_check_report(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


@dataclass(frozen=True)
class _CaseSetup:
    operator: LinOperator
    psi0: Optional[RealField]
    negative_count: int
    generalized_kernel: int
    slope: Optional[float] = None


def _gkdv_case(p: float, numerics: NumericsConfig) -> _CaseSetup:
    Q = solve_ground_state(2.0, p, numerics.grid(), numerics.solver)
    U = kdv_wave(Q, 1.0)
    psi0 = derivative_multiplier(U.grid).apply(U.field)
    return _CaseSetup(kdv_linearization(U), psi0, 1, 2, slope_analytic(2.0, p, 1.0, Q.mass()))


def _schrodinger_case(numerics: NumericsConfig) -> _CaseSetup:
    grid = numerics.grid()
    V = field_from_function(grid, lambda x: 2.0 / np.cosh(x) ** 2)
    return _CaseSetup(schrodinger_operator(V, 0.5), None, 1, 0)


def _bo_case(numerics: NumericsConfig) -> _CaseSetup:
    U = bo_profile(numerics.grid(), 1.0)
    psi0 = derivative_multiplier(U.grid).apply(U.field)
    # ⟨U_c, U_c⟩ = 8πc on the line
    return _CaseSetup(kdv_linearization(U), psi0, 1, 2, 8.0 * math.pi)


SELF_CHECK_CASES = {
    "gkdv-p2": (2.0, lambda numerics: _gkdv_case(2.0, numerics)),
    "gkdv-p5": (2.0, lambda numerics: _gkdv_case(5.0, numerics)),
    "schrodinger-sech2": (2.0, _schrodinger_case),
    "bo": (1.0, _bo_case),
}


def _check_identities(report: SelfCheckReport, grid: SpectralGrid, samples: int = 20) -> None:
    rng = np.random.default_rng(20240613)
    d = derivative_multiplier(grid)
    j = hilbert_multiplier(grid)
    abs_d = fractional_derivative_multiplier(grid, 1.0)
    anti = antiderivative_multiplier(grid)
    worst = {"parseval": 0.0, "hilbert factorization": 0.0, "J² = -I": 0.0, "∂⁻¹ skew": 0.0}
    for _ in range(samples):
        f = random_band_limited_field(grid, rng)
        g = random_band_limited_field(grid, rng)
        norm_sq = inner_product(f, f)
        worst["parseval"] = max(worst["parseval"], abs(inner_product(f, g) - parseval_pairing(f, g)) /
                                math.sqrt(norm_sq * inner_product(g, g)))
        df = d.apply(f)
        worst["hilbert factorization"] = max(worst["hilbert factorization"],
                                             (df - j.apply(abs_d.apply(f))).l2_norm() / df.l2_norm())
        worst["J² = -I"] = max(worst["J² = -I"], (j.apply(j.apply(f)) + f).l2_norm() / f.l2_norm())
        worst["∂⁻¹ skew"] = max(worst["∂⁻¹ skew"], abs(inner_product(anti.apply(f), f)) / norm_sq)
    for name, value in worst.items():
        report.add(name, value <= 1e-10, f"max relative error {value:.2e} over {samples} random fields")


def self_check(case: str, numerics: NumericsConfig = None) -> SelfCheckReport:
    """Theory-consistency assertions on a named case; failures are report entries, not exceptions"""
    if case not in SELF_CHECK_CASES:
        raise KeyError(f"unknown self-check case {case!r}; known: {', '.join(sorted(SELF_CHECK_CASES))}")
    s, build = SELF_CHECK_CASES[case]
    numerics = numerics or NumericsConfig.for_dispersion(s)
    report = SelfCheckReport(case)
    setup = build(numerics)
    L = setup.operator

    A = L.assemble()
    sandwiches = {eps: sandwich(L, eps) for eps in EPSILONS}
    psi0 = setup.psi0
    hint = analyze(psi0) if psi0 is not None else None
    base = symmetric_spectrum(A, kernel_hint=hint)
    counts = {"L": base.negative_count}
    for eps in EPSILONS:
        eps_hint = sandwiched_kernel_hint(psi0, eps) if psi0 is not None else None
        counts[f"L◇(eps={eps:g})"] = symmetric_spectrum(sandwiches[eps], kernel_hint=eps_hint).negative_count
    report.add("n(L) = n(L◇_ε)", len(set(counts.values())) == 1 and counts["L"] == setup.negative_count,
               ", ".join(f"{name}: {count}" for name, count in counts.items()))

    A = deflate_kernel(A, base)
    gker = generalized_kernel_dim(A, numerics.zero_fraction)
    report.add("generalized kernel", gker == setup.generalized_kernel,
               f"dimension {gker}, expected {setup.generalized_kernel}")

    spectrum = hamiltonian_spectrum(A, zero_fraction=numerics.zero_fraction)
    root = regularized_quarter_root_multiplier(L.grid, 0.0).basis_diagonal()
    distance = spectrum_distance(spectrum.eigenvalues,
                                 sandwiched_hamiltonian_eigenvalues(conjugate(A, root, f"{A.label}◇(eps=0)")))
    report.add("∂L ~ JL◇ spectra", distance <= 1e-6, f"relative Hausdorff distance {distance:.2e}")

    asymmetry = check_quadruple_symmetry(spectrum.eigenvalues)
    report.add("quadruple symmetry", asymmetry <= 1e-6, f"relative mismatch {asymmetry:.2e}")

    _check_identities(report, L.grid)

    if psi0 is not None:
        d = constrained_quantity(A, psi0, base.zero_tol, kernel_hint=psi0)
        report.add("d = -½ slope", abs(d + 0.5 * setup.slope) <= 1e-2 * abs(setup.slope),
                   f"d = {d:.6e}, slope = {setup.slope:.6e}")
        limits = {eps: sandwiched_constrained_quantity(L, psi0, eps, kernel_hint=psi0) for eps in EPSILONS}
        regularized = [value for eps, value in limits.items() if eps > 0]
        same_sign = {np.sign(value) for value in regularized} == {np.sign(d)}
        drift = abs(limits[1e-3] - d) / abs(d)
        # at eps = 0 the constant mode is projected out, which can only lower the quantity (Schur complement)
        below = limits[0.0] <= d + 1e-8 * abs(d)
        report.add("ε-limit of d", same_sign and drift <= 1e-3 and below,
                   ", ".join(f"eps={eps:g}: {value:.6e}" for eps, value in limits.items()))

    for check in report.checks:
        logger.info("self-check %s / %s: %s (%s)", case, check.name, "pass" if check.passed else "FAIL", check.detail)
    return report
