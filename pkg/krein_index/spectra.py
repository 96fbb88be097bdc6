"""Eigenvalue computations behind the Hamiltonian-Krein index.

Counts of the self-adjoint operator (n(L), kernel), the constrained quantity ⟨L^{-1}∂^{-1}ψ₀, ∂^{-1}ψ₀⟩, the
spectrum of ∂_x L restricted to mean-zero fields and the Krein-signature bookkeeping on top of it.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.optimize
from json_encoder.json import json_encoder

from krein_index.errors import FredholmError, GridError, ResolutionError
from krein_index.operators import DenseMatrix, LinOperator, sandwich
from krein_index.spectral_core import (RealField, SpectralGrid, analyze, antiderivative_multiplier,
                                       bessel_multiplier, derivative_matrix, fourier_basis,
                                       fractional_derivative_multiplier, hilbert_matrix, inner_product,
                                       regularized_quarter_root_multiplier, restricted_indices)
from krein_index.waves import WaveProfile

logger = logging.getLogger(__name__)

ZERO_REL = 1e-8
"""Eigenvalues below this fraction of the spectral radius count as zero"""
FREDHOLM_TOL = 1e-6
NEAR_SINGULAR_REL = 1e-6
ZERO_FRACTION = 0.05
"""Hamiltonian zero cluster radius, as a fraction of the lowest Fourier mode's eigenvalue scale"""
SLOPE_MISMATCH_TOL = 0.05
KERNEL_OVERLAP_MIN = 0.5
"""Below this overlap with the translation mode no eigenvector can be taken for the kernel"""
KERNEL_OVERLAP_WARN = 0.99


class HamiltonianKind(str, Enum):
    KDV = "KDV"
    BBM = "BBM"


class EigenClass(str, Enum):
    REAL_POS = "REAL_POS"
    REAL_NEG = "REAL_NEG"
    COMPLEX = "COMPLEX"
    IMAG_POS_SIG = "IMAG_POS_SIG"
    IMAG_NEG_SIG = "IMAG_NEG_SIG"
    ZERO = "ZERO"
    INDET = "INDET"


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Eigen-decomposition of a symmetric matrix with its negative and zero counts"""
    label: str
    eigenvalues: np.ndarray
    zero_tol: float
    negative_count: int
    kernel_dim: int
    kernel_vectors: tuple
    """Basis coordinates of the numerical kernel"""
    grid: SpectralGrid = None
    kernel_eigenvalues: tuple = ()
    """Computed eigenvalues belonging to `kernel_vectors`; exact arithmetic would give zeros"""
    kernel_overlap: float = None
    """Norm of the unit kernel hint's projection on the kernel, None without a hint"""

    def kernel_fields(self) -> list[RealField]:
        if self.grid is None:
            raise GridError(f"{self.label}: no grid to synthesize kernel fields on")
        basis = fourier_basis(self.grid)
        return [RealField(self.grid, basis @ vec) for vec in self.kernel_vectors]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "eigenvalues": self.eigenvalues,
            "zero_tol": self.zero_tol,
            "negative_count": self.negative_count,
            "kernel_dim": self.kernel_dim,
            "kernel_eigenvalues": list(self.kernel_eigenvalues),
            "kernel_overlap": self.kernel_overlap,
        }


@json_encoder.register(SpectralReport)
def encode_spectral_report(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def _as_matrix(operator: Union[LinOperator, DenseMatrix]) -> DenseMatrix:
    if isinstance(operator, LinOperator):
        return operator.assemble()
    return operator


def _kernel_mask(eigenvalues: np.ndarray, eigenvectors: np.ndarray, zero_tol: float,
                 kernel_hint: Optional[np.ndarray], label: str) -> tuple[np.ndarray, Optional[float]]:
    """Eigendirections counted as kernel: |μ| <= zero_tol, plus the one that carries a known kernel vector.

    The hinted direction is picked by overlap, whatever the size of its computed eigenvalue.
    """
    mask = np.abs(eigenvalues) <= zero_tol
    if kernel_hint is None:
        return mask, None
    hint = np.asarray(kernel_hint, dtype=float)
    norm = float(np.linalg.norm(hint))
    if norm == 0:
        raise ValueError(f"{label}: kernel hint is the zero vector")
    overlaps = np.abs(eigenvectors.T @ hint) / norm
    slot = int(np.argmax(overlaps))
    mask[slot] = True
    overlap = float(np.linalg.norm(overlaps[mask]))
    if overlap < KERNEL_OVERLAP_MIN:
        raise ResolutionError(
            f"{label}: no eigenvector carries the translation mode (best overlap {overlap:.3f}); refine the grid")
    if overlap < KERNEL_OVERLAP_WARN:
        logger.warning("%s: translation mode overlaps its eigenvector by only %.4f", label, overlap)
    logger.debug("%s: kernel eigenvalue %.3e at overlap %.6f", label, eigenvalues[slot], overlap)
    return mask, overlap


def symmetric_spectrum(A: Union[DenseMatrix, LinOperator], zero_tol: float = None,
                       kernel_hint: np.ndarray = None) -> SpectralReport:
    """All eigenvalues of a symmetric matrix, ascending, with n(A) and dim ker(A).

    zero_tol defaults to ZERO_REL times the spectral radius. `kernel_hint` holds the basis coordinates of a vector
    known to span (part of) the kernel, such as the translation mode ∂_x U; the eigenvector it overlaps most is
    counted as kernel whatever its computed eigenvalue.
    """
    A = _as_matrix(A)
    A.require_symmetric()
    eigenvalues, eigenvectors = scipy.linalg.eigh(A.entries)
    if zero_tol is None:
        zero_tol = ZERO_REL * float(np.max(np.abs(eigenvalues)))
    mask, overlap = _kernel_mask(eigenvalues, eigenvectors, zero_tol, kernel_hint, A.label)
    kernel = np.flatnonzero(mask)
    report = SpectralReport(
        label=A.label,
        eigenvalues=eigenvalues,
        zero_tol=zero_tol,
        negative_count=int(np.sum((eigenvalues < -zero_tol) & ~mask)),
        kernel_dim=int(kernel.size),
        kernel_vectors=tuple(eigenvectors[:, k] for k in kernel),
        grid=A.grid,
        kernel_eigenvalues=tuple(float(eigenvalues[k]) for k in kernel),
        kernel_overlap=overlap)
    logger.debug("%s: n=%d, kernel=%d, lowest eigenvalues %s", A.label, report.negative_count, report.kernel_dim,
                 eigenvalues[:3])
    return report


def deflate_kernel(A: DenseMatrix, report: SpectralReport) -> DenseMatrix:
    """A with the eigenvalues of `report`'s kernel directions set to exactly zero.

    ∂_x A has its Jordan block at 0 only when the kernel eigenvalue is exactly 0; a shifted one splits the block into
    a pair ±√shift.
    """
    if report.label != A.label or report.eigenvalues.size != A.order:
        raise ValueError(f"spectral report {report.label} does not belong to {A.label}")
    entries = np.array(A.entries)
    for value, vector in zip(report.kernel_eigenvalues, report.kernel_vectors):
        entries -= value * np.outer(vector, vector)
    if report.kernel_eigenvalues:
        logger.info("%s: deflated kernel eigenvalues %s", A.label,
                    ", ".join(f"{value:.3e}" for value in report.kernel_eigenvalues))
    return DenseMatrix(A.label, 0.5 * (entries + entries.T), A.grid)


def anchored_antiderivative(psi0: RealField) -> RealField:
    """∂_x^{-1}ψ₀ shifted by the constant that makes it vanish on the far field.

    The periodic antiderivative is the mean-zero one; on the line the antiderivative of ∂_x U is U itself, which
    decays at the box edges instead.
    """
    w = antiderivative_multiplier(psi0.grid).apply(psi0)
    far = psi0.grid.outer_mask()
    return w - float(np.mean(w.values[far]))


def _pseudo_inverse_form(entries: np.ndarray, rhs: np.ndarray, zero_tol: float, label: str,
                         kernel_hint: np.ndarray = None) -> float:
    """rhsᵀ A⁺ rhs with the kernel directions (see `symmetric_spectrum`) dropped"""
    eigenvalues, eigenvectors = scipy.linalg.eigh(entries)
    scale = float(np.max(np.abs(eigenvalues)))
    if zero_tol is None:
        zero_tol = ZERO_REL * scale
    projections = eigenvectors.T @ rhs
    kernel, _ = _kernel_mask(eigenvalues, eigenvectors, zero_tol, kernel_hint, label)
    rhs_norm = float(np.linalg.norm(rhs))

    if np.any(kernel):
        worst = float(np.max(np.abs(projections[kernel])))
        if worst > FREDHOLM_TOL * rhs_norm:
            raise FredholmError(
                f"{label}: right-hand side not orthogonal to the kernel, |⟨w, k⟩| = {worst:.3e} "
                f"> {FREDHOLM_TOL:g}·‖w‖ = {FREDHOLM_TOL * rhs_norm:.3e}")

    kept = ~kernel
    smallest = float(np.min(np.abs(eigenvalues[kept])))
    if smallest < NEAR_SINGULAR_REL * scale:
        logger.warning("%s: near-singular solve, smallest retained |eigenvalue| %.3e vs scale %.3e",
                       label, smallest, scale)
    return float(np.sum(projections[kept] ** 2 / eigenvalues[kept]))


def _check_psi_grid(matrix: DenseMatrix, psi0: RealField) -> None:
    if matrix.grid != psi0.grid:
        raise GridError(f"{matrix.label} and ψ₀ live on different grids")


def constrained_quantity(L: Union[LinOperator, DenseMatrix], psi0: RealField, zero_tol: float = None,
                         kernel_hint: RealField = None) -> float:
    """⟨L⁺ w, w⟩ with w = ∂_x^{-1}ψ₀, L⁺ the pseudo-inverse off the numerical kernel.

    For the fKdV linearization with ψ₀ = ∂_x U_c this is -½ ∂_c⟨U_c, U_c⟩. Pass ψ₀ itself as `kernel_hint` when it
    spans the kernel. Raises FredholmError if w has a component along the kernel.
    """
    matrix = _as_matrix(L)
    _check_psi_grid(matrix, psi0)
    w = anchored_antiderivative(psi0)
    hint = analyze(kernel_hint) if kernel_hint is not None else None
    return psi0.grid.spacing * _pseudo_inverse_form(matrix.entries, analyze(w), zero_tol, matrix.label, hint)


def sandwiched_kernel_hint(kernel_hint: RealField, eps: float) -> np.ndarray:
    """Coordinates of R_ε^{-1}·k, the kernel vector of L◇_ε that comes from a kernel vector k of L"""
    root = regularized_quarter_root_multiplier(kernel_hint.grid, eps).basis_diagonal()
    coordinates = analyze(kernel_hint)
    return np.divide(coordinates, root, out=np.zeros_like(coordinates), where=root > 0)


def sandwiched_constrained_quantity(L: LinOperator, psi0: RealField, eps: float, zero_tol: float = None,
                                    kernel_hint: RealField = None) -> float:
    """The constrained quantity computed through L◇_ε: ⟨(L◇_ε)⁺ R_ε w, R_ε w⟩, R_ε = (-∂² + ε²)^{1/4}"""
    matrix = sandwich(L, eps)
    _check_psi_grid(matrix, psi0)
    root = regularized_quarter_root_multiplier(L.grid, eps).basis_diagonal()
    rhs = root * analyze(anchored_antiderivative(psi0))
    hint = sandwiched_kernel_hint(kernel_hint, eps) if kernel_hint is not None else None
    return psi0.grid.spacing * _pseudo_inverse_form(matrix.entries, rhs, zero_tol, matrix.label, hint)


def slope_analytic(s: float, p: float, c: float, q_norm_sq: float) -> float:
    """∂_c⟨U_c, U_c⟩ = (2/p - 1/s)·c^{2/p - 1/s - 1}·⟨Q, Q⟩ along the fKdV family"""
    exponent = 2.0 / p - 1.0 / s
    return exponent * c ** (exponent - 1.0) * q_norm_sq


def bbm_energy(U: WaveProfile) -> float:
    """⟨(I + |∂|^s)U, U⟩"""
    return inner_product(bessel_multiplier(U.grid, U.s, 1.0).apply(U.field), U.field)


@dataclass(frozen=True)
class BbmSlope:
    """∂_c⟨(I+M)U_c, U_c⟩ by finite differences and in closed form"""
    finite_difference: float
    closed_form: float
    bracket: float
    """ps·c^{2-1/s}(c-1)^{1+1/s-2/p} × closed_form; same sign, no c-power prefactors"""
    relative_mismatch: float

    @property
    def consistent(self) -> bool:
        return self.relative_mismatch <= SLOPE_MISMATCH_TOL

    def to_dict(self) -> dict:
        return {
            "finite_difference": self.finite_difference,
            "closed_form": self.closed_form,
            "bracket": self.bracket,
            "relative_mismatch": self.relative_mismatch,
            "consistent": self.consistent,
        }


@json_encoder.register(BbmSlope)
def encode_bbm_slope(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def bbm_bracket(s: float, p: float, c: float, q_norm_sq: float, q_seminorm_sq: float) -> float:
    """c(2sc - p)⟨Q,Q⟩ + (c-1)(2sc + (s-1)p)‖|∂|^{s/2}Q‖², positive exactly when the fBBM wave is stable"""
    return c * (2.0 * s * c - p) * q_norm_sq + (c - 1.0) * (2.0 * s * c + (s - 1.0) * p) * q_seminorm_sq


def bbm_slope_closed_form(s: float, p: float, c: float, q_norm_sq: float, q_seminorm_sq: float) -> float:
    """Derivative in c of ⟨(I+M)U_c, U_c⟩ = (c-1)^{2/p-1/s} c^{1/s-1} [c⟨Q,Q⟩ + (c-1)‖|∂|^{s/2}Q‖²]"""
    alpha = 2.0 / p - 1.0 / s
    beta = 1.0 / s - 1.0
    prefactor = (c - 1.0) ** (alpha - 1.0) * c ** (beta - 1.0)
    return prefactor * bbm_bracket(s, p, c, q_norm_sq, q_seminorm_sq) / (p * s)


def bbm_slope(U_family: Callable[[float], WaveProfile], c: float, dc: float, ground_state: WaveProfile) -> BbmSlope:
    """Centered difference of ⟨(I+M)U_c, U_c⟩ in c, checked against the closed form through Q.

    A relative mismatch above 5% means dc is too large (or the box too small) and is logged.
    """
    if dc <= 0 or c - dc <= 1:
        raise ValueError(f"need dc > 0 and c - dc > 1, got c={c}, dc={dc}")
    fd = (bbm_energy(U_family(c + dc)) - bbm_energy(U_family(c - dc))) / (2.0 * dc)

    Q = ground_state
    half = fractional_derivative_multiplier(Q.grid, Q.s / 2.0).apply(Q.field)
    q_norm_sq = inner_product(Q.field, Q.field)
    q_seminorm_sq = inner_product(half, half)
    closed = bbm_slope_closed_form(Q.s, Q.p, c, q_norm_sq, q_seminorm_sq)
    bracket = bbm_bracket(Q.s, Q.p, c, q_norm_sq, q_seminorm_sq)

    mismatch = abs(fd - closed) / max(abs(closed), abs(fd), np.finfo(float).tiny)
    result = BbmSlope(fd, closed, bracket, mismatch)
    if not result.consistent:
        logger.warning("BBM slope at c=%g: finite difference %.6e vs closed form %.6e (%.1f%% apart)",
                       c, fd, closed, 100 * mismatch)
    return result


@dataclass(frozen=True, eq=False)
class HamiltonianSpectrum:
    """Eigen-decomposition of ∂_x A on mean-zero, Nyquist-free Fourier modes"""
    label: str
    kind: HamiltonianKind
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    restricted_matrix: np.ndarray
    """A with the mean and Nyquist rows/columns removed"""
    zero_tol: float
    grid: SpectralGrid


def lowest_mode_scale(restricted_matrix: np.ndarray, grid: SpectralGrid) -> float:
    """|eigenvalue| ∂_x A would have on the lowest Fourier mode alone, ω₁·|A[cos₁, cos₁]|"""
    return math.pi / grid.half_length * abs(float(restricted_matrix[0, 0]))


def _restricted(matrix: DenseMatrix) -> tuple[np.ndarray, slice]:
    if matrix.grid is None:
        raise GridError(f"{matrix.label}: Hamiltonian spectra need a matrix written in a grid's Fourier basis")
    rows = restricted_indices(matrix.grid)
    return matrix.entries[rows, rows], rows


def hamiltonian_spectrum(matrix: Union[DenseMatrix, LinOperator], kind: HamiltonianKind = HamiltonianKind.KDV,
                         zero_fraction: float = ZERO_FRACTION) -> HamiltonianSpectrum:
    """Eigenvalues and eigenvectors of D_r·A_r, the restriction of ∂_x A to mean-zero fields.

    `matrix` is L for KdV-type problems and the symmetrized (I+M)^{-1/2} L₀ (I+M)^{-1/2} for BBM.
    """
    matrix = _as_matrix(matrix)
    matrix.require_symmetric()
    restricted, rows = _restricted(matrix)
    derivative = derivative_matrix(matrix.grid)[rows, rows]
    eigenvalues, eigenvectors = scipy.linalg.eig(derivative @ restricted)
    zero_tol = zero_fraction * lowest_mode_scale(restricted, matrix.grid)
    logger.info("%s: Hamiltonian spectrum of order %d, max |λ| %.3e, zero cluster radius %.3e",
                matrix.label, eigenvalues.size, np.max(np.abs(eigenvalues)), zero_tol)
    return HamiltonianSpectrum(matrix.label, HamiltonianKind(kind), eigenvalues, eigenvectors, restricted, zero_tol,
                               matrix.grid)


def sandwiched_hamiltonian_eigenvalues(sandwiched: DenseMatrix) -> np.ndarray:
    """Eigenvalues of J·L◇ on the restricted modes; they match those of ∂_x L"""
    restricted, rows = _restricted(sandwiched)
    hilbert = hilbert_matrix(sandwiched.grid)[rows, rows]
    return scipy.linalg.eigvals(hilbert @ restricted)


def bbm_generalized_spectrum(L0: LinOperator) -> np.ndarray:
    """Eigenvalues of ∂_x L₀ v = λ(I+M)v, the un-symmetrized BBM problem"""
    restricted, rows = _restricted(L0.assemble())
    derivative = derivative_matrix(L0.grid)[rows, rows]
    mass = bessel_multiplier(L0.grid, L0.dispersion_exponent, 1.0).basis_diagonal()[rows]
    return scipy.linalg.eigvals(derivative @ restricted, np.diag(mass))


def generalized_kernel_dim(L: Union[LinOperator, DenseMatrix], tol: float = ZERO_FRACTION) -> int:
    """Algebraic multiplicity of 0 in the spectrum of restricted ∂_x L: #{|λ| <= tol·lowest-mode scale}"""
    spectrum = hamiltonian_spectrum(L, zero_fraction=tol)
    return int(np.sum(np.abs(spectrum.eigenvalues) <= spectrum.zero_tol))


def _set_distance(a: np.ndarray, b: np.ndarray) -> float:
    """max over a of the distance to the nearest point of b"""
    return float(np.max(np.min(np.abs(a[:, None] - b[None, :]), axis=1)))


def spectrum_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two eigenvalue sets, relative to their spectral radius"""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), np.finfo(float).tiny)
    return max(_set_distance(a, b), _set_distance(b, a)) / scale


def check_quadruple_symmetry(eigenvalues: np.ndarray) -> float:
    """Worst relative mismatch of the spectrum under λ ↦ -λ and λ ↦ conj(λ)"""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    return max(spectrum_distance(eigenvalues, -eigenvalues), spectrum_distance(eigenvalues, np.conj(eigenvalues)))


@dataclass(frozen=True)
class KreinTolerances:
    zero_tol: float
    re_tol: float
    im_tol: float
    sig_tol: float

    @classmethod
    def default(cls, eigenvalues: np.ndarray, a_sym: np.ndarray, zero_tol: float = None,
                relative: float = ZERO_REL) -> "KreinTolerances":
        """re/im tolerances relative to max |λ|, signature tolerance relative to ‖A‖_∞"""
        radius = float(np.max(np.abs(eigenvalues)))
        sig_tol = relative * float(np.linalg.norm(a_sym, ord=np.inf))
        if zero_tol is None:
            zero_tol = relative * radius
        return cls(zero_tol=zero_tol, re_tol=relative * radius, im_tol=relative * radius, sig_tol=sig_tol)

    def to_dict(self) -> dict:
        return {"zero_tol": self.zero_tol, "re_tol": self.re_tol, "im_tol": self.im_tol, "sig_tol": self.sig_tol}


@dataclass(frozen=True, eq=False)
class KreinClassification:
    """k_r, k_c, k_i⁻ of a Hamiltonian spectrum, with a class label per eigenvalue"""
    k_r: int
    k_c: int
    k_i_minus: int
    indeterminate: tuple
    """(eigenvalue, form value) pairs whose Krein signature is within sig_tol of 0"""
    tolerances: KreinTolerances
    eigenvalues: np.ndarray
    labels: tuple
    form_values: np.ndarray
    """⟨A v, v⟩ for imaginary eigenvalues, NaN elsewhere"""

    @property
    def re_tol(self) -> float:
        return self.tolerances.re_tol

    @property
    def im_tol(self) -> float:
        return self.tolerances.im_tol

    @property
    def sig_tol(self) -> float:
        return self.tolerances.sig_tol

    @property
    def k_ham(self) -> int:
        return self.k_r + self.k_c + self.k_i_minus

    def count(self, label: EigenClass) -> int:
        return sum(1 for lbl in self.labels if lbl == label)

    def to_frame(self) -> pd.DataFrame:
        """One row per eigenvalue (re, im, class, krein_form_value), sorted by real then imaginary part"""
        order = np.lexsort((self.eigenvalues.imag, self.eigenvalues.real))
        return pd.DataFrame({
            "re": self.eigenvalues.real[order],
            "im": self.eigenvalues.imag[order],
            "class": [self.labels[i].value for i in order],
            "krein_form_value": self.form_values[order],
        })

    def to_dict(self) -> dict:
        return {
            "k_r": self.k_r,
            "k_c": self.k_c,
            "k_i_minus": self.k_i_minus,
            "k_ham": self.k_ham,
            "indeterminate": [{"eigenvalue": complex(lam), "form_value": value} for lam, value in self.indeterminate],
            "tolerances": self.tolerances.to_dict(),
        }


@json_encoder.register(KreinClassification)
def encode_krein_classification(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def _imaginary_clusters(eigenvalues: np.ndarray, indices: list[int], im_tol: float) -> list[list[int]]:
    clusters: list[list[int]] = []
    for i in sorted(indices, key=lambda k: (eigenvalues[k].imag, k)):
        if clusters and eigenvalues[i].imag - eigenvalues[clusters[-1][-1]].imag <= im_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def classify_krein(eigenvalues: np.ndarray, eigenvectors: np.ndarray, a_sym: Union[np.ndarray, DenseMatrix],
                   tols: KreinTolerances = None) -> KreinClassification:
    """Sort each eigenvalue into a bucket and count k_r, k_c and k_i⁻.

    Imaginary eigenvalues are grouped in clusters of width im_tol; on each cluster's eigenspace the Hermitian
    form vᴴ A v is diagonalized and its negative eigenvalues counted. Clusters with Im λ > 0 count twice (their
    conjugates carry the same signature), clusters below the real axis are labeled but not counted.
    """
    a_sym = a_sym.entries if isinstance(a_sym, DenseMatrix) else np.asarray(a_sym)
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    tols = tols or KreinTolerances.default(eigenvalues, a_sym)

    labels: list[EigenClass] = [None] * eigenvalues.size
    form_values = np.full(eigenvalues.size, np.nan)
    k_r = k_c = 0
    imaginary = []

    for i, lam in enumerate(eigenvalues):
        real_axis = abs(lam.imag) <= tols.im_tol
        if abs(lam) <= tols.zero_tol:
            labels[i] = EigenClass.ZERO
        elif lam.real > tols.re_tol:
            if real_axis:
                labels[i] = EigenClass.REAL_POS
                k_r += 1
            else:
                labels[i] = EigenClass.COMPLEX
                k_c += 1
        elif lam.real < -tols.re_tol:
            labels[i] = EigenClass.REAL_NEG if real_axis else EigenClass.COMPLEX
        else:
            imaginary.append(i)

    k_i_minus = 0
    indeterminate = []
    for cluster in _imaginary_clusters(eigenvalues, imaginary, tols.im_tol):
        vectors = eigenvectors[:, cluster]
        form = vectors.conj().T @ a_sym @ vectors
        signature, rotation = scipy.linalg.eigh(0.5 * (form + form.conj().T))
        if np.mean(eigenvalues[cluster].imag) > 0:
            k_i_minus += 2 * int(np.sum(signature < -tols.sig_tol))

        # each member takes the signature of the form eigenvector its own eigenvector leans on most
        members, columns = scipy.optimize.linear_sum_assignment(-np.abs(rotation))
        for member, column in zip(members, columns):
            i, value = cluster[member], signature[column]
            form_values[i] = value
            if value > tols.sig_tol:
                labels[i] = EigenClass.IMAG_POS_SIG
            elif value < -tols.sig_tol:
                labels[i] = EigenClass.IMAG_NEG_SIG
            else:
                labels[i] = EigenClass.INDET
                indeterminate.append((complex(eigenvalues[i]), float(value)))

    if indeterminate:
        logger.warning("%d imaginary eigenvalues with indeterminate Krein signature", len(indeterminate))
    return KreinClassification(
        k_r=k_r, k_c=k_c, k_i_minus=k_i_minus, indeterminate=tuple(indeterminate), tolerances=tols,
        eigenvalues=eigenvalues, labels=tuple(labels), form_values=form_values)


def classify_spectrum(spectrum: HamiltonianSpectrum, relative: float = ZERO_REL) -> KreinClassification:
    """classify_krein with tolerances taken from the spectrum itself"""
    tols = KreinTolerances.default(spectrum.eigenvalues, spectrum.restricted_matrix, spectrum.zero_tol, relative)
    return classify_krein(spectrum.eigenvalues, spectrum.eigenvectors, spectrum.restricted_matrix, tols)

