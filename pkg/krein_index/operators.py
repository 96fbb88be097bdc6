"""Self-adjoint linearizations (Fourier multiplier + potential) and their dense assembly.

Dense matrices live in the real orthonormal Fourier basis of `spectral_core.fourier_basis`, where the
multiplier part is diagonal. The potential part is Φᵀ diag(V) Φ, or, when the potential is known on a padded
grid, its exact Galerkin form: a Toeplitz-plus-Hankel matrix of the potential's Fourier coefficients.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg
from json_encoder.json import json_encoder

from krein_index import serialization
from krein_index.errors import AsymmetricMatrixError, ModelMismatchError
from krein_index.spectral_core import (Multiplier, RealField, SpectralGrid, bessel_multiplier, coarsen,
                                       fourier_basis, refine, regularized_quarter_root_multiplier)
from krein_index.waves import WaveModel, WaveProfile, padding_factor, positive_power

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
DECAY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """A square real matrix, optionally tied to the grid whose Fourier basis it is written in"""
    label: str
    entries: np.ndarray
    grid: SpectralGrid = None

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"{self.label}: matrix must be square, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError(f"{self.label}: matrix has non-finite entries")
        if self.grid is not None and entries.shape[0] != self.grid.n:
            raise ValueError(f"{self.label}: order {entries.shape[0]} does not match grid n={self.grid.n}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def asymmetry(self) -> float:
        """‖A - Aᵀ‖_max relative to ‖A‖_max"""
        scale = np.max(np.abs(self.entries))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.entries - self.entries.T)) / scale)

    def require_symmetric(self, tol: float = SYMMETRY_TOL) -> None:
        asym = self.asymmetry()
        if asym > tol:
            raise AsymmetricMatrixError(f"{self.label}: relative asymmetry {asym:.3e} exceeds {tol:g}")

    def header(self) -> dict:
        header = {"order": self.order, "label": self.label, "dtype": "<f8", "layout": "row-major"}
        if self.grid is not None:
            header.update({"n": self.grid.n, "half_length": self.grid.half_length,
                           "basis": "real Fourier [1, cos1, sin1, ..., cos(n/2-1), sin(n/2-1), nyquist]"})
        return header

    def write_binary(self, path: str) -> str:
        """Write the entries as row-major little-endian float64 to `path` and the header to `path`.json"""
        serialization.write_binary(np.ascontiguousarray(self.entries, dtype="<f8").tobytes(order="C"), path)
        header_path = f"{path}.json"
        serialization.write_json(self.header(), header_path)
        return header_path

    def to_dict(self) -> dict:
        return {**self.header(), "entries": self.entries}


@json_encoder.register(DenseMatrix)
def encode_dense_matrix(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def read_binary(path: str) -> DenseMatrix:
    """Inverse of DenseMatrix.write_binary, without the grid"""
    header = serialization.read_json(f"{path}.json")
    order = header["order"]
    entries = np.fromfile(path, dtype="<f8").reshape(order, order)
    return DenseMatrix(header["label"], entries)


@dataclass(frozen=True, eq=False)
class LinOperator:
    """L = m(D) + V(x): a real even Fourier multiplier plus a pointwise potential"""
    grid: SpectralGrid
    multiplier_symbol: np.ndarray
    """m(ξ_k) in the grid's FFT layout"""
    potential: np.ndarray
    label: str
    dispersion_exponent: float = None
    """s of the |∂|^s inside the multiplier, needed to symmetrize BBM operators"""
    resolved_potential: np.ndarray = None
    """The potential on a grid an integer factor finer; when present products with it are exact on the band"""

    def __post_init__(self) -> None:
        for name in ("multiplier_symbol", "potential"):
            raw = np.asarray(getattr(self, name))
            if np.iscomplexobj(raw) and np.any(raw.imag != 0):
                raise ValueError(f"{self.label}: {name} must be real")
            values = np.array(raw.real, dtype=float)
            if values.shape != (self.grid.n,):
                raise ValueError(f"{self.label}: {name} has shape {values.shape}, grid expects ({self.grid.n},)")
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if self.resolved_potential is not None:
            fine = np.array(self.resolved_potential, dtype=float)
            if fine.ndim != 1 or fine.size % self.grid.n or fine.size < 2 * self.grid.n:
                raise ValueError(f"{self.label}: resolved potential of size {fine.size} does not refine "
                                 f"n={self.grid.n} by an integer factor >= 2")
            fine.setflags(write=False)
            object.__setattr__(self, "resolved_potential", fine)

    @property
    def multiplier(self) -> Multiplier:
        return Multiplier(self.grid, self.multiplier_symbol, self.label)

    @property
    def padding(self) -> int:
        if self.resolved_potential is None:
            return 1
        return self.resolved_potential.size // self.grid.n

    def apply(self, f: RealField) -> RealField:
        if self.resolved_potential is None:
            return self.multiplier.apply(f) + self.potential * f.values
        product = coarsen(self.grid, self.resolved_potential * refine(f, self.padding))
        # the Nyquist mode only sees the mean of the potential
        alternating = (-1.0) ** np.arange(self.grid.n)
        nyquist = float(np.mean(self.resolved_potential)) * float(np.mean(alternating * f.values)) * alternating
        return self.multiplier.apply(f) + product.values + nyquist

    def assemble(self) -> DenseMatrix:
        """Dense symmetric matrix of L in the real Fourier basis"""
        if self.resolved_potential is None:
            basis = fourier_basis(self.grid)
            entries = (basis.T * self.potential) @ basis
        else:
            entries = galerkin_potential(self.grid, self.resolved_potential)
        entries[np.diag_indices_from(entries)] += self.multiplier.basis_diagonal()
        matrix = DenseMatrix(self.label, entries, self.grid)
        matrix.require_symmetric()
        return DenseMatrix(self.label, 0.5 * (entries + entries.T), self.grid)


def galerkin_potential(grid: SpectralGrid, fine_potential: np.ndarray) -> np.ndarray:
    """(1/h)∫ V φ_i φ_j dx over the real Fourier basis, from samples of V on a padded grid.

    With a_m = (1/2ℓ)∫ V e^{-iω_m x} dx = C_m - i S_m the cos/sin blocks are
    cos_k cos_l = C_{k-l} + C_{k+l}, sin_k sin_l = C_{k-l} - C_{k+l} and cos_k sin_l = S_{k+l} + S_{l-k}.
    The Nyquist mode is decoupled and sees C_0.
    """
    n = grid.n
    fine = np.asarray(fine_potential, dtype=float)
    if fine.size < 2 * n:
        raise ValueError(f"need at least 2n = {2 * n} samples of the potential, got {fine.size}")
    pairs = n // 2 - 1
    # x_0 = -ℓ puts a factor (-1)^m on the FFT coefficients
    coefficients = scipy.fft.fft(fine)[:n] * (-1.0) ** np.arange(n) / fine.size
    cos_part = coefficients.real
    sin_part = -coefficients.imag

    difference = scipy.linalg.toeplitz(cos_part[:pairs])
    total = scipy.linalg.hankel(cos_part[2:pairs + 2], cos_part[pairs + 1:2 * pairs + 1])
    mixed = (scipy.linalg.hankel(sin_part[2:pairs + 2], sin_part[pairs + 1:2 * pairs + 1])
             + scipy.linalg.toeplitz(-sin_part[:pairs], sin_part[:pairs]))

    cos_cols = np.arange(1, n - 1, 2)
    sin_cols = cos_cols + 1
    entries = np.zeros((n, n))
    entries[np.ix_(cos_cols, cos_cols)] = difference + total
    entries[np.ix_(sin_cols, sin_cols)] = difference - total
    entries[np.ix_(cos_cols, sin_cols)] = mixed
    entries[np.ix_(sin_cols, cos_cols)] = mixed.T
    entries[0, 0] = cos_part[0]
    entries[0, cos_cols] = entries[cos_cols, 0] = np.sqrt(2.0) * cos_part[1:pairs + 1]
    entries[0, sin_cols] = entries[sin_cols, 0] = np.sqrt(2.0) * sin_part[1:pairs + 1]
    entries[n - 1, n - 1] = cos_part[0]
    return entries


def essential_floor(L: LinOperator, symmetrized: bool = False) -> float:
    """Bottom of the constant-coefficient symbol, the discrete stand-in for inf σ_ess.

    With `symmetrized` the floor is taken for (I+M)^{-1/2} L (I+M)^{-1/2}, the BBM symmetrization.
    """
    symbol = L.multiplier_symbol
    if symmetrized:
        symbol = symbol / bessel_multiplier(L.grid, _exponent(L), 1.0).symbol_values.real
    return float(np.min(symbol))


def _wave_potential(U: WaveProfile) -> tuple[np.ndarray, np.ndarray]:
    """-κ(p+1)U^p on the grid and on the padded grid the profile's nonlinearity was formed on"""
    scale = -U.nonlinear_coeff * (U.p + 1.0)
    power, _ = positive_power(U.values, U.p)
    fine, _ = positive_power(refine(U.field, padding_factor(U.p)), U.p)
    return scale * power, scale * fine


def kdv_linearization(U: WaveProfile) -> LinOperator:
    """L_c = |∂|^s + c - (p+1)U^p, translational kernel ∂_x U"""
    if U.model == WaveModel.FBBM or (U.model == WaveModel.NORMALIZED and U.c != 1):
        raise ModelMismatchError(f"kdv_linearization needs an FKDV wave, got {U.model.value} at c={U.c}")
    symbol = (2.0 * np.pi * np.abs(U.grid.wavenumbers)) ** U.s + U.c
    potential, resolved = _wave_potential(U)
    return LinOperator(U.grid, symbol, potential, f"L_fkdv(s={U.s:g},p={U.p:g},c={U.c:g})", U.s, resolved)


def bbm_linearization(U: WaveProfile) -> LinOperator:
    """L₀ = c|∂|^s + (c-1) - (p+1)U^p"""
    if U.model != WaveModel.FBBM:
        raise ModelMismatchError(f"bbm_linearization needs an FBBM wave, got {U.model.value}")
    if U.c <= 1:
        raise ModelMismatchError(f"FBBM wave with c={U.c} <= 1")
    symbol = U.c * (2.0 * np.pi * np.abs(U.grid.wavenumbers)) ** U.s + (U.c - 1.0)
    potential, resolved = _wave_potential(U)
    return LinOperator(U.grid, symbol, potential, f"L0_fbbm(s={U.s:g},p={U.p:g},c={U.c:g})", U.s, resolved)


def schrodinger_operator(V: RealField, c: float) -> LinOperator:
    """L = -∂² + c - V"""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    peak = np.max(np.abs(V.values))
    if peak > 0 and V.boundary_value() > DECAY_TOL * peak:
        logger.warning("Potential decays slowly: boundary value %.3e vs peak %.3e", V.boundary_value(), peak)
    symbol = (2.0 * np.pi * V.grid.wavenumbers) ** 2 + c
    return LinOperator(V.grid, symbol, -V.values, f"L_schrodinger(c={c:g})", 2.0)


def conjugate(A: DenseMatrix, weights: np.ndarray, label: str) -> DenseMatrix:
    """diag(w)·A·diag(w)"""
    entries = weights[:, None] * A.entries * weights[None, :]
    return DenseMatrix(label, 0.5 * (entries + entries.T), A.grid)


def sandwich(L: LinOperator, eps: float) -> DenseMatrix:
    """L◇_ε = (-∂² + ε²)^{1/4} L (-∂² + ε²)^{1/4}; eps = 0 gives |∂|^{1/2} L |∂|^{1/2}"""
    root = regularized_quarter_root_multiplier(L.grid, eps).basis_diagonal()
    return conjugate(L.assemble(), root, f"{L.label}◇(eps={eps:g})")


def bbm_symmetrize(L0: LinOperator) -> DenseMatrix:
    """(I+M)^{-1/2} L₀ (I+M)^{-1/2}, M = |∂|^s"""
    weights = bessel_multiplier(L0.grid, _exponent(L0), -0.5).basis_diagonal()
    return conjugate(L0.assemble(), weights, f"{L0.label}_sym")


def _exponent(L: LinOperator) -> float:
    if L.dispersion_exponent is None:
        raise ModelMismatchError(f"{L.label}: dispersion exponent unknown, cannot form (I+M)")
    return L.dispersion_exponent


def write_operator(matrix: DenseMatrix, directory: str, stem: str) -> tuple[str, str]:
    path = os.path.join(directory, f"{stem}.bin")
    return path, matrix.write_binary(path)
