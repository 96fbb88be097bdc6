"""Periodic Fourier collocation on [-ℓ, ℓ), standing in for operators on the whole line.

Transforms follow scipy.fft (forward kernel e^{-2πi x ξ}), so ∂_x has symbol 2πiξ and |∂_x|^s has symbol
(2π|ξ|)^s, with ξ the ordinary (not angular) frequency.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft

from krein_index.errors import GridError, NonIntegrableInputError

logger = logging.getLogger(__name__)

MEAN_TOL = 1e-10
"""Relative size of the zero-mode component tolerated by mean-zero-only operators"""

SELF_ADJOINT = "self-adjoint"
SKEW_ADJOINT = "skew-adjoint"


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid of `n` collocation points on [-half_length, half_length)"""
    n: int
    half_length: float

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise GridError(f"n must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise GridError(f"n must be even and >= 8, got {self.n}")
        if not math.isfinite(self.half_length) or self.half_length <= 0:
            raise GridError(f"half_length must be positive, got {self.half_length}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def domain_length(self) -> float:
        return 2.0 * self.half_length

    @property
    def nyquist_index(self) -> int:
        """Position of the Nyquist mode in the FFT layout"""
        return self.n // 2

    @cached_property
    def points(self) -> np.ndarray:
        """Collocation points x_j = -ℓ + j·spacing"""
        pts = -self.half_length + self.spacing * np.arange(self.n)
        pts.setflags(write=False)
        return pts

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """ξ_k = k/(2ℓ) in scipy.fft's native layout: zero mode first, Nyquist (as a negative value) at n/2"""
        xi = scipy.fft.fftfreq(self.n, d=self.spacing)
        xi.setflags(write=False)
        return xi

    def outer_mask(self, fraction: float = 0.05) -> np.ndarray:
        """Boolean mask selecting the outer `fraction` of the domain on both ends"""
        return np.abs(self.points) >= (1.0 - fraction) * self.half_length


def make_grid(n: int, half_length: float) -> SpectralGrid:
    """Build a grid of `n` points on [-half_length, half_length). Raises GridError for odd or small n."""
    return SpectralGrid(n=n, half_length=float(half_length))


@dataclass(frozen=True, eq=False)
class RealField:
    """Samples of a real function at the collocation points of `grid`"""
    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise GridError(f"field has shape {values.shape}, grid expects ({self.grid.n},)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, RealField):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other) -> "RealField":
        return RealField(self.grid, self.values + self._coerce(other))

    def __sub__(self, other) -> "RealField":
        return RealField(self.grid, self.values - self._coerce(other))

    def __mul__(self, other) -> "RealField":
        return RealField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "RealField":
        return RealField(self.grid, -self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def l2_norm(self) -> float:
        return math.sqrt(inner_product(self, self))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def boundary_value(self, fraction: float = 0.05) -> float:
        """max |f| over the outer `fraction` of the grid"""
        return float(np.max(np.abs(self.values[self.grid.outer_mask(fraction)])))


def field_from_function(grid: SpectralGrid, func) -> RealField:
    """Sample a vectorized callable at the collocation points"""
    return RealField(grid, func(grid.points))


def _check_same_grid(f: RealField, g: RealField) -> None:
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")


def _require_mean_zero(f: RealField, operator_name: str) -> None:
    # L2 size of the constant component vs the whole field
    mean_part = abs(f.mean()) * math.sqrt(f.grid.domain_length)
    if mean_part > MEAN_TOL * f.l2_norm():
        raise NonIntegrableInputError(
            f"{operator_name} needs a mean-zero field; zero-mode component {mean_part:.3e} "
            f"exceeds {MEAN_TOL:g} of the field norm {f.l2_norm():.3e}")


def transform(f: RealField) -> np.ndarray:
    """Discrete Fourier coefficients of `f` in the grid's native layout"""
    return scipy.fft.fft(f.values)


def inverse_transform(grid: SpectralGrid, coefficients: np.ndarray) -> RealField:
    return RealField(grid, scipy.fft.ifft(coefficients).real)


@dataclass(frozen=True, eq=False)
class Multiplier:
    """A Fourier multiplier m(ξ) sampled at the grid wavenumbers"""
    grid: SpectralGrid
    symbol_values: np.ndarray
    symbol_name: str
    adjointness: str = SELF_ADJOINT
    mean_zero_only: bool = False
    """Operators undefined on the zero mode (∂_x^{-1}, |∂|^{-α}) refuse fields with a mean"""

    def __post_init__(self) -> None:
        symbol = np.array(self.symbol_values, dtype=complex)
        if symbol.shape != (self.grid.n,):
            raise GridError(f"symbol has shape {symbol.shape}, grid expects ({self.grid.n},)")
        if self.adjointness == SELF_ADJOINT and np.any(symbol.imag != 0.0):
            raise ValueError(f"self-adjoint multiplier {self.symbol_name} has a complex symbol")
        if self.adjointness == SKEW_ADJOINT:
            if np.any(symbol.real != 0.0):
                raise ValueError(f"skew-adjoint multiplier {self.symbol_name} has a real part")
            if not np.allclose(symbol[_mirror_indices(self.grid.n)], np.conj(symbol), rtol=0, atol=1e-13 * (1 + np.max(np.abs(symbol)))):
                raise ValueError(f"skew-adjoint multiplier {self.symbol_name} is not Hermitian-symmetric")
        symbol.setflags(write=False)
        object.__setattr__(self, "symbol_values", symbol)

    @property
    def is_self_adjoint(self) -> bool:
        return self.adjointness == SELF_ADJOINT

    def apply(self, f: RealField) -> RealField:
        _check_grid(self.grid, f)
        if self.mean_zero_only:
            _require_mean_zero(f, self.symbol_name)
        return RealField(self.grid, scipy.fft.ifft(self.symbol_values * scipy.fft.fft(f.values)).real)

    __call__ = apply

    def compose(self, other: "Multiplier") -> "Multiplier":
        """The multiplier of `self ∘ other`"""
        if other.grid != self.grid:
            raise GridError("cannot compose multipliers on different grids")
        skew = (self.adjointness == SKEW_ADJOINT) != (other.adjointness == SKEW_ADJOINT)
        return Multiplier(
            grid=self.grid,
            symbol_values=self.symbol_values * other.symbol_values,
            symbol_name=f"{self.symbol_name}∘{other.symbol_name}",
            adjointness=SKEW_ADJOINT if skew else SELF_ADJOINT,
            mean_zero_only=self.mean_zero_only or other.mean_zero_only)

    def basis_diagonal(self) -> np.ndarray:
        """Diagonal of this (even, real) multiplier in the real Fourier basis, see `fourier_basis`"""
        if not self.is_self_adjoint:
            raise ValueError(f"{self.symbol_name} is not diagonal in the real Fourier basis")
        symbol = self.symbol_values.real
        if not np.allclose(symbol, symbol[_mirror_indices(self.grid.n)], rtol=1e-12, atol=0):
            raise ValueError(f"{self.symbol_name} has an odd part and mixes cos/sin modes")
        return symbol[basis_mode_indices(self.grid)]


def _check_grid(grid: SpectralGrid, f: RealField) -> None:
    if f.grid != grid:
        raise GridError(f"field lives on {f.grid}, operator on {grid}")


def _mirror_indices(n: int) -> np.ndarray:
    """FFT index of -ξ for each index of ξ"""
    return (-np.arange(n)) % n


def _zero_nyquist(grid: SpectralGrid, symbol: np.ndarray) -> np.ndarray:
    # Odd symbols can't act on the real Nyquist mode
    symbol[grid.nyquist_index] = 0.0
    return symbol


def fractional_derivative_multiplier(grid: SpectralGrid, s: float) -> Multiplier:
    """|∂_x|^s with symbol (2π|ξ|)^s"""
    if s < 0:
        raise ValueError(f"fractional order must be >= 0, got {s}")
    symbol = (2.0 * np.pi * np.abs(grid.wavenumbers)) ** s
    return Multiplier(grid, symbol, f"|∂|^{s:g}")


def derivative_multiplier(grid: SpectralGrid) -> Multiplier:
    """∂_x, symbol 2πiξ"""
    symbol = _zero_nyquist(grid, 2j * np.pi * grid.wavenumbers)
    return Multiplier(grid, symbol, "∂", adjointness=SKEW_ADJOINT)


def hilbert_multiplier(grid: SpectralGrid) -> Multiplier:
    """J = ∂_x |∂_x|^{-1}, symbol i·sign(ξ), zero on the zero mode.

    With this transform convention J maps cos(2πξ₀x) to -sin(2πξ₀x), and ∂_x = J|∂_x| holds exactly.
    """
    symbol = _zero_nyquist(grid, 1j * np.sign(grid.wavenumbers))
    return Multiplier(grid, symbol, "J", adjointness=SKEW_ADJOINT)


def antiderivative_multiplier(grid: SpectralGrid) -> Multiplier:
    """∂_x^{-1} on mean-zero fields, symbol 1/(2πiξ) and 0 on the zero mode"""
    xi = grid.wavenumbers
    symbol = np.zeros(grid.n, dtype=complex)
    nonzero = xi != 0
    symbol[nonzero] = 1.0 / (2j * np.pi * xi[nonzero])
    return Multiplier(grid, _zero_nyquist(grid, symbol), "∂^-1", adjointness=SKEW_ADJOINT, mean_zero_only=True)


def inverse_fractional_multiplier(grid: SpectralGrid, alpha: float) -> Multiplier:
    """|∂_x|^{-α} on mean-zero fields"""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    xi = np.abs(grid.wavenumbers)
    symbol = np.zeros(grid.n)
    nonzero = xi != 0
    symbol[nonzero] = (2.0 * np.pi * xi[nonzero]) ** (-alpha)
    return Multiplier(grid, symbol, f"|∂|^-{alpha:g}", mean_zero_only=True)


def regularized_quarter_root_multiplier(grid: SpectralGrid, eps: float) -> Multiplier:
    """(-∂_x² + ε²)^{1/4}; for eps = 0 this is |∂_x|^{1/2}"""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    symbol = (4.0 * np.pi ** 2 * grid.wavenumbers ** 2 + eps ** 2) ** 0.25
    return Multiplier(grid, symbol, f"(-∂²+{eps:g}²)^1/4")


def bessel_multiplier(grid: SpectralGrid, s: float, power: float) -> Multiplier:
    """(I + |∂_x|^s)^power"""
    symbol = (1.0 + (2.0 * np.pi * np.abs(grid.wavenumbers)) ** s) ** power
    return Multiplier(grid, symbol, f"(I+|∂|^{s:g})^{power:g}")


def inner_product(f: RealField, g: RealField) -> float:
    """⟨f, g⟩ = ∫ f g dx by the periodic trapezoidal rule"""
    _check_same_grid(f, g)
    return float(f.grid.spacing * np.dot(f.values, g.values))


def parseval_pairing(f: RealField, g: RealField) -> float:
    """⟨f, g⟩ evaluated on the Fourier side, (spacing/n)·Σ F_k conj(G_k)"""
    _check_same_grid(f, g)
    pairing = np.vdot(transform(g), transform(f)).real
    return float(f.grid.spacing / f.grid.n * pairing)


# Real orthonormal Fourier basis.
# Columns are ordered [1, cos ω₁x, sin ω₁x, cos ω₂x, sin ω₂x, ..., cos ω_{n/2-1}x, sin ω_{n/2-1}x, cos ω_{n/2}x]
# so even multipliers are diagonal and ∂_x is 2x2-block skew. Column 0 (mean) and column n-1 (Nyquist) are
# the modes ∂_x annihilates.

def basis_mode_indices(grid: SpectralGrid) -> np.ndarray:
    """FFT mode index k ≥ 0 represented by each basis column"""
    half = grid.n // 2
    pairs = np.repeat(np.arange(1, half), 2)
    return np.concatenate(([0], pairs, [half]))


def basis_frequencies(grid: SpectralGrid) -> np.ndarray:
    """Angular frequency ω = 2π|ξ| of each basis column"""
    return np.pi * basis_mode_indices(grid) / grid.half_length


def restricted_indices(grid: SpectralGrid) -> slice:
    """Basis columns spanning the mean-zero, Nyquist-free subspace where ∂_x is invertible"""
    return slice(1, grid.n - 1)


def _basis_functions(grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = grid.n
    omega = basis_frequencies(grid)
    phases = np.outer(x, omega)
    values = np.empty((x.size, n))
    values[:, 0] = 1.0 / math.sqrt(n)
    values[:, 1:n - 1:2] = np.cos(phases[:, 1:n - 1:2]) / math.sqrt(n / 2)
    values[:, 2:n - 1:2] = np.sin(phases[:, 2:n - 1:2]) / math.sqrt(n / 2)
    values[:, n - 1] = np.cos(phases[:, n - 1]) / math.sqrt(n)
    return values


@lru_cache(maxsize=8)
def fourier_basis(grid: SpectralGrid) -> np.ndarray:
    """Orthogonal matrix Φ whose columns are the real Fourier modes sampled on the grid"""
    basis = _basis_functions(grid, grid.points)
    basis.setflags(write=False)
    return basis


def analyze(f: RealField) -> np.ndarray:
    """Coefficients of `f` in the real Fourier basis"""
    return fourier_basis(f.grid).T @ f.values


def synthesize(grid: SpectralGrid, coefficients: np.ndarray) -> RealField:
    return RealField(grid, fourier_basis(grid) @ np.real(coefficients))


def interpolate(f: RealField, x: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of `f` at arbitrary points `x` (periodic in 2ℓ)"""
    return _basis_functions(f.grid, np.ravel(x)) @ analyze(f)


def skew_pair_matrix(grid: SpectralGrid, weights: np.ndarray) -> np.ndarray:
    """Block skew matrix with M[cos_k, sin_k] = w_k and M[sin_k, cos_k] = -w_k, k = 1..n/2-1"""
    n = grid.n
    matrix = np.zeros((n, n))
    cos_cols = np.arange(1, n - 1, 2)
    matrix[cos_cols, cos_cols + 1] = weights
    matrix[cos_cols + 1, cos_cols] = -weights
    return matrix


def derivative_matrix(grid: SpectralGrid) -> np.ndarray:
    """∂_x in the real Fourier basis: ∂ cos ωx = -ω sin ωx, ∂ sin ωx = ω cos ωx"""
    omega = np.pi * np.arange(1, grid.n // 2) / grid.half_length
    return skew_pair_matrix(grid, omega)


def hilbert_matrix(grid: SpectralGrid) -> np.ndarray:
    """J in the real Fourier basis: J cos = -sin, J sin = cos"""
    return skew_pair_matrix(grid, np.ones(grid.n // 2 - 1))


def random_band_limited_field(grid: SpectralGrid, rng: np.random.Generator, modes: int = 16,
                              mean_zero: bool = True) -> RealField:
    """Random trigonometric polynomial on the lowest `modes` cos/sin pairs"""
    coefficients = np.zeros(grid.n)
    count = min(2 * modes, grid.n - 2)
    coefficients[1:count + 1] = rng.standard_normal(count)
    if not mean_zero:
        coefficients[0] = rng.standard_normal()
    return synthesize(grid, coefficients)


# Padded grids. Products of band-limited fields are formed on a grid `factor` times finer and projected back,
# which keeps the discrete equations invariant under continuous translations.

def _check_factor(factor: int) -> None:
    if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 1:
        raise GridError(f"refinement factor must be a positive integer, got {factor!r}")


def refine(f: RealField, factor: int) -> np.ndarray:
    """Samples of the interpolant of `f`, without its Nyquist mode, on `factor`·n points over the same box"""
    _check_factor(factor)
    n = f.grid.n
    half = n // 2
    coefficients = scipy.fft.fft(f.values)
    padded = np.zeros(n * factor, dtype=complex)
    padded[:half] = coefficients[:half]
    padded[-(half - 1):] = coefficients[half + 1:]
    return factor * scipy.fft.ifft(padded).real


def coarsen(grid: SpectralGrid, fine_values: np.ndarray) -> RealField:
    """L² projection of fine samples onto the grid's modes below Nyquist; the inverse of `refine` on that band"""
    fine_values = np.asarray(fine_values, dtype=float)
    factor, remainder = divmod(fine_values.size, grid.n)
    if remainder or factor < 1:
        raise GridError(f"{fine_values.size} samples do not refine a grid of n={grid.n}")
    half = grid.n // 2
    fine_coefficients = scipy.fft.fft(fine_values)
    coefficients = np.zeros(grid.n, dtype=complex)
    coefficients[:half] = fine_coefficients[:half]
    coefficients[half + 1:] = fine_coefficients[-(half - 1):]
    return RealField(grid, scipy.fft.ifft(coefficients).real / factor)


def spectral_tail(f: RealField, band: float = 0.25) -> float:
    """Share of ‖f‖ carried by the top `band` of the resolved wavenumbers"""
    if not 0 < band < 1:
        raise ValueError(f"band must lie in (0, 1), got {band}")
    coefficients = np.abs(scipy.fft.fft(f.values))
    total = float(np.linalg.norm(coefficients))
    if total == 0:
        return 0.0
    top = np.abs(f.grid.wavenumbers) >= (1.0 - band) * np.max(np.abs(f.grid.wavenumbers))
    return float(np.linalg.norm(coefficients[top])) / total
