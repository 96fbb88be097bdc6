"""Solitary waves of the fractional KdV and BBM families.

Everything here solves a member of the family

    a·|∂_x|^s U + b·U - κ·U^{p+1} = 0

with (a, b) = (1, 1) for the normalized ground state Q, (1, c) for fKdV at speed c and (c, c-1) for fBBM at
speed c. κ is 1 except for the Benjamin-Ono reference profile, which carries the ½ of its usual normalization.

The power U^{p+1} is formed on a padded grid and projected back (see `padding_factor`), so computed profiles solve
the Fourier-truncated equation and keep its translation invariance.
"""
import logging
import math
import os
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd
import scipy.fft
from json_encoder.json import json_encoder

from krein_index import serialization
from krein_index.errors import ExistenceWindowError, ModelMismatchError, WaveSolverError
from krein_index.spectral_core import (RealField, SpectralGrid, coarsen, inner_product, interpolate, refine,
                                       spectral_tail)

logger = logging.getLogger(__name__)

TRUNCATION_RATIO = 1e-3
"""boundary_value/peak above this marks a profile as truncated by the box"""

RESOLUTION_TOL = 1e-6
"""spectral_tail above this marks a profile as under-resolved by the grid"""

POWER_FLOOR = 1e-14
CLAMPED_MASS_TOL = 1e-10
FIXED_POINT_TOL = 1e-8


class WaveModel(str, Enum):
    FKDV = "FKDV"
    FBBM = "FBBM"
    NORMALIZED = "NORMALIZED"


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the Petviashvili iteration"""
    max_iters: int = 500
    tol: float = 1e-10
    """Target sup-norm of the existence-equation residual"""
    gamma: float = None
    """Stabilizing exponent; None picks (p+1)/p, the optimal value for a pure power nonlinearity"""
    seed_width: float = 2.0
    """Width of the Gaussian the iteration starts from"""

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.gamma is not None and not 1.0 < self.gamma < 3.0:
            raise ValueError(f"gamma must lie in (1, 3), got {self.gamma}")
        if self.seed_width <= 0:
            raise ValueError(f"seed_width must be positive, got {self.seed_width}")

    @classmethod
    def for_dispersion(cls, s: float, **overrides) -> "SolverOptions":
        """Defaults per dispersion order: the local s = 2 problem converges tighter than the nonlocal ones"""
        tol = 1e-10 if s == 2 else 1e-8
        return cls(**{"tol": tol, **overrides})

    def effective_gamma(self, p: float) -> float:
        return self.gamma if self.gamma is not None else (p + 1.0) / p

    def to_dict(self) -> dict:
        return {"max_iters": self.max_iters, "tol": self.tol, "gamma": self.gamma, "seed_width": self.seed_width}


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Samples of a solitary wave with the parameters it was computed for"""
    grid: SpectralGrid
    values: np.ndarray
    s: float
    p: float
    c: float
    model: WaveModel
    residual_norm: float
    """Sup-norm of the existence-equation residual on the grid"""
    boundary_value: float
    """max |U| over the outer 5% of the grid"""
    tolerance: float = None
    """Residual target the profile was accepted at, None for closed forms"""
    nonlinear_coeff: float = 1.0
    spectral_tail: float = 0.0
    """Share of the profile's norm in the top quarter of the grid's wavenumbers"""
    warnings: tuple = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def field(self) -> RealField:
        return RealField(self.grid, self.values)

    @property
    def peak(self) -> float:
        return float(np.max(self.values))

    @property
    def truncated(self) -> bool:
        """The box is too small to hold the wave's tails"""
        return self.boundary_value > TRUNCATION_RATIO * self.peak

    @property
    def under_resolved(self) -> bool:
        return self.spectral_tail > RESOLUTION_TOL

    def mass(self) -> float:
        """⟨U, U⟩"""
        return inner_product(self.field, self.field)

    def to_dict(self) -> dict:
        """Metadata only; the samples go to the CSV"""
        return {
            "s": self.s,
            "p": self.p,
            "c": self.c,
            "model": self.model.value,
            "nonlinear_coeff": self.nonlinear_coeff,
            "residual_norm": self.residual_norm,
            "boundary_value": self.boundary_value,
            "tolerance": self.tolerance,
            "truncated": self.truncated,
            "spectral_tail": self.spectral_tail,
            "under_resolved": self.under_resolved,
            "n": self.grid.n,
            "half_length": self.grid.half_length,
            "warnings": list(self.warnings),
        }


@json_encoder.register(WaveProfile)
def encode_wave_profile(obj):
    """Encoding function for use with json-encoder library"""
    return obj.to_dict()


def p_max(s: float) -> float:
    """Upper end of the existence window 0 < p < p_max(s) of the ground state"""
    if s < 1:
        return 2.0 * s / (1.0 - s)
    return math.inf


def check_existence_window(s: float, p: float) -> None:
    if not 0 < s <= 2:
        raise ExistenceWindowError(f"dispersion order s must lie in (0, 2], got {s}")
    if p <= 0:
        raise ExistenceWindowError(f"nonlinearity p must be positive, got {p}")
    limit = p_max(s)
    if p >= limit:
        raise ExistenceWindowError(f"no ground state for p={p:g}: p must be below p_max({s:g}) = {limit:g}")


def equation_coefficients(model: WaveModel, c: float) -> tuple[float, float]:
    """(a, b) of a·|∂|^s U + b·U - κU^{p+1} = 0 for the given model"""
    if model == WaveModel.NORMALIZED:
        return 1.0, 1.0
    if model == WaveModel.FKDV:
        return 1.0, c
    if model == WaveModel.FBBM:
        return c, c - 1.0
    raise ModelMismatchError(f"unknown wave model {model!r}")


def positive_power(values: np.ndarray, exponent: float) -> tuple[np.ndarray, float]:
    """values**exponent for a positive profile, computed as exp(exponent·log U).

    Samples below POWER_FLOOR·peak are clamped to that floor first. Returns the power and the clamped L1 mass
    relative to ‖U‖₁.
    """
    peak = np.max(np.abs(values))
    if peak == 0:
        return np.zeros_like(values), 0.0
    floor = POWER_FLOOR * peak
    low = values < floor
    clamped_mass = float(np.sum(np.abs(values[low] - floor)) / np.sum(np.abs(values)))
    clamped = np.where(low, floor, values)
    return np.exp(exponent * np.log(clamped)), clamped_mass


def padding_factor(p: float) -> int:
    """Refinement that forms U^{p+1} without aliasing onto the grid's band when p is an integer"""
    return max(2, math.ceil((p + 2.0) / 2.0))


def padded_power(grid: SpectralGrid, values: np.ndarray, exponent: float, factor: int) -> tuple[np.ndarray, float]:
    """positive_power evaluated on a `factor`-times finer grid and projected back onto the grid's band"""
    fine, clamped_mass = positive_power(refine(RealField(grid, values), factor), exponent)
    return coarsen(grid, fine).values, clamped_mass


def _dispersion_symbol(grid: SpectralGrid, s: float) -> np.ndarray:
    return (2.0 * np.pi * np.abs(grid.wavenumbers)) ** s


def _residual(grid: SpectralGrid, values: np.ndarray, s: float, p: float, a: float, b: float, kappa: float) -> float:
    linear = scipy.fft.ifft((a * _dispersion_symbol(grid, s) + b) * scipy.fft.fft(values)).real
    nonlinear, _ = padded_power(grid, values, p + 1.0, padding_factor(p))
    return float(np.max(np.abs(linear - kappa * nonlinear)))


def existence_residual(profile: WaveProfile) -> float:
    """Sup-norm residual of the profile's own existence equation"""
    a, b = equation_coefficients(profile.model, profile.c)
    return _residual(profile.grid, profile.values, profile.s, profile.p, a, b, profile.nonlinear_coeff)


def _recenter(values: np.ndarray) -> np.ndarray:
    # peak to index n/2, which is x = 0
    return np.roll(values, values.size // 2 - int(np.argmax(values)))


def _petviashvili(grid: SpectralGrid, s: float, p: float, a: float, b: float, opts: SolverOptions,
                  start: np.ndarray) -> tuple[np.ndarray, float, tuple]:
    symbol = a * _dispersion_symbol(grid, s) + b
    gamma = opts.effective_gamma(p)
    factor = padding_factor(p)
    values = _recenter(start)
    warnings = []
    residual = math.inf
    stabilizer = math.nan

    for iteration in range(1, opts.max_iters + 1):
        nonlinear, clamped_mass = padded_power(grid, values, p + 1.0, factor)
        values_hat = scipy.fft.fft(values)
        nonlinear_hat = scipy.fft.fft(nonlinear)

        stabilizer = np.sum(symbol * np.abs(values_hat) ** 2) / np.real(np.vdot(nonlinear_hat, values_hat))
        if not np.isfinite(stabilizer) or stabilizer <= 0:
            raise WaveSolverError(
                f"Petviashvili iteration broke down at iteration {iteration} (stabilizing factor {stabilizer})",
                last_residual=residual, iterations=iteration)

        values = _recenter(scipy.fft.ifft(stabilizer ** gamma * nonlinear_hat / symbol).real)
        residual = _residual(grid, values, s, p, a, b, 1.0)
        logger.debug("Petviashvili iteration %d: residual %.3e, factor %.12f", iteration, residual, stabilizer)

        if residual <= opts.tol:
            if abs(stabilizer - 1.0) > FIXED_POINT_TOL:
                warnings.append(f"stabilizing factor {stabilizer:.12f} is not 1 at convergence")
            if clamped_mass > CLAMPED_MASS_TOL:
                warnings.append(f"powers clamped {clamped_mass:.2e} of the L1 mass")
            logger.info("Petviashvili converged in %d iterations, residual %.3e", iteration, residual)
            return values, residual, tuple(warnings)

    raise WaveSolverError(
        f"Petviashvili iteration did not reach tol {opts.tol:g} in {opts.max_iters} iterations "
        f"(last residual {residual:.3e}, stabilizing factor {stabilizer:.6f})",
        last_residual=residual, iterations=opts.max_iters)


def _build_profile(grid: SpectralGrid, values: np.ndarray, s: float, p: float, c: float, model: WaveModel,
                   residual: float, tolerance: float, warnings: tuple = (), nonlinear_coeff: float = 1.0) -> WaveProfile:
    boundary = float(np.max(np.abs(values[grid.outer_mask()])))
    tail = spectral_tail(RealField(grid, values))
    warnings = list(warnings)
    if boundary > TRUNCATION_RATIO * float(np.max(values)):
        msg = f"profile has not decayed at the box edge: boundary/peak = {boundary / np.max(values):.2e}"
        logger.warning(msg)
        warnings.append(msg)
    if tail > RESOLUTION_TOL:
        msg = f"profile is under-resolved: {tail:.2e} of its norm sits in the top quarter of the wavenumbers"
        logger.warning(msg)
        warnings.append(msg)
    return WaveProfile(
        grid=grid, values=values, s=s, p=p, c=c, model=model, residual_norm=residual, boundary_value=boundary,
        tolerance=tolerance, nonlinear_coeff=nonlinear_coeff, spectral_tail=tail, warnings=tuple(warnings))


def _gaussian_seed(grid: SpectralGrid, width: float) -> np.ndarray:
    return np.exp(-(grid.points / width) ** 2)


def solve_ground_state(s: float, p: float, grid: SpectralGrid, opts: SolverOptions = None) -> WaveProfile:
    """Ground state Q of |∂|^s Q + Q - Q^{p+1} = 0, centered at x = 0.

    Raises ExistenceWindowError for p >= p_max(s) and WaveSolverError if the iteration doesn't converge.
    """
    check_existence_window(s, p)
    opts = opts or SolverOptions.for_dispersion(s)
    logger.info("Solving ground state s=%g p=%g on n=%d, half_length=%g", s, p, grid.n, grid.half_length)
    values, residual, warnings = _petviashvili(grid, s, p, 1.0, 1.0, opts, _gaussian_seed(grid, opts.seed_width))
    return _build_profile(grid, values, s, p, 1.0, WaveModel.NORMALIZED, residual, opts.tol, warnings)


def solve_traveling_wave(s: float, p: float, c: float, grid: SpectralGrid, opts: SolverOptions = None) -> WaveProfile:
    """fKdV wave at speed c solved directly, without going through the scaling of Q"""
    check_existence_window(s, p)
    if c <= 0:
        raise ExistenceWindowError(f"fKdV speed must be positive, got {c}")
    opts = opts or SolverOptions.for_dispersion(s)
    width = opts.seed_width / c ** (1.0 / s)
    values, residual, warnings = _petviashvili(grid, s, p, 1.0, c, opts, _gaussian_seed(grid, width))
    return _build_profile(grid, values, s, p, c, WaveModel.FKDV, residual, opts.tol, warnings)


def _rescale(Q: WaveProfile, amplitude: float, stretch: float, c: float, model: WaveModel) -> WaveProfile:
    """amplitude·Q(stretch·x), re-solved on the grid if interpolation left it off the tolerance"""
    grid = Q.grid
    scaled_points = stretch * grid.points
    inside = np.abs(scaled_points) < grid.half_length
    values = np.zeros(grid.n)
    values[inside] = amplitude * interpolate(Q.field, scaled_points[inside])

    a, b = equation_coefficients(model, c)
    residual = _residual(grid, values, Q.s, Q.p, a, b, 1.0)
    tolerance = Q.tolerance if Q.tolerance is not None else SolverOptions.for_dispersion(Q.s).tol
    warnings = ()
    if residual > 10.0 * tolerance:
        logger.info("Scaled profile residual %.3e above %.1e, polishing on the grid", residual, 10.0 * tolerance)
        opts = SolverOptions.for_dispersion(Q.s, tol=tolerance, max_iters=1000)
        values, residual, warnings = _petviashvili(grid, Q.s, Q.p, a, b, opts, values)
    return _build_profile(grid, values, Q.s, Q.p, c, model, residual, tolerance, warnings)


def _require_normalized(Q: WaveProfile) -> None:
    if Q.model != WaveModel.NORMALIZED:
        raise ModelMismatchError(f"expected a NORMALIZED ground state, got {Q.model.value}")


def kdv_wave(Q: WaveProfile, c: float) -> WaveProfile:
    """fKdV wave U_c(x) = c^{1/p} Q(c^{1/s} x) solving |∂|^s U + cU - U^{p+1} = 0"""
    _require_normalized(Q)
    if c <= 0:
        raise ExistenceWindowError(f"fKdV speed must be positive, got {c}")
    if c == 1:
        return replace(Q, model=WaveModel.FKDV)
    return _rescale(Q, c ** (1.0 / Q.p), c ** (1.0 / Q.s), c, WaveModel.FKDV)


def bbm_wave(Q: WaveProfile, c: float) -> WaveProfile:
    """fBBM wave U_c(x) = (c-1)^{1/p} Q(((c-1)/c)^{1/s} x) solving c|∂|^s U + (c-1)U - U^{p+1} = 0"""
    _require_normalized(Q)
    if c <= 1:
        raise ExistenceWindowError(f"fBBM waves need speed c > 1, got {c}")
    return _rescale(Q, (c - 1.0) ** (1.0 / Q.p), ((c - 1.0) / c) ** (1.0 / Q.s), c, WaveModel.FBBM)


def sech_profile(grid: SpectralGrid, p: float, c: float) -> WaveProfile:
    """Closed-form s = 2 (generalized KdV) wave c^{1/p}((p+2)/2)^{1/p} sech^{2/p}(p√c x/2)"""
    if p <= 0 or c <= 0:
        raise ExistenceWindowError(f"sech profile needs p, c > 0, got p={p}, c={c}")
    # sech^{2/p} through exp/log so the far tail underflows to 0 instead of overflowing cosh
    arg = np.abs(p * math.sqrt(c) * grid.points / 2.0)
    log_sech = math.log(2.0) - arg - np.log1p(np.exp(-2.0 * arg))
    values = (c * (p + 2.0) / 2.0) ** (1.0 / p) * np.exp(2.0 / p * log_sech)
    residual = _residual(grid, values, 2.0, p, 1.0, c, 1.0)
    return _build_profile(grid, values, 2.0, p, c, WaveModel.FKDV, residual, None)


def bo_profile(grid: SpectralGrid, c: float) -> WaveProfile:
    """Benjamin-Ono soliton 4c/(1 + c²x²), the solution of |∂|U + cU - ½U² = 0.

    Its algebraic tail makes `residual_norm` depend on the box size; that residual is the truncation error.
    """
    if c <= 0:
        raise ExistenceWindowError(f"Benjamin-Ono speed must be positive, got {c}")
    values = 4.0 * c / (1.0 + (c * grid.points) ** 2)
    residual = _residual(grid, values, 1.0, 1.0, 1.0, c, 0.5)
    return _build_profile(grid, values, 1.0, 1.0, c, WaveModel.FKDV, residual, None, nonlinear_coeff=0.5)


def mass_slope_fd(Q: WaveProfile, c: float, dc: float) -> float:
    """Centered difference of ⟨U_c, U_c⟩ along the fKdV family"""
    if dc <= 0 or c - dc <= 0:
        raise ValueError(f"need 0 < dc < c, got c={c}, dc={dc}")
    return (kdv_wave(Q, c + dc).mass() - kdv_wave(Q, c - dc).mass()) / (2.0 * dc)


def write_profile(profile: WaveProfile, directory: str, stem: str) -> tuple[str, str]:
    """Write `<stem>.csv` (x, U) and the `<stem>.json` metadata sidecar. Returns both paths."""
    csv_path = os.path.join(directory, f"{stem}.csv")
    json_path = os.path.join(directory, f"{stem}.json")
    frame = pd.DataFrame({"x": profile.grid.points, "U": profile.values})
    serialization.write_csv(frame, csv_path)
    serialization.write_json(profile, json_path)
    return csv_path, json_path


def read_profile_metadata(json_path: str) -> dict:
    return serialization.read_json(json_path)
