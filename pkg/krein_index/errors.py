"""Exceptions raised by the krein_index toolkit"""


class KreinIndexError(Exception):
    """Base class for every error the toolkit raises on purpose.

    `stage` is filled in by the verdict pipeline so a failure deep inside, say, the ground state solver
    reports which step of the pipeline it came from.
    """
    stage: str = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class GridError(KreinIndexError, ValueError):
    """Bad grid parameters, or fields living on different grids"""


class NonIntegrableInputError(KreinIndexError, ValueError):
    """A mean-zero-only operator (∂_x^{-1}, |∂|^{-α}) was applied to a field with a nonzero mean"""


class ExistenceWindowError(KreinIndexError, ValueError):
    """Parameters outside the range where the solitary wave exists (p >= p_max, c <= 1 for BBM, ...)"""


class WaveSolverError(KreinIndexError):
    """The ground state iteration did not converge"""

    def __init__(self, message: str, last_residual: float, iterations: int) -> None:
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class ModelMismatchError(KreinIndexError, ValueError):
    """A wave of the wrong model was handed to a linearization"""


class AsymmetricMatrixError(KreinIndexError, ValueError):
    """A matrix that should be symmetric is not, within tolerance"""


class FredholmError(KreinIndexError):
    """The right-hand side of a pseudo-inverse solve is not orthogonal to the kernel"""


class ResolutionError(KreinIndexError):
    """The grid does not resolve the wave well enough to identify its translation mode"""


class TheoryConsistencyError(KreinIndexError):
    """The index formula disagrees with the directly computed spectrum"""


class ConfigError(KreinIndexError, ValueError):
    """Invalid run configuration"""
