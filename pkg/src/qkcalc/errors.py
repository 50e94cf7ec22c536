"""Exception types raised across the toolkit."""

__all__ = [
    "QkError",
    "NotSelfAdjoint",
    "AlgebraMismatch",
    "DefectTooLarge",
    "PropagationExceeded",
    "TooFarApart",
    "InsufficientSampling",
    "BadRelaxation",
    "UnsupportedAlgebra",
    "PathTooCoarse",
    "WindowTooSmall",
    "OutOfWindow",
    "Explosion",
    "ConfigError",
    "IoError",
]


class QkError(Exception):
    """Base class of every error raised by qkcalc."""


class NotSelfAdjoint(QkError, ValueError):
    """Matrix is too far from self-adjoint to symmetrize."""

    def __init__(self, defect: float):
        super().__init__(f"self-adjointness defect {defect:.3e} exceeds tolerance")
        self.defect = defect


class AlgebraMismatch(QkError, ValueError):
    """Operands live in different algebras."""


class DefectTooLarge(QkError, ValueError):
    """Measured defect is not below the requested epsilon."""

    def __init__(self, measured: float, epsilon: float):
        super().__init__(f"defect {measured:.6e} is not < epsilon {epsilon:.6e}")
        self.measured = measured
        self.epsilon = epsilon


class PropagationExceeded(QkError, ValueError):
    """Measured propagation is larger than the requested radius."""

    def __init__(self, measured: float, radius: float):
        super().__init__(f"propagation {measured:g} exceeds radius {radius:g}")
        self.measured = measured
        self.radius = radius


class TooFarApart(QkError, ValueError):
    """Projections are not within 1/16 of each other."""

    def __init__(self, distance: float):
        super().__init__(f"distance {distance:.6e} is not < 1/16")
        self.distance = distance


class InsufficientSampling(QkError, RuntimeError):
    """Grid refinement hit its cap before the step condition held."""


class BadRelaxation(QkError, ValueError):
    """Relaxation parameters go the wrong way or leave (0, 1/4)."""


class UnsupportedAlgebra(QkError, TypeError):
    """No computable invariant model exists for this algebra kind."""


class PathTooCoarse(QkError, ValueError):
    """Path samples are too far apart to certify the lifting step bound."""


class WindowTooSmall(QkError, ValueError):
    """Truncation window cannot hold the requested band structure."""


class OutOfWindow(QkError, ValueError):
    """Group element lies outside the declared radius window."""


class Explosion(QkError, RuntimeError):
    """Enumeration exceeded its configured cap."""


class ConfigError(QkError, ValueError):
    """Invalid suite configuration."""


class IoError(QkError, OSError):
    """Input file missing or unreadable."""

    def __init__(self, path, reason: str = "cannot read"):
        super().__init__(f"{reason}: {path}")
        self.path = str(path)
