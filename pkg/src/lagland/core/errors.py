"""Exception hierarchy of the verification kernel."""
from typing import Any


class LaglandError(Exception):
    """Base class of all errors raised by lagland."""


class DimensionError(LaglandError, ValueError):
    """Vector or frame sizes do not match the symplectic structure."""


class DomainError(LaglandError, ValueError):
    """A map was evaluated outside its domain or produced non-finite values."""


class SeamError(LaglandError, ValueError):
    """A stencil or regularity test straddles the seam of a piecewise map.

    Attributes:
        one_sided: results of the computation on each side of the seam,
            keyed by side (+1 / -1), when they were computed.
    """

    def __init__(self, message: str, one_sided: dict[int, Any] | None = None):
        super().__init__(message)
        self.one_sided = one_sided or {}


class RankDeficiencyError(LaglandError, ValueError):
    """The differential drops rank: the point is critical.

    Attributes:
        singular_values: singular values of the Jacobian at the point.
    """

    def __init__(self, message: str, singular_values: Any = None):
        super().__init__(message)
        self.singular_values = singular_values


class ConvergenceError(LaglandError, RuntimeError):
    """Newton, Gauss-Newton or a continuation did not converge."""


class RegionError(LaglandError, ValueError):
    """A point or loop violates the region it is required to lie in."""


class ClosednessError(LaglandError, ValueError):
    """A 1-form that must be closed has a numerically non-zero curl."""


class TransversalityError(LaglandError, ValueError):
    """Two Lagrangian planes share a direction (eigenvalue close to 1)."""


class FrameError(LaglandError, ValueError):
    """A frame is not Lagrangian or a frame-independent quantity depends on the frame."""


class CensusError(LaglandError, RuntimeError):
    """The sampled fixed set is too small to count components."""


class CoverageError(LaglandError, RuntimeError):
    """A fiber exploration did not reach enough of the fiber.

    Attributes:
        coverage: fraction of exploration seeds that converged.
        count: the number of fixed points found so far.
    """

    def __init__(self, message: str, coverage: float, count: int):
        super().__init__(message)
        self.coverage = coverage
        self.count = count


class MonodromyError(LaglandError, RuntimeError):
    """Transported periods are not an integral change of basis."""


class ConfigError(LaglandError, ValueError):
    """Unknown model or suite, or an invalid run configuration."""
