"""Exception hierarchy shared by the analysis modules and the CLI."""

from typing import List, Optional, Sequence, Tuple


class ChainspecError(Exception):
    """Base class for every failure raised by chainspec."""


class DomainError(ChainspecError, ValueError):
    """Point outside the domain, mismatched space tags or an empty set."""


class CapacityError(ChainspecError):
    """Requested sample exceeds the configured point budget."""


class ConfigError(ChainspecError):
    """Invalid analysis configuration."""


class ProjectionError(ChainspecError):
    """The Hausdorff projection could not build a valid level."""

    def __init__(self, message: str, level: Optional[int] = None,
                 pair: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.level = level
        self.pair = pair


class ScheduleExhaustedError(ProjectionError):
    """No chain of the family qualifies for the next projection step."""

    def __init__(self, message: str, level: int, epsilon: float,
                 isolated: Sequence[Sequence[float]] = ()):
        super().__init__(message, level=level)
        self.epsilon = epsilon
        self.isolated: List[Tuple[float, ...]] = [tuple(p) for p in isolated]


class ConleyOrderError(ChainspecError):
    """Approximate Conley order is not antisymmetric at this schedule."""

    def __init__(self, message: str, pair: Tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class HypothesisError(ChainspecError):
    """A detector or decomposition refused because its hypotheses failed."""


class DecompositionError(ChainspecError):
    """Middle part of an attractor/repeller split is not a single orbit."""


class BlockTheoremError(ChainspecError):
    """Component blocks of a stabilized order are not convex or not linearly ordered."""

    def __init__(self, message: str, pair: Tuple[object, object]):
        super().__init__(message)
        self.pair = pair
