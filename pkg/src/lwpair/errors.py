"""Exception types raised by the simulation layers.

Numerical failures deep inside a level-n evaluation carry the level at
which they arose in the ``level`` attribute (``None`` when unknown, e.g.
when re-raised from the compiled planar path).
"""


class SimulationError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level

    def __str__(self):
        base = super().__str__()
        if self.level is not None:
            return f"{base} (level {self.level})"
        return base


class ValidationError(SimulationError, ValueError):
    """Invalid parameters, state, or run configuration."""


class SuperluminalError(ValidationError):
    """A speed reached or exceeded the speed of light."""


class SingularityError(SimulationError):
    """Kernel evaluated at coincident charges or on a vanishing light-cone
    denominator."""


class DegenerateConfigurationError(SimulationError):
    """The composite matrix of the instantaneous acceleration solve is
    ill-conditioned."""


class FlowTooShortError(SimulationError):
    """A delay-root bracket extends past the time span covered by the flow;
    the caller must extend the segment."""

    def __init__(self, message, needed_time=None, level=None):
        super().__init__(message, level=level)
        self.needed_time = needed_time


class NoRootError(SimulationError):
    """No light-cone root inside the hard sub-luminal bound; signals
    superluminal data or a corrupted flow."""


class ConvergenceError(SimulationError):
    """Bisection failed to reach the residual tolerance within the
    iteration cap."""


class IntegrationStallError(SimulationError):
    """Step size underflow; ``segment`` holds the partial solution."""

    def __init__(self, message, segment=None, level=None):
        super().__init__(message, level=level)
        self.segment = segment


class DomainError(SimulationError):
    """Evaluation outside a segment's covered time span."""


class NotApplicableError(SimulationError):
    """Requested observable is undefined for this trajectory."""
