"""Exception hierarchy for the annealing toolkit."""


class AnnealingError(Exception):
    """Base class for every error raised by the numerical core."""


class CapacityError(AnnealingError):
    """Operator or state exceeds the dense-representation qubit limit."""


class DimensionMismatchError(AnnealingError, ValueError):
    """Operator and state dimensions disagree."""


class NonHermitianError(AnnealingError, ValueError):
    """A matrix or expectation value is not Hermitian/real within tolerance."""


class InstanceError(AnnealingError, ValueError):
    """Invalid omega, equation set or instance file."""


class ScheduleError(AnnealingError, ValueError):
    """Schedule evaluated outside [0, T] or built with invalid parameters."""


class IntegrationError(AnnealingError):
    """Norm or trace drift beyond tolerance during time evolution."""


class OptimizationError(AnnealingError):
    """The objective returned a non-finite value."""


class SpectrumError(AnnealingError):
    """Gap analysis failed (all-degenerate curve, non-positive gap)."""


class ReadoutError(AnnealingError):
    """Final-state readout failed."""


class AmbiguousReadoutError(ReadoutError):
    """A bit expectation value lies too close to 1/2 to round."""


class FactorizationError(ReadoutError):
    """The decoded factors do not multiply to omega."""


class DecompositionError(AnnealingError, ValueError):
    """Operator is not a Z-only polynomial of weight at most four."""
