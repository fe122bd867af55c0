"""Exception types shared across the package."""


class FlipFlowError(Exception):
    """Base class for all library errors."""


class TimeOutOfRange(FlipFlowError):
    """Queried a class path outside its validity window."""


class NonPositiveDensity(FlipFlowError):
    """A factor of the metric volume density dropped to or below the floor."""


class StepRejected(FlipFlowError):
    """Explicit step violates the diffusion stability bound."""


class ConvexityLoss(FlipFlowError):
    """The evolved potential lost strict convexity (u'' <= floor)."""


class StepFailure(FlipFlowError):
    """The time stepper could not produce an accepted step."""


class NotAFlip(FlipFlowError):
    """Flip continuation requested on a non-flip singular event."""


class DegenerateWindow(FlipFlowError):
    """Exponent fit window contains underflowed or non-positive data."""


class EmptyWeights(FlipFlowError):
    """Quotient weight lists must be nonempty."""


class ConfigError(FlipFlowError):
    """Scenario configuration is malformed or inconsistent."""
