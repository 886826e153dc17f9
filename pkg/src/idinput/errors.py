"""Exception types shared across the package."""


class RankDeficiencyError(ValueError):
    """Data matrix is singular or too ill-conditioned to invert."""


class SizeError(ValueError):
    """Problem instance exceeds a hard size limit."""


class TruncationError(ValueError):
    """Requested SVD truncation rank exceeds the numerical rank."""


class SignalError(ValueError):
    """Excitation signal cannot be generated under the given constraints."""


class AllocationError(SignalError):
    """Frequency band too narrow to assign disjoint harmonics per channel."""


class SlewError(SignalError):
    """Generated signal violates the per-step slew bound."""


class PlannerError(RuntimeError):
    """Convex subproblem solver failed for numerical reasons."""


class ConfigError(ValueError):
    """Experiment configuration file is missing, malformed, or invalid."""
