"""Exception types shared across the package."""


class ItecountError(Exception):
    """Base class for all package-specific errors."""


class OutOfRange(ItecountError):
    """Argument outside the supported evaluation domain."""


class ZeroOnBoundary(ItecountError):
    """A zero of the function lies on (or numerically too close to) a contour.

    Callers are expected to perturb the offending rectangle and retry.
    """


class NonConvergent(ItecountError):
    """Adaptive refinement exhausted its evaluation budget."""


class InvalidContrast(ItecountError):
    """Contrast violates its admissibility constraints."""


class StiffFailure(ItecountError):
    """Radial ODE integration exceeded its step budget."""


class DegenerateRoot(ItecountError):
    """A symbol root sits on (or numerically at) the real axis / a double point."""


class ScanFailed(ItecountError):
    """An ellipticity scan found a nonpositive minimum (should be impossible)."""


class BadDelta(ItecountError):
    """Covering parameter delta outside (0, Im omega0)."""


class BadRadius(ItecountError):
    """Requested radius too small for the configured scale cutoff."""


class CoverageGap(ItecountError):
    """A sampled sector point escaped the rectangle covering (with witness)."""

    def __init__(self, point, message=""):
        self.point = point
        super().__init__(message or f"sector point {point} not covered")


class EmptyWindow(ItecountError):
    """Phase-space window level is below the symbol minimum."""


class UncertifiedCutoff(ItecountError):
    """Angular cutoff certification failed for the requested radius."""


class ConfigError(ItecountError):
    """Malformed run configuration."""
