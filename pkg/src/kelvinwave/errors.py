"""Exception types shared across the package."""


class KelvinWaveError(Exception):
    """Base class for all package errors."""


class LightConeSingular(KelvinWaveError):
    """Raised when an inversion is evaluated on (or too close to) the light cone."""


class InvalidSpec(KelvinWaveError):
    """Raised when a problem or grid specification violates its invariants."""


class CFLViolation(InvalidSpec):
    """Raised when the time step exceeds the stability bound of the stencil."""


class NumericBlowUp(KelvinWaveError):
    """Raised when field values exceed 1e12 or become non-finite during a run."""


class OutOfGrid(KelvinWaveError):
    """Raised when an interpolation point lies outside the solution grid."""


class ConfigError(KelvinWaveError):
    """Raised when a scenario configuration document fails validation."""
