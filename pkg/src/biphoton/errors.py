"""Exception types shared across the package.

Everything raised on purpose derives from BiphotonError so callers can
catch one base class at the CLI boundary and map it to an exit code.
"""


class BiphotonError(Exception):
    """Base class for all errors raised by this package."""


class ParameterDomainError(BiphotonError):
    """A physical parameter is outside its valid domain (e.g. w0 <= 0)."""


class GridError(BiphotonError):
    """A requested evaluation grid is unusable (truncates the state, empty,
    non-monotonic, or otherwise malformed)."""


class RefinementError(BiphotonError):
    """Quadrature refinement failed to converge within the allowed doublings."""


class SamplingError(BiphotonError):
    """A Monte Carlo estimate did not reach the required statistical accuracy."""


class FitError(BiphotonError):
    """Nonlinear fit failed to converge or produced an invalid result."""


class DegenerateFitError(FitError):
    """The data cannot constrain the model (rank-deficient design)."""


class InsufficientDataError(BiphotonError):
    """Not enough usable data points for the requested operation."""


class SaturationError(BiphotonError):
    """Accumulated counts exceed the 16-bit frame depth."""


class FormatError(BiphotonError):
    """A serialized frame stack is corrupt or has an unsupported layout."""


class ConfigError(BiphotonError):
    """A configuration file or CLI parameter set is invalid."""
