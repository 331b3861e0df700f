"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
I/O problems exit 2 and numerical failures exit 3.
"""


class NewmaError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NewmaError, ValueError):
    """Invalid hyperparameters or inconsistent specifications."""


class InputError(NewmaError, ValueError):
    """A sample or array does not match what the consumer expects."""


class DegenerateBandwidthError(ConfigurationError):
    """The median pairwise distance of the calibration data is zero."""


class UnsupportedOperationError(NewmaError, TypeError):
    """The operation is not defined for this kind of object."""


class NumericalError(NewmaError, ArithmeticError):
    """A linear solve or iteration failed to reach its tolerance."""


class ResourceLimitError(NumericalError):
    """A computation would exceed a configured size cap."""
