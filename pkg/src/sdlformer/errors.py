"""Exception types shared across the package.

Every error carries a short ``kind`` used by the command line to print a
single machine-parsable reason prefix.
"""


class SDLFError(Exception):
    kind = "error"


class ShapeError(SDLFError, ValueError):
    kind = "shape"


class ConfigError(SDLFError, ValueError):
    kind = "config"


class ContractError(SDLFError, RuntimeError):
    kind = "contract"


class ResampleError(SDLFError, RuntimeError):
    """Raised when a k-space split leaves the loss partition empty."""

    kind = "resample"


class FormatError(SDLFError, ValueError):
    kind = "format"


class NonFiniteError(SDLFError, FloatingPointError):
    kind = "nonfinite"
