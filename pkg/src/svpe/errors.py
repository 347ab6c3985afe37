class SVPEError(Exception):
    """Base class for contract violations raised by this package."""


class DimensionError(SVPEError, ValueError):
    pass


class PatternError(SVPEError, ValueError):
    """The exposure map does not have the structure an operation needs."""


class PatternFormatError(SVPEError, ValueError):
    pass


class ClassAbsentError(SVPEError, LookupError):
    pass


class NumericError(SVPEError, FloatingPointError):
    pass


class DivergenceError(SVPEError, RuntimeError):
    pass
