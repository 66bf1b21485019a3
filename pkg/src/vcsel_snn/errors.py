"""Exception types raised across the package."""


class SNNError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SNNError, ValueError):
    pass


class InvalidDimension(SNNError, ValueError):
    pass


class EmptyInput(SNNError, ValueError):
    pass


class NonFiniteState(SNNError, FloatingPointError):
    """Integrator produced NaN/inf or an unbounded carrier variable."""


class EmptyDrive(EmptyInput):
    pass


class NoConvergence(SNNError, RuntimeError):
    pass


class NoExcitablePointFound(SNNError, RuntimeError):
    pass


class LayoutMismatch(SNNError, ValueError):
    pass


class EmptyTrace(EmptyInput):
    pass


class EmptyTrainingSet(EmptyInput):
    pass


class ParseError(SNNError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ClassCountError(SNNError, ValueError):
    pass


class InvalidSize(SNNError, ValueError):
    pass


class CalibrationMissing(SNNError, RuntimeError):
    pass


class ConfigError(SNNError, ValueError):
    pass
