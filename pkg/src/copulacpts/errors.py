"""Exception hierarchy shared by every module."""


class CopulaCPTSError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParam(CopulaCPTSError, ValueError):
    pass


class InvalidLevel(InvalidParam):
    """A confidence/quantile level outside its admissible range."""


class InvalidInput(InvalidParam):
    """A copula argument outside the unit cube."""


class ShapeMismatch(CopulaCPTSError, ValueError):
    pass


class NonFinite(CopulaCPTSError, ValueError):
    pass


class EmptySubset(CopulaCPTSError, ValueError):
    pass


class InsufficientCalibration(EmptySubset):
    """Raised when a calibration subset needed by a method is empty."""


class ParseError(CopulaCPTSError, ValueError):
    pass


class RaggedSeries(ParseError):
    pass


class SingularSystem(CopulaCPTSError, ArithmeticError):
    pass
