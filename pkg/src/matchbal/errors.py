"""Exception types raised across the toolkit."""


class MatchbalError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpec(MatchbalError, ValueError):
    pass


class ConstructionFailed(MatchbalError, RuntimeError):
    pass


class NumericalFailure(MatchbalError, ArithmeticError):
    pass


class IncompatibleScheme(MatchbalError, ValueError):
    pass


class NonIntegerLoad(MatchbalError, ValueError):
    pass


class LogTooShort(MatchbalError, ValueError):
    pass


class QuadratureFailure(MatchbalError, ArithmeticError):
    pass


class TruncationNotReached(MatchbalError, RuntimeError):
    pass


class ThresholdNotMet(MatchbalError, ValueError):
    pass
