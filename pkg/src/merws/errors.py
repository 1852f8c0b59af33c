"""Exception hierarchy for the MERWS laboratory."""


class MerwsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameters(MerwsError, ValueError):
    pass


class RejectsDimension(InvalidParameters):
    pass


class RejectsStop(InvalidParameters):
    pass


class RejectsSimplex(InvalidParameters):
    pass


class WrongRegime(MerwsError, ValueError):
    pass


class DimensionMismatch(MerwsError, ValueError):
    pass


class CheckpointOutOfRange(MerwsError, ValueError):
    pass


class NonPositiveArgument(MerwsError, ValueError):
    pass


class OutOfEvaluationRange(MerwsError, ValueError):
    """A special-function evaluation could not be certified at the requested point."""


class NegativeIncrement(MerwsError, ArithmeticError):
    """A conditional covariance trace came out negative: the walk state is corrupt."""


class TooLarge(MerwsError, ValueError):
    pass


class InsufficientHorizon(MerwsError, ValueError):
    pass


class ConfigInvalid(MerwsError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class IoFailure(MerwsError, OSError):
    """An artifact could not be written."""
