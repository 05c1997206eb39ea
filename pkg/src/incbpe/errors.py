"""Exception hierarchy shared by the library and the CLI."""


class IncBPEError(Exception):
    """Base class for every error raised by incbpe."""


class InvalidInputError(IncBPEError, ValueError):
    pass


class ConfigurationError(IncBPEError, ValueError):
    pass


class InconsistentMergesError(IncBPEError):
    """A merge table cannot be replayed against the given word frequencies."""


class ScheduleStateError(IncBPEError, RuntimeError):
    pass


class MissingComponentError(InvalidInputError):
    def __init__(self, symbol: str, component: str):
        super().__init__(f"component {component!r} of new symbol {symbol!r} is not in the matrix")
        self.symbol = symbol
        self.component = component


class MalformedInputError(InvalidInputError):
    pass


class MalformedInputWarning(UserWarning):
    pass


class NumericError(IncBPEError, ArithmeticError):
    pass


class UndefinedMeanError(InvalidInputError):
    pass
