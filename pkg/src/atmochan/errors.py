"""Exception types shared across the package."""


class ChannelError(Exception):
    """Base class for all package errors."""


class InvalidArgument(ChannelError, ValueError):
    pass


class ConfigError(ChannelError, ValueError):
    pass


class NumericalGuard(ChannelError, ArithmeticError):
    """A numerical sanity guard tripped (cutoff, aliasing, solver failure)."""


class CutoffInsufficient(NumericalGuard):
    def __init__(self, message, tail_mass=None):
        super().__init__(message)
        self.tail_mass = tail_mass


class UndefinedStatistic(NumericalGuard):
    pass


class EmptySelection(ChannelError):
    def __init__(self, message, survivors=0):
        super().__init__(message)
        self.survivors = survivors


class OutOfRange(ChannelError):
    def __init__(self, message, extreme=None):
        super().__init__(message)
        self.extreme = extreme
