"""Exception hierarchy shared by every toriclab module."""


class ToricLabError(Exception):
    """Base class for all library errors."""


class ContractViolation(ToricLabError, ValueError):
    """An operation was called outside its documented precondition."""


class OddParity(ToricLabError):
    """A syndrome channel holds an odd number of defects and cannot be perfectly matched."""


class DecodeFailure(ToricLabError):
    """A decoder could not produce a recovery for the given syndrome."""


class NoCrossing(ToricLabError):
    """Two logical-error-rate curves do not cross inside the evaluated grid."""


class IncompatibleModel(ToricLabError):
    """Model weights do not fit the requested configuration."""

    def __init__(self, message, names=()):
        super().__init__(message)
        self.names = list(names)


class FormatError(ToricLabError):
    """A binary file is truncated, has the wrong magic or an unsupported version."""


class TrainingDiverged(ToricLabError):
    """The training loss became non-finite."""


class ConfigError(ToricLabError, ValueError):
    """A configuration file or option value is malformed."""
