"""Exception types shared across the package."""


class TopoclaspError(Exception):
    """Base class for all package errors."""


class FormatError(TopoclaspError):
    """A dataset file is missing or malformed."""


class IntegrityError(TopoclaspError):
    """Dataset files are individually well-formed but mutually inconsistent."""


class ContractError(TopoclaspError):
    """A function was called with inputs violating its preconditions."""


class ConfigError(TopoclaspError):
    """An invalid configuration value."""


class TrainingAborted(TopoclaspError):
    """Training produced a non-finite loss."""
