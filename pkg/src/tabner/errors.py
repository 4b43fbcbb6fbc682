"""Exception hierarchy shared by all tabner modules."""


class TabnerError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 2


class ParseError(TabnerError):
    pass


class ConsistencyError(TabnerError):
    pass


class EmptyInputError(TabnerError):
    pass


class AlignmentError(TabnerError):
    pass


class PreconditionError(TabnerError):
    pass


class NoQuantityError(TabnerError):
    """Raised when an equipment name has no applicable quantity."""


class ProbeError(TabnerError):
    pass


class ConfigurationError(TabnerError):
    exit_code = 1


class SequenceTooLongError(ConfigurationError):
    pass


class DivergenceError(TabnerError):
    exit_code = 3
