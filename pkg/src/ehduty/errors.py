"""Exception hierarchy shared by all ehduty modules."""


class EhdutyError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EhdutyError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigError(EhdutyError, ValueError):
    """Invalid configuration: bad parameter values or inconsistent settings."""


class ModelInconsistencyError(EhdutyError):
    """A transition probability computed from the model fell outside [0, 1]."""

    def __init__(self, message, entry=None, inputs=None):
        super().__init__(message)
        self.entry = entry
        self.inputs = inputs or {}


class DegenerateChainError(EhdutyError):
    """The Markov chain has no unique stationary distribution."""

    def __init__(self, message, classes=None):
        super().__init__(message)
        self.classes = classes or []


class IterationLimitError(EhdutyError):
    """A fixed-point iteration failed to converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class ParseError(ConfigError):
    """A configuration document could not be parsed."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
