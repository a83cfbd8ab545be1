"""Exception types raised across the package."""


class CGDAError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CGDAError, ValueError):
    pass


class ParseError(CGDAError, ValueError):
    """Malformed input file. Message names the file and line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class EmptyIntervalError(CGDAError, ValueError):
    def __init__(self, interval, n):
        super().__init__(f"interval {interval} of {n} contains no samples; choose a larger T_min")
        self.interval = interval


class BoundsError(CGDAError, ValueError):
    def __init__(self, joint, value, lo, hi):
        super().__init__(f"joint {joint} = {value:.6g} deg outside bounds [{lo}, {hi}]")
        self.joint = joint


class ConfigError(CGDAError, ValueError):
    pass


class SchemaError(CGDAError, ValueError):
    pass


class UnreachableError(CGDAError, ValueError):
    pass


class FitnessError(CGDAError, RuntimeError):
    """A fitness function raised; the message carries the evaluation context."""
