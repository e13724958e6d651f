from typing import Dict, Optional, Sequence, Type


class SVRGError(Exception):
    pass


class InputError(SVRGError):
    """Bad arguments, data or configuration; nothing was computed."""


class DomainError(InputError, ValueError):
    """An argument lies outside the domain of the function."""


class ParseError(InputError):
    """An input file could not be read."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ":".join(str(bit) for bit in (path, line) if bit is not None)
        super().__init__(f"{location}: {message}" if location else message)


class ConfigError(InputError):
    """Unknown or invalid configuration keys."""

    def __init__(self, message: str, unknown: Sequence[str] = ()):
        self.unknown = tuple(unknown)
        super().__init__(message)


class Closed(SVRGError):
    """The worker pool no longer accepts jobs."""


class NumericalError(SVRGError):
    """A numerical routine failed."""


class ConvergenceError(NumericalError):
    """An alternating series hit the term cap before its brackets met."""

    def __init__(self, message: str, lower: float, upper: float, terms: int):
        self.lower = lower
        self.upper = upper
        self.terms = terms
        super().__init__(message)


class TruncationError(NumericalError):
    """The truncation region carries too little mass to sample from."""

    def __init__(self, message: str, mass: float):
        self.mass = mass
        super().__init__(message)


EXIT_CODES: Dict[Type[SVRGError], int] = {
    InputError: 2,
    NumericalError: 3,
}


def exit_code(error: BaseException) -> int:
    for cls in type(error).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1
