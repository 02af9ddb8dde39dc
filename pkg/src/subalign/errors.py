"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`SubalignError`; the CLI maps the subclasses onto exit codes.
"""


class SubalignError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidInputError(SubalignError, ValueError):
    """Input shape, range or configuration is not acceptable."""

    exit_code = 2


class StratificationError(InvalidInputError):
    """A class has too few samples for the requested stratified split."""


class ParseError(InvalidInputError):
    """A data file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DegenerateDataError(InvalidInputError):
    """Data carries no usable geometric information (e.g. all points equal)."""


class NumericError(SubalignError, ArithmeticError):
    """A numerical routine failed or produced non-finite output."""

    exit_code = 3
