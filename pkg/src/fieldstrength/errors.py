"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FieldStrengthError(Exception):
    exit_code = 1


class InputError(FieldStrengthError):
    """Missing or unreadable input, bad command-line values."""

    exit_code = 2


class DataValidationError(FieldStrengthError):
    """Input data violates a schema rule or a domain invariant."""

    exit_code = 3

    def __init__(self, message: str, *, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class InvariantViolation(FieldStrengthError):
    """An internal consistency check failed after computation."""

    exit_code = 4
