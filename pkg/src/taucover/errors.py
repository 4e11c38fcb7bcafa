"""Error categories.  Each carries the CLI exit code it maps to."""


class TauCoverError(Exception):
    exit_code = 1
    category = "error"


class ParseError(TauCoverError):
    exit_code = 2
    category = "parse"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class PreconditionError(TauCoverError):
    exit_code = 3
    category = "precondition"


class NotAdmissible(PreconditionError):
    pass


class ShapeMismatch(PreconditionError):
    pass


class NotHomogeneous(PreconditionError):
    pass


class WindowTooSmall(PreconditionError):
    pass


class InconsistentSystem(PreconditionError):
    pass


class BudgetExceeded(TauCoverError):
    exit_code = 4
    category = "budget"


class Inconclusive(TauCoverError):
    exit_code = 5
    category = "inconclusive"


class FieldTooSmall(Inconclusive):
    pass
