# svm01/errors.py


class Svm01Error(Exception):
    """Base class for every error raised by the solver package."""


class InputError(Svm01Error, ValueError):
    pass


class DataFormatError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotPositiveDefinite(Svm01Error, ArithmeticError):
    """A Cholesky pivot was not positive."""


class InfeasibleSparsity(Svm01Error):
    """w has more nonzeros than the sparsity level allows."""
