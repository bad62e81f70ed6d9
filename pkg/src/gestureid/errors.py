"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class GestureIdError(Exception):
    """Base class for all package errors."""


class DataError(GestureIdError):
    """Malformed input data (corpus files, label sets, shapes)."""


class CorpusFormatError(DataError):
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


class NumericalError(GestureIdError):
    """A numerical routine failed (non-convergence, degenerate problem)."""


class ConvergenceError(NumericalError):
    pass


class ConfigError(GestureIdError):
    """Invalid run configuration; the message names the offending key."""
