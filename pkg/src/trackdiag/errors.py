"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ConvergenceError(RuntimeError):
    """SMO hit its iteration cap before the KKT gap closed.

    ``diagnostics`` holds the best-so-far state (iterations, gap, alpha, bias).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
