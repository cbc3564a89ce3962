"""Exception hierarchy. Every error carries enough context to locate the fault."""


class InfProjError(Exception):
    """Base class for all package errors."""


class DimensionError(InfProjError, ValueError):
    def __init__(self, index, dim, what="feature"):
        self.index = int(index)
        self.dim = int(dim)
        super().__init__(f"{what} index {self.index} out of range for dimension {self.dim}")


class EmptyDatasetError(InfProjError, ValueError):
    pass


class ParseError(InfProjError, ValueError):
    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class BatchIndexError(InfProjError, IndexError):
    def __init__(self, index, n):
        self.index = int(index)
        self.n = int(n)
        super().__init__(f"sample index {self.index} out of range for {self.n} samples")


class InfeasiblePointError(InfProjError, ValueError):
    pass


class NonFiniteError(InfProjError, FloatingPointError):
    """Raised when an iterate, gradient or evaluation stops being finite."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class DivergenceError(NonFiniteError):
    pass


class ModeMismatchError(InfProjError, ValueError):
    pass


class ConfigError(InfProjError, ValueError):
    pass
