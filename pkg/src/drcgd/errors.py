"""Exception types raised across the package."""


class DrcgdError(Exception):
    """Base class for all package errors."""


class SingularInput(DrcgdError, ValueError):
    """Nearest-point projection onto the Stiefel manifold is not unique."""

    def __init__(self, sigma_min: float, context: str = ""):
        self.sigma_min = sigma_min
        self.context = context
        msg = f"matrix is rank deficient (sigma_min={sigma_min:.3e}); projection onto St(d, r) is not unique"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class DimensionMismatch(DrcgdError, ValueError):
    pass


class InvalidSize(DrcgdError, ValueError):
    pass


class DisconnectedAfterRetries(DrcgdError, RuntimeError):
    pass


class InvalidSpec(DrcgdError, ValueError):
    pass


class TooFewRows(DrcgdError, ValueError):
    pass


class ParseError(DrcgdError, ValueError):
    """Malformed input text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ValidationError(DrcgdError, ValueError):
    """One or more configuration invariants are violated."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SchemaMismatch(DrcgdError, ValueError):
    pass


class UnknownColumn(DrcgdError, KeyError):
    """A metric name that is not a telemetry column."""

    def __init__(self, column: str):
        super().__init__(column)
        self.column = column

    def __str__(self) -> str:
        return f"unknown column {self.column!r}"
