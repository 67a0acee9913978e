"""Exception types shared across the solver, verification and simulation layers."""


class DecarbError(Exception):
    """Base class for all library errors."""


class ValidationError(DecarbError):
    """Base class for parameter/configuration rejection (CLI exit code 1)."""


class MissingField(ValidationError):
    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"missing required field '{field}'")


class UnexpectedField(ValidationError):
    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"field '{field}' is not allowed for this model kind")


class OutOfRange(ValidationError):
    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"field '{field}' is out of range")


class WrongKind(ValidationError):
    """Operation applied to a model kind that does not support it."""


class ConfigMismatch(ValidationError):
    """Simulation configuration inconsistent with the model or solved inputs."""


class NumericalError(DecarbError):
    """Base class for runtime numerical failures (CLI exit code 2)."""


class BlowUp(NumericalError):
    """Backward integration escaped to infinity before reaching t = 0."""

    def __init__(self, t_escape: float, message: str | None = None):
        self.t_escape = t_escape
        super().__init__(message or f"coefficient blow-up detected at t = {t_escape:.6g}")


class NonFinitePath(NumericalError):
    """A simulated path produced a non-finite state or payment."""

    def __init__(self, path_index: int, t: float):
        self.path_index = path_index
        self.t = t
        super().__init__(f"non-finite value on path {path_index} at t = {t:.6g}")


class MaximizerOnBoundary(NumericalError):
    """Grid search hit the search box boundary; the box was too small."""


class OutOfHorizon(DecarbError):
    """Time argument outside the solved interval [0, T]."""


class Empty(DecarbError):
    """Empty sample set where at least one observation is required."""
