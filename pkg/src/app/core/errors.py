"""Exception hierarchy shared by the services, the API and the CLI.

Every error carries the CLI exit code and the HTTP status it maps to:
0 ok, 2 input error, 3 resource limit, 4 mathematical precondition failure.
"""

from __future__ import annotations


class LabError(Exception):
    exit_code: int = 1
    http_status: int = 500

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class InputError(LabError):
    exit_code = 2
    http_status = 400


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class ConfigError(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class SupportMismatch(InputError):
    pass


class EmptyMeasure(InputError):
    pass


class InvalidMeasure(InputError):
    pass


class InvalidBeta(InputError):
    pass


class Unsupported(InputError):
    pass


class UnknownFunctional(InputError):
    def __init__(self, functional_id: str) -> None:
        self.functional_id = functional_id
        super().__init__(f"unknown functional id: {functional_id!r}")


class ResourceLimit(LabError):
    exit_code = 3
    http_status = 413


class ExactSolverLimit(ResourceLimit):
    pass


class CostLimit(ResourceLimit):
    pass


class MathPreconditionError(LabError):
    exit_code = 4
    http_status = 422


class NotErgodic(MathPreconditionError):
    pass


class ConvergenceFailure(MathPreconditionError):
    pass


class Degenerate(MathPreconditionError):
    pass


class LyapunovViolation(MathPreconditionError):
    """Raised with every failed inequality and its witnessing state or pair."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = violations
        super().__init__("Lyapunov certificate rejected: " + "; ".join(violations))
