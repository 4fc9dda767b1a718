"""Exception hierarchy shared by the simulator, solver and CLI."""

from __future__ import annotations


class AimdAllocError(Exception):
    """Base class for all package errors."""

    def to_record(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(AimdAllocError, ValueError):
    """Invalid configuration. ``errors`` lists every violation found, each
    prefixed with the offending field path."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))

    def to_record(self) -> dict:
        record = super().to_record()
        record["details"] = self.errors
        return record


class DimensionError(AimdAllocError, ValueError):
    def __init__(self, expected: int, actual: int, what: str = "allocation vector"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has length {actual}, expected m={expected}")

    def to_record(self) -> dict:
        record = super().to_record()
        record["expected"] = self.expected
        record["actual"] = self.actual
        return record


class SolverError(AimdAllocError, RuntimeError):
    """The centralized solver hit a non-finite cost or gradient."""

    def __init__(self, message: str, point=None):
        self.point = point
        super().__init__(message)

    def to_record(self) -> dict:
        record = super().to_record()
        if self.point is not None:
            record["point"] = [[float(v) for v in row] for row in self.point]
        return record
