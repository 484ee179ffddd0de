"""Exception types shared by the engine. Each carries the CLI exit code it maps to."""

from __future__ import annotations

from typing import Optional


class EngineError(Exception):
    exit_code = 1


class ConfigValidationError(EngineError, ValueError):
    """Bad config key/value, violated size relation, or missing required input."""
    exit_code = 2


class GraphParseError(EngineError, ValueError):
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class GraphDomainError(EngineError, ValueError):
    exit_code = 2


class StructuralError(EngineError, ValueError):
    """Two artifacts that should line up (shape, names, labels) do not."""
    exit_code = 2


class LabelReferenceError(StructuralError):
    pass


class TrainingAbortedError(EngineError, RuntimeError):
    exit_code = 1


class StabilityError(EngineError):
    exit_code = 1
