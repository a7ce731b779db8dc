"""Exception types shared by every module.

Each class carries a short ``kind`` tag used in diagnostics JSON and a
process exit code used by the command-line front end.
"""

from __future__ import annotations

from typing import Any


class SpfiberError(Exception):
    kind = "error"
    exit_code = 4

    def __init__(self, message: str, **diagnostics: Any) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.kind, "message": str(self), "diagnostics": self.diagnostics}


class InvalidInputError(SpfiberError, ValueError):
    kind = "invalid-input"


class DomainError(SpfiberError, ValueError):
    kind = "domain-error"


class DegenerateInputError(SpfiberError, ValueError):
    kind = "degenerate-input"


class PreconditionError(SpfiberError, ValueError):
    kind = "precondition-error"


class ConfigurationError(SpfiberError, ValueError):
    kind = "configuration-error"


class NumericalFailure(SpfiberError, RuntimeError):
    kind = "numerical-failure"
    exit_code = 3
