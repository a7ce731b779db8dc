"""Small argument checks used at module boundaries."""

from __future__ import annotations

import math

from .errors import DomainError, InvalidInputError

P_MIN, P_MAX = 2.0, 6.0


def check_exponent(p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or not P_MIN < p < P_MAX:
        raise DomainError(f"exponent p={p} must lie in (2, 6)", p=p)
    return p


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a positive finite number, got {value}", **{name: value})
    return value


def check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value}", **{name: value})
    return value


def near(p: float, target: float, tol: float = 1e-12) -> bool:
    return abs(p - target) <= tol
