"""Closed-form constants and quotients shared by the fiber and threshold code."""

from __future__ import annotations

import math

from ._validation import check_exponent, near
from .errors import DomainError

EIGHT_THIRDS = 8.0 / 3.0
TEN_THIRDS = 10.0 / 3.0
P_THREE_TOL = 1e-9


def fiber_exponent(p: float) -> float:
    """Power of ``t`` multiplying the Lp term of the fiber map."""
    return 1.5 * p - 3.0


def nehari_lp_factor(p: float) -> float:
    """Coefficient of ``lambda C`` in ``phi'(1)``."""
    return 3.0 * (p - 2.0) / (2.0 * p)


def curvature_lp_factor(p: float) -> float:
    """Coefficient of ``lambda C`` in ``phi''(1)``."""
    return 3.0 * (p - 2.0) * (3.0 * p - 8.0) / (4.0 * p)


def _power_product(*pairs: tuple[float, float]) -> float:
    """``prod(base ** exponent)`` evaluated in log space; overflow gives inf."""
    log_value = sum(exponent * math.log(base) for base, exponent in pairs)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def _require_not_three(p: float) -> None:
    if abs(p - 3.0) <= P_THREE_TOL:
        raise DomainError("this quantity is singular at p = 3", p=p)


def rayleigh_value(grad_sq: float, hartree: float, lp: float, q: float, lam: float, p: float) -> float:
    """Nonlinear Rayleigh quotient from integrals of a unit-mass profile."""
    p = check_exponent(p)
    _require_not_three(p)
    d = p - 3.0
    return _power_product(
        (grad_sq, (3.0 * p - 8.0) / (4.0 * d)),
        (q * hartree, (10.0 - 3.0 * p) / (4.0 * d)),
        (lam * lp, -1.0 / (2.0 * d)),
    )


def rayleigh_value_eight_thirds(hartree: float, lp: float, q: float, lam: float) -> float:
    """The quotient at ``p = 8/3``, where the gradient drops out."""
    return (lam * lp) ** 1.5 / (q * hartree) ** 1.5


def tilde_prefactor(p: float) -> float:
    """Ratio of the mass threshold ``r~(u)`` to the Rayleigh quotient.

    This form stays finite at ``p = 8/3``, where it equals ``2^{-3/2}``.
    """
    p = check_exponent(p)
    _require_not_three(p)
    d = p - 3.0
    return _power_product((p / (2.0 * (p - 2.0)), 1.0 / (2.0 * d)), (2.0, (3.0 * p - 8.0) / (4.0 * d)))


def _check_open_middle(p: float, what: str) -> None:
    if not EIGHT_THIRDS < p < TEN_THIRDS:
        raise DomainError(f"{what} is defined for p in (8/3, 10/3)", p=p)
    _require_not_three(p)


def zero_prefactor(p: float) -> float:
    """Ratio of ``r0(u)`` (where the fiber minimum value is zero) to the quotient."""
    p = check_exponent(p)
    _check_open_middle(p, "r0(u)")
    d = p - 3.0
    return _power_product(
        (2.0 * (10.0 - 3.0 * p) / (3.0 * p - 8.0), (3.0 * p - 10.0) / (4.0 * d)),
        (p / (3.0 * p - 8.0), 1.0 / (2.0 * d)),
    )


def star_prefactor(p: float) -> float:
    """Ratio of ``r(u)`` (where the fiber has an inflection critical point) to the quotient."""
    p = check_exponent(p)
    _check_open_middle(p, "r(u)")
    d = p - 3.0
    return _power_product(
        (4.0 * (10.0 - 3.0 * p) / (3.0 * p - 8.0), (3.0 * p - 10.0) / (4.0 * d)),
        (4.0 * p / (3.0 * (p - 2.0) * (3.0 * p - 8.0)), 1.0 / (2.0 * d)),
    )


def bar_prefactor(p: float) -> float:
    """Ratio of ``r-(u)`` (stationary mass of the upper fiber energy) to the quotient."""
    p = check_exponent(p)
    if p < TEN_THIRDS - 1e-12:
        raise DomainError("r-(u) is defined for p in [10/3, 6)", p=p)
    d = p - 3.0
    return _power_product(
        (2.0 * (6.0 - p) / (5.0 * p - 12.0), (3.0 * p - 10.0) / (4.0 * d)),
        (3.0 * p / (5.0 * p - 12.0), 1.0 / (2.0 * d)),
    )


LAMBDA_ZERO_PREFACTOR = math.sqrt(4.5)
LAMBDA_STAR_PREFACTOR = 2.0


def lions_quotient(grad_sq: float, hartree: float, lp: float) -> float:
    """``(A B)^{1/2} / C`` for ``p = 3``; its infimum sets both lambda thresholds."""
    return math.sqrt(grad_sq * hartree) / lp


def p_zero() -> float:
    """Larger root of ``-27 x^2 + 146 x - 192``."""
    return (73.0 + math.sqrt(145.0)) / 27.0


def gn_quotient(mass: float, grad_sq: float, lp: float, p: float) -> float:
    """``C / (A^{3(p-2)/4} M^{(6-p)/4})``, bounded above by the GN constant."""
    return lp / (grad_sq ** (0.75 * (p - 2.0)) * mass ** ((6.0 - p) / 4.0))


def gn_critical_mass_bound(k_gn: float, lam: float) -> float:
    """At ``p = 10/3``: Nehari members need ``r^{2/3}`` at least this large."""
    return 5.0 / (3.0 * k_gn * lam)


def gradient_upper_bound(k_gn: float, lam: float, r: float, p: float) -> float:
    """A-priori gradient bound on Nehari members for ``p < 10/3`` (a lower bound above 10/3)."""
    e = 4.0 / (10.0 - 3.0 * p)
    return (k_gn * nehari_lp_factor(p) * lam) ** e * r ** ((6.0 - p) / (10.0 - 3.0 * p))


COERCIVITY_CONSTANT = (64.0 * math.pi - 1.0) / (64.0 * math.pi)


def coercivity_loss_constant(k_gn: float, p: float) -> float:
    """Constant ``c_p`` of the interpolation estimate, for ``p`` in (3, 10/3)."""
    if not 3.0 < p < TEN_THIRDS:
        raise DomainError("c_p is defined for p in (3, 10/3)", p=p)
    return (p - 3.0) / (4.0 - p) * k_gn * (3.0 * (p - 2.0) * (4.0 - p) * 2.0 ** (7.0 - p) / p) ** (1.0 / (p - 3.0))


def gradient_floor_constant(k_gn: float, p: float) -> float:
    """Nehari members satisfy ``A >= this / r`` for ``p`` in (3, 10/3)."""
    return (COERCIVITY_CONSTANT / coercivity_loss_constant(k_gn, p)) ** 2


def lp_floor_constant(k_gn: float, p: float) -> float:
    """``c'_p``: Nehari members satisfy ``C >= c'_p / (lambda r)`` for ``p`` in (3, 10/3)."""
    return 2.0 * p / (3.0 * (p - 2.0)) * gradient_floor_constant(k_gn, p)


def regime_tag(p: float) -> str:
    """Short label of the exponent regime, used in file headers."""
    if near(p, EIGHT_THIRDS):
        return "p=8/3"
    if near(p, 3.0):
        return "p=3"
    if near(p, TEN_THIRDS):
        return "p=10/3"
    if p < EIGHT_THIRDS:
        return "p in (2,8/3)"
    if p < 3.0:
        return "p in (8/3,3)"
    if p < TEN_THIRDS:
        return "p in (3,p0]" if p <= p_zero() else "p in (p0,10/3)"
    return "p in (10/3,6)"
