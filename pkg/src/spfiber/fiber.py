"""Fiber maps ``t -> E(r^{1/2} u^t)``, their critical points and the Nehari tests.

A fiber map is fully determined by the integrals ``A, B, C`` of a unit-mass
profile ``u`` together with ``(r, q, lambda, p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import formulas as fm
from ._validation import check_exponent, check_finite, check_positive, near
from .errors import DomainError, InvalidInputError, NumericalFailure, PreconditionError
from .radial import Integrals, RadialFunction, integrals

SCAN_POINTS = 512
SCAN_RANGE = (1e-6, 1e6)
# Widest window tried when the taxonomy requires a root outside SCAN_RANGE.
MAX_SCAN_RANGE = (1e-60, 1e60)
COALESCENCE_TOL = 1e-6
NEHARI_TOL = 1e-6

CASES_BY_REGIME = {
    "I": ("I",),
    "II": ("II-1", "II-2"),
    "III": ("III-1", "III-2", "III-3"),
    "IV": ("IV-1", "IV-2"),
    "V": ("V",),
}


@dataclass(frozen=True)
class FiberCoefficients:
    A: float
    B: float
    C: float
    r: float = 1.0
    q: float = 1.0
    lam: float = 1.0
    p: float = 4.0

    def __post_init__(self) -> None:
        for name in ("A", "B", "C", "r", "q", "lam"):
            object.__setattr__(self, name, check_positive(name, getattr(self, name)))
        object.__setattr__(self, "p", check_exponent(self.p))

    @classmethod
    def from_integrals(cls, unit: Integrals, r: float, q: float, lam: float) -> FiberCoefficients:
        """Coefficients for a profile of mass one."""
        return cls(unit.grad_sq, unit.hartree, unit.lp, r, q, lam, unit.p)

    def at_mass(self, r: float) -> FiberCoefficients:
        return FiberCoefficients(self.A, self.B, self.C, r, self.q, self.lam, self.p)

    @property
    def kinetic(self) -> float:
        return self.r * self.A

    @property
    def hartree_term(self) -> float:
        """``phi'(0+)`` contribution ``r^2 q B / 4``."""
        return 0.25 * self.r**2 * self.q * self.B

    @property
    def power_term(self) -> float:
        return self.r ** (0.5 * self.p) * self.lam * self.C


class FiberValues(NamedTuple):
    value: float
    first_deriv: float
    second_deriv: float


def fiber_eval(fc: FiberCoefficients, t):
    """Value, first and second derivative of the fiber map at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)) or np.any(~np.isfinite(t_arr)):
        raise DomainError("fiber maps are evaluated at t > 0", t=np.asarray(t).tolist())
    p = fc.p
    k = fc.power_term
    e = fm.fiber_exponent(p)
    with np.errstate(over="ignore"):
        value = 0.5 * t_arr**2 * fc.kinetic + t_arr * fc.hartree_term - t_arr**e * k / p
        first = t_arr * fc.kinetic + fc.hartree_term - fm.nehari_lp_factor(p) * t_arr ** (e - 1.0) * k
        second = fc.kinetic - fm.curvature_lp_factor(p) * t_arr ** (e - 2.0) * k
    if np.ndim(t) == 0:
        return FiberValues(float(value), float(first), float(second))
    return FiberValues(value, first, second)


def _first(fc: FiberCoefficients, t: float) -> float:
    return fiber_eval(fc, t).first_deriv


@dataclass(frozen=True)
class CriticalPoint:
    t: float
    type: str


@dataclass(frozen=True)
class FiberClassification:
    case_tag: str
    critical_points: tuple[CriticalPoint, ...] = field(default_factory=tuple)

    def point(self, kind: str) -> float | None:
        for cp in self.critical_points:
            if cp.type == kind:
                return cp.t
        return None

    @property
    def plus(self) -> float | None:
        return self.point("plus")

    @property
    def minus(self) -> float | None:
        return self.point("minus")

    def to_dict(self) -> dict:
        return {"case": self.case_tag, "critical_points": [{"t": cp.t, "type": cp.type} for cp in self.critical_points]}


def regime(p: float) -> str:
    """Which branch of the five-case taxonomy applies to exponent ``p``."""
    if near(p, fm.EIGHT_THIRDS):
        return "II"
    if near(p, fm.TEN_THIRDS):
        return "IV"
    if p < fm.EIGHT_THIRDS:
        return "I"
    if p < fm.TEN_THIRDS:
        return "III"
    return "V"


def _bracketed_roots(fc: FiberCoefficients, expected: int, extra: tuple[float, ...] = ()) -> list[float]:
    """Roots of ``phi'`` from a log scan plus Brent refinement.

    The scan window grows by six decades per side until ``expected`` sign
    changes are seen or the widest window is reached.
    """
    lo, hi = SCAN_RANGE
    while True:
        ts = np.geomspace(lo, hi, SCAN_POINTS)
        inside = [x for x in extra if lo < x < hi]
        if inside:
            ts = np.unique(np.concatenate([ts, inside]))
        with np.errstate(over="ignore", invalid="ignore"):
            d1 = fiber_eval(fc, ts).first_deriv
        roots = []
        for i in range(len(ts) - 1):
            a, b = d1[i], d1[i + 1]
            if a == 0.0:
                roots.append(float(ts[i]))
            elif np.sign(a) * np.sign(b) < 0:
                roots.append(brentq(lambda x: _first(fc, x), ts[i], ts[i + 1], xtol=1e-300, rtol=1e-15, maxiter=500))
        if len(roots) >= expected or (lo <= MAX_SCAN_RANGE[0] and hi >= MAX_SCAN_RANGE[1]):
            return roots
        lo, hi = max(lo * 1e-6, MAX_SCAN_RANGE[0]), min(hi * 1e6, MAX_SCAN_RANGE[1])


def _require_roots(fc: FiberCoefficients, roots: list[float], expected: int, case: str) -> None:
    if len(roots) != expected:
        raise NumericalFailure(
            f"expected {expected} critical point(s) for case {case}, bracketed {len(roots)}",
            case=case,
            roots=roots,
            coefficients=fc.__dict__,
        )


def _check_type(fc: FiberCoefficients, t: float, kind: str) -> None:
    second = fiber_eval(fc, t).second_deriv
    scale = 1e-9 * fc.kinetic
    ok = {"plus": second > -scale, "minus": second < scale, "zero": abs(second) <= max(scale, 1e-6 * fc.kinetic)}[kind]
    if not ok:
        raise NumericalFailure(
            f"critical point at t={t} has phi''={second}, inconsistent with type {kind}",
            t=t,
            second_deriv=second,
        )


def classify_fiber(fc: FiberCoefficients) -> FiberClassification:
    """Locate and type every critical point of the fiber map."""
    branch = regime(fc.p)
    p = fc.p
    points: list[CriticalPoint] = []
    if branch == "I":
        roots = _bracketed_roots(fc, 1)
        _require_roots(fc, roots, 1, "I")
        tag, points = "I", [CriticalPoint(roots[0], "plus")]
    elif branch == "II":
        if fc.hartree_term - fc.power_term / p < 0:
            roots = _bracketed_roots(fc, 1)
            _require_roots(fc, roots, 1, "II-1")
            tag, points = "II-1", [CriticalPoint(roots[0], "plus")]
        else:
            tag = "II-2"
    elif branch == "IV":
        if 0.5 * fc.kinetic - fc.power_term / p < 0:
            roots = _bracketed_roots(fc, 1)
            _require_roots(fc, roots, 1, "IV-1")
            tag, points = "IV-1", [CriticalPoint(roots[0], "minus")]
        else:
            tag = "IV-2"
    elif branch == "V":
        roots = _bracketed_roots(fc, 1)
        _require_roots(fc, roots, 1, "V")
        tag, points = "V", [CriticalPoint(roots[0], "minus")]
    else:
        tag, points = _classify_middle(fc)
    for cp in points:
        _check_type(fc, cp.t, cp.type)
    return FiberClassification(tag, tuple(points))


def inflection_time(fc: FiberCoefficients) -> float:
    """Where ``phi''`` vanishes, for ``p`` in (8/3, 10/3)."""
    alpha = fm.fiber_exponent(fc.p) - 1.0
    k = fm.nehari_lp_factor(fc.p) * fc.power_term
    return (k * alpha / fc.kinetic) ** (1.0 / (1.0 - alpha))


def _classify_middle(fc: FiberCoefficients) -> tuple[str, list[CriticalPoint]]:
    t_c = inflection_time(fc)
    lowest = _first(fc, t_c)
    scale = max(fc.hartree_term, fc.kinetic * t_c)
    if lowest > 1e-12 * scale:
        return "III-3", []
    if lowest >= 0.0:
        return "III-2", [CriticalPoint(t_c, "zero")]
    roots = _bracketed_roots(fc, 2, extra=(t_c,))
    _require_roots(fc, roots, 2, "III-1")
    t_minus, t_plus = roots
    if (t_plus - t_minus) / t_c < COALESCENCE_TOL:
        return "III-2", [CriticalPoint(t_c, "zero")]
    return "III-1", [CriticalPoint(t_minus, "minus"), CriticalPoint(t_plus, "plus")]


@dataclass(frozen=True)
class NehariMembership:
    Q_value: float
    W_value: float
    verdict: str

    def to_dict(self) -> dict:
        return {"Q_value": self.Q_value, "W_value": self.W_value, "verdict": self.verdict}


def nehari_functionals(integ: Integrals, q: float, lam: float) -> tuple[float, float]:
    """``phi'(1)`` and ``phi''(1)`` of a profile, from its own integrals."""
    p = integ.p
    Q = integ.grad_sq + 0.25 * q * integ.hartree - fm.nehari_lp_factor(p) * lam * integ.lp
    W = integ.grad_sq - fm.curvature_lp_factor(p) * lam * integ.lp
    return Q, W


def nehari_from_integrals(
    integ: Integrals, q: float, lam: float, tol_q: float = NEHARI_TOL, tol_w: float = NEHARI_TOL
) -> NehariMembership:
    Q, W = nehari_functionals(integ, q, lam)
    scale = integ.grad_sq
    if abs(Q) > tol_q * scale:
        verdict = "not_member"
    elif W > tol_w * scale:
        verdict = "plus"
    elif W < -tol_w * scale:
        verdict = "minus"
    else:
        verdict = "zero"
    return NehariMembership(Q, W, verdict)


def nehari_membership(
    u: RadialFunction,
    r: float,
    q: float,
    lam: float,
    p: float,
    tol_q: float = NEHARI_TOL,
    tol_w: float = NEHARI_TOL,
    mass_tol: float = 1e-6,
) -> NehariMembership:
    """Sign tests placing ``u`` in one of the three Nehari components (or none)."""
    integ = integrals(u, p)
    if abs(integ.mass - r) > mass_tol * r:
        raise InvalidInputError(f"profile has mass {integ.mass}, expected {r}", mass=integ.mass, r=r)
    return nehari_from_integrals(integ, q, lam, tol_q, tol_w)


@dataclass(frozen=True)
class PohozaevInput:
    """Coefficients of ``-a Lap u + b u + c phi_u u + d |u|^{p-2} u = 0``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            check_finite(name, getattr(self, name))

    @classmethod
    def for_ground_state(cls, multiplier: float, q: float, lam: float) -> PohozaevInput:
        return cls(1.0, -multiplier, q, -lam)


def pohozaev_from_integrals(integ: Integrals, coeffs: PohozaevInput) -> float:
    return (
        0.5 * coeffs.a * integ.grad_sq
        + 1.5 * coeffs.b * integ.mass
        + 1.25 * coeffs.c * integ.hartree
        + 3.0 * coeffs.d * integ.lp / integ.p
    )


def pohozaev_residual(u: RadialFunction, coeffs: PohozaevInput, p: float) -> float:
    return pohozaev_from_integrals(integrals(u, p), coeffs)


def solve_closed_system(
    a: float, b: float, c: float, d: float, e: float, f: float, A: float, B: float, C: float, p: float
) -> tuple[float, float]:
    """Positive solution ``(r, t)`` of the pair of equations

        a t A + b r B + c r^{p/2-1} t^{3p/2-4} C = 0
        d t A + e r B + f r^{p/2-1} t^{3p/2-4} C = 0.
    """
    p = check_exponent(p)
    for name, value in (("A", A), ("B", B), ("C", C)):
        check_positive(name, value)
    if abs(p - 3.0) <= fm.P_THREE_TOL:
        raise DomainError("the closed system is singular at p = 3", p=p)
    det = c * e - b * f
    if b == 0 or det == 0:
        raise PreconditionError("need b != 0 and ce - bf != 0", b=b, det=det)
    alpha = (a * f - c * d) / det
    beta = (b * d - a * e) / det
    if not (alpha > 0 and beta > 0):
        raise PreconditionError("sign conditions on the coefficients fail", alpha=alpha, beta=beta)
    # The linear part gives tA = nu and rB = alpha * nu, where the nonlinear
    # term equals beta * nu; matching powers of nu closes the system.
    nu = (beta * alpha ** (1.0 - 0.5 * p) * B ** (0.5 * p - 1.0) * A ** (1.5 * p - 4.0) / C) ** (1.0 / (2.0 * (p - 3.0)))
    t = nu / A
    r = alpha * nu / B
    for lin_t, lin_r, nonlin in ((a, b, c), (d, e, f)):
        terms = (lin_t * t * A, lin_r * r * B, nonlin * r ** (0.5 * p - 1.0) * t ** (1.5 * p - 4.0) * C)
        if abs(sum(terms)) > 1e-9 * max(abs(x) for x in terms):
            raise NumericalFailure("closed-form solution fails back-substitution", terms=list(terms))
    return r, t


@dataclass(frozen=True)
class ExtremalPair:
    variant: str
    r_value: float
    t_value: float
    lambda_value: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


VARIANTS = ("tilde", "zero", "star", "bar", "lambda_zero", "lambda_star")


def _check_unit_mass(unit: Integrals) -> None:
    if abs(unit.mass - 1.0) > 1e-6:
        raise InvalidInputError(f"extremal values need a unit-mass profile, got mass {unit.mass}", mass=unit.mass)


def _relative_residual(*terms: float) -> float:
    return abs(sum(terms)) / max(abs(x) for x in terms)


def extremal_pair(unit: Integrals, q: float, lam: float, variant: str, r: float = 1.0) -> ExtremalPair:
    """Closed-form thresholds attached to a single profile.

    ``r`` is only used by the lambda variants (``p = 3``), whose threshold is
    a value of ``lambda`` at fixed mass.
    """
    _check_unit_mass(unit)
    p = unit.p
    A, B, C = unit.grad_sq, unit.hartree, unit.lp
    if variant in ("lambda_zero", "lambda_star"):
        if not near(p, 3.0, fm.P_THREE_TOL):
            raise DomainError(f"variant {variant} needs p = 3", p=p)
        quotient = fm.lions_quotient(A, B, C)
        if variant == "lambda_zero":
            lam_value = fm.LAMBDA_ZERO_PREFACTOR * math.sqrt(q) * quotient
            t_value = r * q * B / (2.0 * A)
        else:
            lam_value = fm.LAMBDA_STAR_PREFACTOR * math.sqrt(q) * quotient
            t_value = r * q * B / (4.0 * A)
        return ExtremalPair(variant, r, t_value, lam_value)

    if variant not in VARIANTS:
        raise DomainError(f"unknown extremal variant {variant!r}")
    rp = fm.rayleigh_value(A, B, C, q, lam, p)
    if variant == "tilde":
        r_value = fm.tilde_prefactor(p) * rp
        return ExtremalPair(variant, r_value, r_value * q * B / (2.0 * A))
    if variant == "bar":
        r_value = fm.bar_prefactor(p) * rp
        return ExtremalPair(variant, r_value, r_value * q * B * (5.0 * p - 12.0) / (2.0 * A * (6.0 - p)))

    if variant == "zero":
        r_value = fm.zero_prefactor(p) * rp
        ratio = p / (3.0 * p - 8.0)
    else:
        r_value = fm.star_prefactor(p) * rp
        ratio = 4.0 * p / (3.0 * (p - 2.0) * (3.0 * p - 8.0))
    s_value = (ratio * A / (r_value ** (0.5 * (p - 2.0)) * lam * C)) ** (2.0 / (3.0 * p - 10.0))

    fc = FiberCoefficients(A, B, C, r_value, q, lam, p)
    e = fm.fiber_exponent(p)
    k = fc.power_term
    value_terms = (0.5 * s_value**2 * fc.kinetic, s_value * fc.hartree_term, -(s_value**e) * k / p)
    first_terms = (s_value * fc.kinetic, fc.hartree_term, -fm.nehari_lp_factor(p) * s_value ** (e - 1.0) * k)
    second_terms = (fc.kinetic, -fm.curvature_lp_factor(p) * s_value ** (e - 2.0) * k)
    checks = (value_terms, first_terms) if variant == "zero" else (first_terms, second_terms)
    worst = max(_relative_residual(*terms) for terms in checks)
    if worst > 1e-8:
        raise NumericalFailure(f"{variant} pair fails back-substitution", residual=worst)
    return ExtremalPair(variant, r_value, s_value)
