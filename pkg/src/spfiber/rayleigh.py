"""The nonlinear Rayleigh quotient, its infimum over trial families and the thresholds built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import formulas as fm
from ._validation import check_exponent, check_positive, near
from .errors import ConfigurationError, DomainError, InvalidInputError, NumericalFailure
from .families import TrialFamily
from .radial import Integrals, RadialGrid, dilate, gaussian, integrals, project_to_sphere

DEFAULT_BUDGET = 1500


@dataclass(frozen=True)
class RayleighValue:
    value: float
    p: float
    inputs: Integrals


def _unit_mass(unit: Integrals) -> None:
    if abs(unit.mass - 1.0) > 1e-6:
        raise InvalidInputError(f"the quotient is defined on unit-mass profiles, got mass {unit.mass}", mass=unit.mass)


def rayleigh(unit: Integrals, q: float, lam: float) -> RayleighValue:
    """``R_p`` of a unit-mass profile. ``p`` is taken from the integrals."""
    _unit_mass(unit)
    value = fm.rayleigh_value(unit.grad_sq, unit.hartree, unit.lp, q, lam, unit.p)
    return RayleighValue(value, unit.p, unit)


@dataclass
class SearchResult:
    value: float
    params: np.ndarray
    evaluations: int
    trace: list[float]


class _BudgetExhausted(Exception):
    pass


def simplex_search(
    objective: Callable[[np.ndarray], float],
    family: TrialFamily,
    budget: int,
    rng: np.random.Generator,
    n_starts: int = 4,
    seeds: Sequence[np.ndarray] = (),
) -> SearchResult:
    """Minimize ``objective`` over family parameters with restarted Nelder-Mead.

    A batch of random samples (plus the collapsed single-term member and any
    caller ``seeds``) is evaluated first; the best few then start bounded
    simplex runs that share the remaining budget. Invalid candidates should
    return ``inf``. The trace records the best value after every evaluation.
    """
    if budget < 1:
        raise ConfigurationError("evaluation budget must be positive", budget=budget)
    best = {"value": math.inf, "params": None}
    trace: list[float] = []

    def counted(theta: np.ndarray) -> float:
        if len(trace) >= budget:
            raise _BudgetExhausted
        theta = family.clip(np.asarray(theta, dtype=float))
        try:
            value = float(objective(theta))
        except (ArithmeticError, ValueError):
            value = math.inf
        if not math.isfinite(value):
            value = math.inf
        if value < best["value"]:
            best["value"], best["params"] = value, theta.copy()
        trace.append(best["value"])
        return value

    n_random = max(1, min(budget // 4, 16 * family.dimension))
    candidates = [family.collapsed(), *[np.asarray(s, dtype=float) for s in seeds]]
    candidates += list(family.sample(rng, n_random))
    scored = []
    try:
        for theta in candidates:
            scored.append((counted(theta), len(scored), theta))
        scored.sort(key=lambda item: (item[0], item[1]))
        starts = [theta for value, _, theta in scored[:n_starts] if math.isfinite(value)]
        bounds = family.bounds
        for i, start in enumerate(starts):
            remaining = budget - len(trace)
            if remaining <= family.dimension + 1:
                break
            share = remaining // (len(starts) - i)
            minimize(
                counted,
                start,
                method="Nelder-Mead",
                bounds=bounds,
                options={"maxfev": share, "xatol": 1e-7, "fatol": 1e-12, "adaptive": family.dimension > 2},
            )
        # Spend what is left polishing the incumbent.
        while budget - len(trace) > family.dimension + 1 and best["params"] is not None:
            before = best["value"]
            minimize(
                counted,
                best["params"],
                method="Nelder-Mead",
                bounds=bounds,
                options={"maxfev": budget - len(trace), "xatol": 1e-9, "fatol": 1e-14, "adaptive": family.dimension > 2},
            )
            if best["value"] >= before:
                break
    except _BudgetExhausted:
        pass
    if best["params"] is None:
        raise NumericalFailure("no valid candidate within the evaluation budget", evaluations=len(trace))
    return SearchResult(best["value"], best["params"], len(trace), trace)


@dataclass
class ThresholdEstimate:
    name: str
    value: float
    bound_direction: str
    family: dict | None
    evaluations: int
    optimizer_trace: list[float] = field(default_factory=list, repr=False)
    params: np.ndarray | None = field(default=None, repr=False)
    extras: dict = field(default_factory=dict)

    def to_dict(self, with_trace: bool = False) -> dict:
        out = {
            "name": self.name,
            "value": self.value,
            "bound_direction": self.bound_direction,
            "family": self.family,
            "evaluations": self.evaluations,
        }
        if self.extras:
            out["extras"] = self.extras
        if with_trace:
            out["optimizer_trace"] = self.optimizer_trace
        return out


def _rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def minimize_rayleigh(
    q: float,
    lam: float,
    p: float,
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
    seeds: Sequence[np.ndarray] = (),
) -> ThresholdEstimate:
    """Upper bound for ``inf R_p`` over the unit sphere, searched within ``family``."""
    p = check_exponent(p)
    check_positive("q", q)
    check_positive("lambda", lam)
    if abs(p - 3.0) <= fm.P_THREE_TOL:
        raise DomainError("the quotient is singular at p = 3; use the lambda thresholds", p=p)
    family = family or TrialFamily()

    def log_quotient(theta: np.ndarray) -> float:
        unit, _, _ = family.reference(theta, p)
        return math.log(fm.rayleigh_value(unit.grad_sq, unit.hartree, unit.lp, q, lam, p))

    result = simplex_search(log_quotient, family, budget, _rng(seed), seeds=seeds)
    return ThresholdEstimate(
        "inf_R",
        math.exp(result.value),
        "upper",
        family.descriptor(),
        result.evaluations,
        [math.exp(v) if math.isfinite(v) else math.inf for v in result.trace],
        result.params,
    )


def minimize_lions_quotient(
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
) -> ThresholdEstimate:
    """Upper bound for ``inf (A B)^{1/2} / C`` at ``p = 3``."""
    family = family or TrialFamily()

    def log_quotient(theta: np.ndarray) -> float:
        unit, _, _ = family.reference(theta, 3.0)
        return math.log(fm.lions_quotient(unit.grad_sq, unit.hartree, unit.lp))

    result = simplex_search(log_quotient, family, budget, _rng(seed))
    return ThresholdEstimate(
        "inf_lions_quotient",
        math.exp(result.value),
        "upper",
        family.descriptor(),
        result.evaluations,
        [math.exp(v) if math.isfinite(v) else math.inf for v in result.trace],
        result.params,
    )


def estimate_kgn(
    p: float,
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
    lam: float = 1.0,
) -> ThresholdEstimate:
    """Lower bound for the Gagliardo-Nirenberg constant (a supremum over the family)."""
    p = check_exponent(p)
    family = family or TrialFamily()

    def negative_log_quotient(theta: np.ndarray) -> float:
        unit, _, _ = family.reference(theta, p)
        return -math.log(fm.gn_quotient(unit.mass, unit.grad_sq, unit.lp, p))

    result = simplex_search(negative_log_quotient, family, budget, _rng(seed))
    value = math.exp(-result.value)
    extras = {}
    if near(p, fm.TEN_THIRDS):
        # A lower bound on K makes this an upper bound on the true critical mass level.
        extras["nonexistence_bound"] = fm.gn_critical_mass_bound(value, lam)
        extras["lambda"] = lam
    return ThresholdEstimate(
        "K_GN",
        value,
        "lower",
        family.descriptor(),
        result.evaluations,
        [math.exp(-v) if math.isfinite(v) else 0.0 for v in result.trace],
        result.params,
        extras,
    )


def p0_estimate() -> ThresholdEstimate:
    return ThresholdEstimate("p0", fm.p_zero(), "exact", None, 0)


def _scaled(base: ThresholdEstimate, name: str, factor: float) -> ThresholdEstimate:
    return ThresholdEstimate(
        name,
        factor * base.value,
        base.bound_direction,
        base.family,
        base.evaluations,
        [factor * v for v in base.optimizer_trace],
        base.params,
    )


def thresholds(
    q: float,
    lam: float,
    p: float,
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
) -> list[ThresholdEstimate]:
    """Every threshold that is defined at exponent ``p``.

    Infima over the unit sphere are reported as upper bounds (searched within
    the family); the GN constant as a lower bound; ``p0`` exactly.
    """
    p = check_exponent(p)
    check_positive("q", q)
    check_positive("lambda", lam)
    family = family or TrialFamily()
    rng = _rng(seed)
    out: list[ThresholdEstimate] = []
    if near(p, 3.0, fm.P_THREE_TOL):
        base = minimize_lions_quotient(family, budget, rng)
        out.append(_scaled(base, "lambda_star", fm.LAMBDA_STAR_PREFACTOR * math.sqrt(q)))
        out.append(_scaled(base, "lambda0_star", fm.LAMBDA_ZERO_PREFACTOR * math.sqrt(q)))
    else:
        base = minimize_rayleigh(q, lam, p, family, budget, rng)
        if p < fm.TEN_THIRDS - 1e-12:
            out.append(_scaled(base, "inf_tilde_r", fm.tilde_prefactor(p)))
        if 3.0 < p < fm.TEN_THIRDS - 1e-12:
            out.append(_scaled(base, "r_star", fm.star_prefactor(p)))
            out.append(_scaled(base, "r0_star", fm.zero_prefactor(p)))
        if p >= fm.TEN_THIRDS - 1e-12:
            out.append(_scaled(base, "inf_bar_r", fm.bar_prefactor(p)))
    out.append(estimate_kgn(p, family, budget, rng, lam))
    out.append(p0_estimate())
    return out


def threshold_map(estimates: Sequence[ThresholdEstimate]) -> dict[str, float]:
    return {e.name: e.value for e in estimates}


@dataclass
class CattoSequenceReport:
    p: float
    r: float
    n_values: list[int]
    lp_values: list[float]
    grad_values: list[float]
    hartree_values: list[float]

    def lp_spread(self) -> float:
        """Largest relative deviation of the Lp integrals from their mean."""
        lp = np.asarray(self.lp_values)
        return float(np.max(np.abs(lp / lp.mean() - 1.0)))

    def grad_growth_spread(self) -> float:
        g = np.asarray(self.grad_values) / np.asarray(self.n_values, dtype=float) ** (2.0 / 3.0)
        return float(np.max(np.abs(g / g.mean() - 1.0)))

    def scaled_hartree(self) -> list[float]:
        n = np.asarray(self.n_values, dtype=float)
        return [float(x) for x in np.asarray(self.hartree_values) * n ** (2.0 / 3.0)]

    def rayleigh_values(self, q: float, lam: float) -> list[float]:
        """Quotient along the sequence (rescaled to unit mass)."""
        out = []
        for a, b, c in zip(self.grad_values, self.hartree_values, self.lp_values):
            unit = Integrals(self.r, a, b, c, self.p).on_sphere(1.0)
            out.append(fm.rayleigh_value(unit.grad_sq, unit.hartree, unit.lp, q, lam, self.p))
        return out

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.n_values, self.lp_values, self.grad_values, self.hartree_values))


def _support_radius(grid: RadialGrid, values: np.ndarray, tail_fraction: float = 1e-12) -> float:
    """Smallest node radius enclosing all but ``tail_fraction`` of the mass."""
    shell = grid.weights * values**2
    outside = np.cumsum(shell[::-1])[::-1]
    total = outside[0]
    idx = int(np.argmax(outside <= tail_fraction * total))
    return float(grid.nodes[idx])


def catto_sequence(
    p: float,
    r: float = 1.0,
    n_max: int = 8,
    separation_growth: Callable[[int], float] | None = None,
    bump_width: float = 1.0,
    grid: RadialGrid | None = None,
) -> CattoSequenceReport:
    """Integrals of ``n`` disjoint bumps of mass ``r/n``, each dilated by ``n^{1/3}``.

    Bump centres sit on a line with spacing ``separation_growth(n)``
    (default ``20 * bump_width * n``). The Hartree energy adds the exact
    per-bump energies to the pairwise Coulomb terms ``m_i m_j / d_ij``,
    which are exact for radial charges with disjoint supports.
    """
    p = check_exponent(p)
    r = check_positive("r", r)
    if n_max < 2:
        raise ConfigurationError("the sequence needs n_max >= 2", n_max=n_max)
    grid = grid or RadialGrid()
    spacing = separation_growth or (lambda n: 20.0 * bump_width * n)
    base = gaussian(grid, bump_width)

    report = CattoSequenceReport(p, r, [], [], [], [])
    for n in range(1, n_max + 1):
        mass = r / n
        bump = project_to_sphere(dilate(base, n ** (1.0 / 3.0)), mass)
        bump_integrals = integrals(bump, p)
        d = float(spacing(n))
        reach = _support_radius(grid, bump.values)
        if n > 1 and d < 2.0 * reach:
            raise ConfigurationError(
                f"bumps overlap at n={n}: spacing {d} < twice the support radius {reach}",
                n=n,
                spacing=d,
                support_radius=reach,
            )
        offsets = np.arange(1, n)
        cross = 2.0 * mass**2 * float(np.sum((n - offsets) / (offsets * d))) if n > 1 else 0.0
        report.n_values.append(n)
        report.lp_values.append(n * bump_integrals.lp)
        report.grad_values.append(n * bump_integrals.grad_sq)
        report.hartree_values.append(n * bump_integrals.hartree + cross)
    return report
