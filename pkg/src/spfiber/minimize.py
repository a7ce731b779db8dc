"""Energy minimization on the mass sphere and on Nehari components, plus sweeps over the mass."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import formulas as fm
from ._validation import check_exponent, check_positive, near
from .errors import DomainError, InvalidInputError, NumericalFailure
from .families import TrialFamily
from .fiber import (
    FiberCoefficients,
    NehariMembership,
    PohozaevInput,
    classify_fiber,
    fiber_eval,
    nehari_from_integrals,
    pohozaev_from_integrals,
)
from .hartree import hartree_energy_and_gradient
from .radial import DEFAULT_R_MAX, LEAK_TOLERANCE, Integrals, RadialFunction, RadialGrid, dilate, gaussian, integrals, integrate_mass
from .rayleigh import DEFAULT_BUDGET, _rng, simplex_search


def energy_from_integrals(integ: Integrals, q: float, lam: float) -> float:
    return 0.5 * integ.grad_sq + 0.25 * q * integ.hartree - lam * integ.lp / integ.p


def energy(u: RadialFunction, p: float, q: float, lam: float) -> float:
    """``E(u) = A/2 + q B/4 - lambda C / p``."""
    return energy_from_integrals(integrals(u, p), q, lam)


def nehari_energy(integ: Integrals, q: float) -> float:
    """Energy of a Nehari member written without the Lp term."""
    p = integ.p
    return (3.0 * p - 10.0) / (6.0 * (p - 2.0)) * integ.grad_sq + (3.0 * p - 8.0) / (12.0 * (p - 2.0)) * q * integ.hartree


@dataclass
class SolveReport:
    u: RadialFunction | None
    energy: float
    multiplier: float
    pohozaev_residual: float
    nehari: NehariMembership | None
    params: dict
    iterations: int
    converged: bool
    method: str = "sphere-descent"
    status: str = "finite"
    gradient_norm: float = math.nan
    integrals: Integrals | None = None
    energy_trace: list[float] = field(default_factory=list, repr=False)
    family_params: np.ndarray | None = field(default=None, repr=False)
    dilation: float | None = None

    @property
    def pohozaev_relative(self) -> float:
        if self.integrals is None:
            return math.nan
        i = self.integrals
        return abs(self.pohozaev_residual) / (i.grad_sq + i.mass + i.hartree + i.lp)

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "status": self.status,
            "params": self.params,
            "energy": self.energy,
            "multiplier": self.multiplier,
            "pohozaev_residual": self.pohozaev_residual,
            "pohozaev_relative": self.pohozaev_relative,
            "nehari": self.nehari.to_dict() if self.nehari else None,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "integrals": self.integrals.as_dict() if self.integrals else None,
        }
        if self.u is not None:
            out["grid"] = {"r_max": self.u.grid.r_max, "n": self.u.grid.n_points}
        if self.family_params is not None:
            out["family_params"] = [float(x) for x in self.family_params]
            out["dilation"] = self.dilation
        return out


def _report_from_profile(
    u: RadialFunction, p: float, q: float, lam: float, r: float, **extra
) -> SolveReport:
    integ = integrals(u, p)
    multiplier = (integ.grad_sq + q * integ.hartree - lam * integ.lp) / integ.mass
    poho = pohozaev_from_integrals(integ, PohozaevInput.for_ground_state(multiplier, q, lam))
    return SolveReport(
        u=u,
        energy=energy_from_integrals(integ, q, lam),
        multiplier=multiplier,
        pohozaev_residual=poho,
        nehari=nehari_from_integrals(integ, q, lam),
        params={"p": p, "q": q, "lambda": lam, "r": r},
        integrals=integ,
        **extra,
    )


# Value at r=0 of the even quadratic-in-r^2 interpolant through the next three nodes.
_ORIGIN_EXTRAPOLATION = (1.5, -0.6, 0.1)


class _DiscreteEnergy:
    """Energy of the free samples ``v = u[1:]``; ``u[0]`` is extrapolated."""

    def __init__(self, grid: RadialGrid, p: float, q: float, lam: float) -> None:
        n = grid.n_points
        self.grid, self.p, self.q, self.lam = grid, p, q, lam
        rows = [0, 0, 0] + list(range(1, n))
        cols = [0, 1, 2] + list(range(n - 1))
        vals = list(_ORIGIN_EXTRAPOLATION) + [1.0] * (n - 1)
        self.prolong = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n - 1))
        dp = grid.derivative_matrix @ self.prolong
        self.stiffness = (dp.T @ sparse.diags(grid.midpoint_weights) @ dp).tocsc()
        self.mass_diag = grid.weights[1:].copy()

    def full(self, v: np.ndarray) -> np.ndarray:
        return self.prolong @ v

    def mass(self, v: np.ndarray) -> float:
        return float(np.dot(self.mass_diag, v * v))

    def value_and_gradient(self, v: np.ndarray) -> tuple[float, np.ndarray, Integrals]:
        u = self.full(v)
        w = self.grid.weights
        kv = self.stiffness @ v
        grad_sq = float(np.dot(v, kv))
        density = u * u
        hartree, half = hartree_energy_and_gradient(self.grid, density)
        absu = np.abs(u)
        lp = float(np.dot(w, absu**self.p))
        integ = Integrals(float(np.dot(w, density)), grad_sq, hartree, lp, self.p)
        value = 0.5 * grad_sq + 0.25 * self.q * hartree - self.lam * lp / self.p
        local = self.q * half * u - w * self.lam * absu ** (self.p - 2.0) * u
        grad = kv + self.prolong.T @ local
        return value, grad, integ

    def normalize(self, v: np.ndarray, r: float) -> np.ndarray:
        return v * math.sqrt(r / self.mass(v))


def _fiber_start(grid: RadialGrid, p: float, q: float, lam: float, r: float, width: float) -> RadialFunction:
    """Width-``width`` Gaussian of mass ``r``, moved to the bottom of its fiber when one exists."""
    u = gaussian(grid, width, r)
    t = _fiber_minimum(u, p, q, lam, r)
    if t is None:
        return u
    new_width = width / t
    if 12.0 * new_width > grid.r_max or new_width < 20.0 * grid.step:
        return u
    return gaussian(grid, new_width, r)


def _fiber_minimum(u: RadialFunction, p: float, q: float, lam: float, r: float) -> float | None:
    """Dilation to the fiber minimum, or None when there is none (or it cannot be bracketed)."""
    try:
        unit = integrals(u, p).on_sphere(1.0)
        return classify_fiber(FiberCoefficients.from_integrals(unit, r, q, lam)).plus
    except (NumericalFailure, InvalidInputError):
        return None


def _initial_grid(p: float, q: float, lam: float, r: float) -> RadialGrid:
    """Default grid, rescaled to the length at which a unit Gaussian's fiber is minimal."""
    grid = RadialGrid()
    t = _fiber_minimum(gaussian(grid, 1.0, r), p, q, lam, r)
    if t is None:
        return grid
    return RadialGrid(grid.r_max / t, grid.n_points)


def _decay_ok(u: RadialFunction) -> bool:
    return u.leak <= LEAK_TOLERANCE * integrate_mass(u)


def _resized_grid(grid: RadialGrid, multiplier: float) -> RadialGrid:
    """Larger box for a bound state (``multiplier < 0``) that has not decayed.

    The box reaches 30 decay lengths ``1/sqrt(-multiplier)``. The node count
    grows with it up to 8192 nodes, after which the step coarsens instead.
    """
    kappa = math.sqrt(-multiplier)
    r_max = max(1.6 * grid.r_max, 30.0 / kappa)
    n_points = min(int(math.ceil(r_max / grid.step)) + 1, max(grid.n_points, _GROWN_POINTS))
    return RadialGrid(r_max, n_points)


def _fiber_polish(u: RadialFunction, p: float, q: float, lam: float, r: float) -> RadialFunction:
    """Move ``u`` to the bottom of its own fiber; never raises the energy."""
    t = _fiber_minimum(u, p, q, lam, r)
    if t is None or abs(t - 1.0) < 1e-14:
        return u
    try:
        moved = dilate(u, t)
    except DomainError:
        return u
    return moved if energy(moved, p, q, lam) <= energy(u, p, q, lam) else u


_GROWN_POINTS = 8192
ENERGY_NOISE = 1e-12
_STAGE_ITERATIONS = 400


def minimize_on_sphere(
    p: float,
    q: float,
    lam: float,
    r: float,
    init: RadialFunction | None = None,
    step: float = 1.0,
    max_iter: int = 20000,
    grid: RadialGrid | None = None,
    tol: float = 1e-8,
    auto_grid: bool = True,
) -> SolveReport:
    """Minimize the energy on the mass sphere by preconditioned conjugate gradients.

    Iteration stops when the L2 norm of the tangential gradient drops below
    ``tol * (1 + |E|)``. With ``auto_grid`` the descent runs in stages: a
    profile that has not decayed at ``r_max`` is moved to a box sized from
    its multiplier and the run resumes there. The result is finally dilated
    to the minimum of its own fiber.
    """
    p = check_exponent(p)
    q, lam, r = check_positive("q", q), check_positive("lambda", lam), check_positive("r", r)
    if p >= fm.TEN_THIRDS - 1e-12:
        raise DomainError("the energy is unbounded below on the sphere for p >= 10/3; minimize on the N- component", p=p)
    if init is not None:
        grid = init.grid
    if init is not None:
        start = init
    elif grid is not None:
        start = _fiber_start(grid, p, q, lam, r, 1.0)
    else:
        grid = _initial_grid(p, q, lam, r)
        start = gaussian(grid, grid.r_max / DEFAULT_R_MAX, r)

    total_iterations = 0
    trace: list[float] = []
    for _ in range(8):
        budget = max_iter - total_iterations
        if auto_grid:
            budget = min(budget, _STAGE_ITERATIONS)
        report = _descend(start, p, q, lam, r, step, budget, tol)
        total_iterations += report.iterations
        trace.extend(report.energy_trace)
        decayed = _decay_ok(report.u)
        if not auto_grid or total_iterations >= max_iter or (decayed and report.converged):
            break
        if decayed:
            start = report.u
            continue
        if report.multiplier >= 0.0:
            # No bound state: the mass keeps spreading and no box will hold it.
            break
        bigger = _resized_grid(grid, report.multiplier)
        values = np.interp(bigger.nodes, grid.nodes, report.u.values, right=0.0)
        grid, start = bigger, RadialFunction(bigger, values)

    stationary = report.converged
    polished = _fiber_polish(report.u, p, q, lam, r)
    if polished is not report.u:
        norm = report.gradient_norm
        report = _report_from_profile(polished, p, q, lam, r, iterations=0, converged=False)
        report.gradient_norm = norm
    report.converged = stationary and report.pohozaev_relative < 1e-5 and report.nehari.verdict != "not_member"
    report.iterations = total_iterations
    report.energy_trace = trace
    return report


def _energy_noise(integ: Integrals, q: float, lam: float) -> float:
    """Roundoff floor of the computed energy: differences below it are not resolved."""
    return ENERGY_NOISE * (0.5 * integ.grad_sq + 0.25 * q * integ.hartree + lam * integ.lp / integ.p)


def _gradient_scale(value: float, integ: Integrals, q: float, lam: float, r: float) -> float:
    """``min(1 + |E|, S / sqrt(r))`` with ``S`` the sum of the energy's term sizes.

    ``S / sqrt(r)`` is the natural size of the L2 gradient; the cap keeps
    the stopping rule meaningful when all energies are far below one.
    """
    size = 0.5 * integ.grad_sq + 0.25 * q * integ.hartree + lam * integ.lp / integ.p
    return min(1.0 + abs(value), size / math.sqrt(r))


def _line_search(problem, v, value, grad, direction, slope, tau, r, noise):
    """Backtracking Armijo search, with a derivative test once decreases drown in roundoff.

    When ``tau * slope`` is below the energy noise floor, the Armijo
    comparison can only accept ties. The step is then judged by the
    directional derivative instead (an approximate Wolfe condition), and the
    energy may move up by at most ``noise``.
    """
    for _ in range(40):
        trial = problem.normalize(v - tau * direction, r)
        t_value, t_grad, t_integ = problem.value_and_gradient(trial)
        if tau * slope > noise:
            if t_value <= value - 1e-4 * tau * slope:
                return tau, trial, t_value, t_grad, t_integ
        elif t_value <= value + noise:
            t_ell = float(np.dot(t_grad, trial)) / r
            t_slope = float(np.dot(t_grad - t_ell * problem.mass_diag * trial, direction))
            if abs(t_slope) <= 0.9 * slope:
                return tau, trial, t_value, t_grad, t_integ
            if t_slope > 0.0:
                # Still descending steeply: move toward the secant estimate of the 1-D minimum.
                tau = min(tau * slope / (slope - t_slope) if slope > t_slope else 4.0 * tau, 4.0 * tau)
                continue
        tau *= 0.5
    return None


def _descend(
    start: RadialFunction, p: float, q: float, lam: float, r: float, step: float, max_iter: int, tol: float
) -> SolveReport:
    """Preconditioned nonlinear conjugate gradients on the mass sphere.

    Search directions are Polak-Ribiere combinations of preconditioned
    tangential gradients; every step is retracted onto the sphere by
    rescaling and accepted by an Armijo backtracking test.
    """
    grid = start.grid
    problem = _DiscreteEnergy(grid, p, q, lam)
    mass_diag = problem.mass_diag
    v = problem.normalize(start.values[1:].astype(float), r)
    value, grad, integ = problem.value_and_gradient(v)

    sigma = None
    solver = None
    tau = step
    trace = [value]
    iterations = 0
    previous = None  # (tangential gradient, preconditioned tangential gradient, direction)
    while True:
        ell = float(np.dot(grad, v)) / r
        tangent = grad - ell * mass_diag * v
        norm = math.sqrt(float(np.sum(tangent * tangent / mass_diag)))
        if norm < tol * _gradient_scale(value, integ, q, lam, r) or iterations >= max_iter:
            break
        target = max(-ell, 1e-4 * integ.grad_sq / r, 1e-8)
        if solver is None or not 0.5 < target / sigma < 2.0:
            sigma = target
            solver = splu((problem.stiffness + sparse.diags(sigma * mass_diag)).tocsc())
            previous = None
        hg = solver.solve(grad)
        hm = solver.solve(mass_diag * v)
        mv = mass_diag * v
        pre = hg - float(np.dot(mv, hg)) / float(np.dot(mv, hm)) * hm
        direction = pre
        if previous is not None:
            old_tangent, old_pre, old_direction = previous
            beta = max(0.0, float(np.dot(tangent, pre - old_pre)) / float(np.dot(old_tangent, old_pre)))
            direction = pre + beta * (old_direction - float(np.dot(mv, old_direction)) / r * v)
        slope = float(np.dot(grad, direction))
        if slope <= 0.0:
            direction, slope = pre, float(np.dot(grad, pre))
            if slope <= 0.0:
                break
        tau = min(2.0 * tau, 1e3 * step)
        found = _line_search(problem, v, value, grad, direction, slope, tau, r, _energy_noise(integ, q, lam))
        if found is None:
            if previous is not None:
                # Retry once from a plain preconditioned step before giving up.
                previous = None
                tau = step
                continue
            break
        tau, trial, t_value, t_grad, t_integ = found
        previous = (tangent, pre, direction)
        v, value, grad, integ = trial, t_value, t_grad, t_integ
        trace.append(value)
        iterations += 1
    converged = norm < tol * _gradient_scale(value, integ, q, lam, r)

    u = RadialFunction(grid, problem.full(v))
    report = _report_from_profile(u, p, q, lam, r, iterations=iterations, converged=False)
    report.multiplier = ell
    report.pohozaev_residual = pohozaev_from_integrals(report.integrals, PohozaevInput.for_ground_state(ell, q, lam))
    report.gradient_norm = norm
    report.energy_trace = trace
    report.converged = converged
    return report


COMPONENTS = ("plus_union_zero", "minus")


def _component_time(fc: FiberCoefficients, component: str) -> float | None:
    try:
        cls = classify_fiber(fc)
    except NumericalFailure:
        return None
    if component == "minus":
        return cls.minus
    t = cls.plus
    return t if t is not None else cls.point("zero")


def _fiber_objective(family: TrialFamily, p: float, q: float, lam: float, r: float, component: str):
    """Energy at the requested Nehari point of each family member's fiber (``inf`` if none)."""

    def objective(theta: np.ndarray) -> float:
        unit, _, _ = family.reference(theta, p)
        fc = FiberCoefficients.from_integrals(unit, r, q, lam)
        t = _component_time(fc, component)
        return math.inf if t is None else float(fiber_eval(fc, t).value)

    return objective


def minimize_nehari(
    p: float,
    q: float,
    lam: float,
    r: float,
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    component: str = "plus_union_zero",
    seed: int | np.random.Generator | None = 0,
    seeds: Sequence[np.ndarray] = (),
) -> SolveReport:
    """Minimize the energy over one Nehari component, restricted to a trial family.

    Each family member is projected exactly onto the component along its own
    fiber; the simplex search then runs over the family parameters. The
    witness ``r^{1/2} u^t`` is rebuilt on a grid adapted to its length scale.
    The result is an upper bound for the infimum; ``converged`` stays false
    because no stationarity is certified.
    """
    p = check_exponent(p)
    q, lam, r = check_positive("q", q), check_positive("lambda", lam), check_positive("r", r)
    if component not in COMPONENTS:
        raise InvalidInputError(f"component must be one of {COMPONENTS}, got {component!r}", component=component)
    family = family or TrialFamily()
    params = {"p": p, "q": q, "lambda": lam, "r": r, "component": component, "family": family.descriptor()}
    objective = _fiber_objective(family, p, q, lam, r, component)
    try:
        result = simplex_search(objective, family, budget, _rng(seed), seeds=seeds)
    except NumericalFailure:
        return SolveReport(
            u=None,
            energy=math.nan,
            multiplier=math.nan,
            pohozaev_residual=math.nan,
            nehari=None,
            params=params,
            iterations=budget,
            converged=False,
            method="nehari-family",
            status="empty_nehari",
        )
    return _nehari_witness(family, result.params, p, q, lam, r, component, params, result.evaluations, result.trace)


def _nehari_witness(family, theta, p, q, lam, r, component, params, evaluations, trace) -> SolveReport:
    unit, _, _ = family.reference(theta, p)
    t = _component_time(FiberCoefficients.from_integrals(unit, r, q, lam), component)
    u = family.member(theta, p, mass=r, t=t)
    report = _report_from_profile(
        u, p, q, lam, r, iterations=evaluations, converged=False, method="nehari-family", family_params=theta, dilation=t
    )
    report.params = params
    report.energy_trace = list(trace)
    return report


def detect_unbounded(p: float, q: float, lam: float, r: float, u: RadialFunction) -> bool:
    """True when the fiber of ``u`` at mass ``r`` plunges to large negative values."""
    p = check_exponent(p)
    if p < fm.TEN_THIRDS - 1e-12:
        raise DomainError("unboundedness along fibers is only possible for p >= 10/3", p=p)
    q, lam, r = check_positive("q", q), check_positive("lambda", lam), check_positive("r", r)
    unit = integrals(u, p).on_sphere(1.0)
    fc = FiberCoefficients.from_integrals(unit, r, q, lam)
    # The probe times are measured from the fiber maximum, which makes the
    # test independent of the length scale of u.
    peak = classify_fiber(fc).minus
    if peak is None:
        return False
    values = fiber_eval(fc, peak * np.array([10.0, 1e2, 1e3, 1e4])).value
    return bool(np.all(np.diff(values) < 0.0) and values[-1] < -1e6 * fiber_eval(fc, peak).value)


@dataclass
class SweepRow:
    r: float
    value: float
    status: str
    witness: SolveReport | None = field(default=None, repr=False)

    @property
    def nehari_verdict(self) -> str:
        if self.witness is None or self.witness.nehari is None:
            return ""
        return self.witness.nehari.verdict

    @property
    def pohozaev_residual(self) -> float:
        return math.nan if self.witness is None else self.witness.pohozaev_residual

    def csv_fields(self) -> tuple:
        return (self.r, self.value, self.status, self.nehari_verdict, self.pohozaev_residual)


@dataclass
class SweepResult:
    """Rows of an ``I_r`` or ``J_r`` sweep plus the checks derived from them.

    ``checks`` maps a check name to a dict with at least ``holds`` (a bool,
    or ``None`` when nothing was testable). Threshold values are family
    estimates and every range in the checks is relative to them.
    """

    kind: str
    p: float
    q: float
    lam: float
    rows: list[SweepRow]
    thresholds: dict[str, float]
    checks: dict[str, dict]
    extra_rows: list[SweepRow] = field(default_factory=list)

    CSV_HEADER = "r,value,status,nehari_verdict,pohozaev_residual"

    def csv_lines(self) -> list[str]:
        return [self.CSV_HEADER] + [",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in row.csv_fields()) for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {"p": self.p, "q": self.q, "lambda": self.lam},
            "thresholds": self.thresholds,
            "rows": [dict(zip(self.CSV_HEADER.split(","), row.csv_fields())) for row in self.rows],
            "extra_rows": [dict(zip(self.CSV_HEADER.split(","), row.csv_fields())) for row in self.extra_rows],
            "checks": self.checks,
        }


def _check_grid(r_grid: Sequence[float]) -> list[float]:
    grid = [check_positive("r", r) for r in r_grid]
    if not grid:
        raise InvalidInputError("the r grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("the r grid must be strictly ascending", r_grid=grid)
    return grid


def _row_from_report(r: float, report: SolveReport) -> SweepRow:
    if report.status == "empty_nehari":
        return SweepRow(r, math.nan, "empty_nehari", report)
    return SweepRow(r, report.energy, "finite", report)


def _nehari_rows(
    p, q, lam, radii, family, budget, component, rng, seeds
) -> list[SweepRow]:
    """Family minimization at every radius, warm-started and then cross-seeded.

    Each radius is seeded with every earlier witness. Afterwards each row is
    re-evaluated at the parameters of every other witness and keeps the best.
    """
    seeds = [np.asarray(s, dtype=float) for s in seeds]
    reports = []
    for r in radii:
        report = minimize_nehari(p, q, lam, r, family, budget, component, rng, seeds)
        reports.append(report)
        if report.family_params is not None:
            seeds.append(report.family_params)
    for i, (r, report) in enumerate(zip(radii, reports)):
        objective = _fiber_objective(family, p, q, lam, r, component)
        best_value = objective(report.family_params) if report.family_params is not None else math.inf
        best_theta = report.family_params
        for theta in seeds:
            value = objective(theta)
            if value < best_value:
                best_value, best_theta = value, theta
        if best_theta is not None and best_theta is not report.family_params:
            reports[i] = _nehari_witness(
                family, best_theta, p, q, lam, r, component, report.params, report.iterations, report.energy_trace
            )
    return [_row_from_report(r, rep) for r, rep in zip(radii, reports)]


def _strictly_decreasing(values: Sequence[float]) -> bool | None:
    if len(values) < 2:
        return None
    return bool(all(b < a for a, b in zip(values, values[1:])))


def _lookup(rows: Sequence[SweepRow], r: float) -> SweepRow | None:
    for row in rows:
        if abs(row.r - r) <= 1e-9 * max(row.r, r):
            return row
    return None


def _subadditivity(
    rows: list[SweepRow], inside, evaluate, defined=lambda r: True
) -> tuple[dict, list[SweepRow]]:
    """Test ``I_{r2} < I_{r1} + I_{r2-r1}`` for grid pairs with both masses inside the range.

    Differences where ``defined`` is false (empty component) are skipped.
    """
    finite = [row for row in rows if row.status == "finite" and inside(row.r)]
    extra: list[SweepRow] = []
    triples = []
    for i, low in enumerate(finite):
        for high in finite[i + 1 :]:
            rest = high.r - low.r
            if not defined(rest):
                continue
            other = _lookup(rows, rest) or _lookup(extra, rest)
            if other is None:
                other = evaluate(rest)
                extra.append(other)
            if other.status != "finite":
                continue
            margin = low.value + other.value - high.value
            triples.append({"r2": high.r, "r1": low.r, "r2_minus_r1": rest, "margin": margin})
    holds = None if not triples else all(t["margin"] > 0.0 for t in triples)
    return {"holds": holds, "triples": triples, "min_margin": min((t["margin"] for t in triples), default=math.nan)}, extra


def _threshold_values(p, q, lam, family, budget, rng, given) -> tuple[dict[str, float], list[np.ndarray]]:
    """Threshold estimates (unless ``given``) and the quotient minimizer to seed searches with."""
    if given is not None:
        return dict(given), []
    from .rayleigh import threshold_map, thresholds

    estimates = thresholds(q, lam, p, family, budget, rng)
    seeds = [e.params for e in estimates[:1] if e.params is not None]
    return threshold_map(estimates), seeds


def sweep_I(
    p: float,
    q: float,
    lam: float,
    r_grid: Sequence[float],
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
    threshold_values: dict[str, float] | None = None,
) -> SweepResult:
    """``I_r`` over N+ u N0 along ``r_grid`` with monotonicity and sub-additivity checks."""
    p = check_exponent(p)
    q, lam = check_positive("q", q), check_positive("lambda", lam)
    radii = _check_grid(r_grid)
    family = family or TrialFamily()
    rng = _rng(seed)
    found, seeds = _threshold_values(p, q, lam, family, budget, rng, threshold_values)

    if p >= fm.TEN_THIRDS - 1e-12:
        probe = family.canonical(family.collapsed())
        rows = []
        for r in radii:
            if detect_unbounded(p, q, lam, r, probe):
                rows.append(SweepRow(r, -math.inf, "unbounded_below"))
            else:
                rows.append(_row_from_report(r, minimize_nehari(p, q, lam, r, family, budget, "plus_union_zero", rng)))
        return SweepResult("I", p, q, lam, rows, found, {})

    rows = _nehari_rows(p, q, lam, radii, family, budget, "plus_union_zero", rng, seeds)
    witnesses = [row.witness.family_params for row in rows if row.witness is not None and row.witness.family_params is not None]

    def evaluate(r: float) -> SweepRow:
        report = minimize_nehari(p, q, lam, r, family, budget, "plus_union_zero", rng, witnesses)
        return _row_from_report(r, report)

    checks: dict[str, dict] = {}
    finite = [row for row in rows if row.status == "finite"]
    extra: list[SweepRow] = []
    if p < 3.0 - fm.P_THREE_TOL:
        limit = found.get("inf_tilde_r", math.inf)
        below = [row for row in finite if row.r < limit]
        checks["negative_everywhere"] = {"holds": bool(finite) and all(row.value < 0.0 for row in finite) and len(finite) == len(rows)}
        checks["I_over_r_decreasing"] = {
            "range": [0.0, limit],
            "holds": _strictly_decreasing([row.value / row.r for row in below]),
        }
        checks["subadditivity"], extra = _subadditivity(rows, lambda r: r < limit, evaluate)
    elif near(p, 3.0, fm.P_THREE_TOL):
        checks["lambda_regime"] = {"holds": None, "label": _lambda_regime(lam, found)}
        checks["negative_everywhere"] = {"holds": bool(finite) and all(row.value < 0.0 for row in finite)}
    else:
        r_star, r0_star = found.get("r_star", math.nan), found.get("r0_star", math.nan)
        between = [row for row in finite if r_star < row.r < r0_star]
        above = [row for row in finite if row.r > r0_star]
        beyond_star = [row for row in finite if row.r > r_star]
        checks["empty_below_r_star"] = {
            "holds": all(row.status == "empty_nehari" for row in rows if row.r < r_star) if any(row.r < r_star for row in rows) else None
        }
        checks["nonnegative_between"] = {
            "range": [r_star, r0_star],
            "holds": all(row.value >= 0.0 for row in between) if between else None,
        }
        checks["negative_above"] = {"range": [r0_star, math.inf], "holds": all(row.value < 0.0 for row in above) if above else None}
        decreasing = _strictly_decreasing([row.value for row in beyond_star])
        checks["I_decreasing_above_r_star"] = {
            "range": [r_star, math.inf],
            "holds": decreasing if p > fm.p_zero() else None,
            "observed": decreasing,
            "asserted": p > fm.p_zero(),
        }
        checks["I_over_r_decreasing"] = {
            "range": [r0_star, math.inf],
            "holds": _strictly_decreasing([row.value / row.r for row in above]),
        }
        checks["subadditivity"], extra = _subadditivity(rows, lambda r: r > r0_star, evaluate, lambda r: r > r_star)
    return SweepResult("I", p, q, lam, rows, found, checks, extra)


def _lambda_regime(lam: float, found: dict[str, float]) -> str:
    """Where ``lam`` sits relative to the two lambda threshold estimates at p = 3."""
    low, high = found["lambda_star"], found["lambda0_star"]
    if abs(lam - low) <= 1e-6 * low:
        return "boundary — unclassified"
    if abs(lam - high) <= 1e-6 * high:
        return "indeterminate"
    if lam < low:
        return "below lambda_star"
    return "between lambda_star and lambda0_star" if lam < high else "above lambda0_star"


def sweep_J(
    p: float,
    q: float,
    lam: float,
    r_grid: Sequence[float],
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
) -> SweepResult:
    """``J_r`` over the N- component along ``r_grid``, checking the N- energy identity on each witness."""
    p = check_exponent(p)
    q, lam = check_positive("q", q), check_positive("lambda", lam)
    radii = _check_grid(r_grid)
    family = family or TrialFamily()
    rows = _nehari_rows(p, q, lam, radii, family, budget, "minus", _rng(seed), [])
    errors = []
    for row in rows:
        if row.status == "finite":
            integ = row.witness.integrals
            errors.append(abs(row.value - nehari_energy(integ, q)) / max(abs(row.value), 1e-300))
    finite = [row for row in rows if row.status == "finite"]
    checks = {
        "nehari_energy_identity": {"holds": max(errors) < 1e-6 if errors else None, "max_relative_error": max(errors, default=math.nan)},
        "positive": {"holds": all(row.value > 0.0 for row in finite) if finite else None},
        "witnesses_minus": {"holds": all(row.nehari_verdict == "minus" for row in finite) if finite else None},
    }
    return SweepResult("J", p, q, lam, rows, {}, checks)


@dataclass
class AppendixReport:
    p: float
    r1: float
    r2: float
    part: str
    I_r1: float
    I_r2: float
    bound: float
    slack: float
    holds: bool | None
    k_gn: float | None = None
    c_prime: float | None = None
    f_empirical: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def appendix_estimates(
    p: float,
    q: float,
    lam: float,
    r1: float,
    r2: float,
    family: TrialFamily | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int | np.random.Generator | None = 0,
    threshold_values: dict[str, float] | None = None,
    k_gn: float | None = None,
) -> AppendixReport:
    """Compare measured ``I_{r1}, I_{r2}`` with the two comparison estimates.

    For p in (3, 10/3) the upper estimate for ``I_{r2}`` is evaluated with
    the explicit ``c'_p`` built from the GN-constant estimate; ``slack`` is
    bound minus ``I_{r2}``. For p in (2, 3) only the value of the unknown
    positive function that would make the lower estimate tight is reported.
    """
    p = check_exponent(p)
    q, lam = check_positive("q", q), check_positive("lambda", lam)
    r1, r2 = check_positive("r1", r1), check_positive("r2", r2)
    if r2 < r1:
        raise DomainError("need r1 <= r2", r1=r1, r2=r2)
    family = family or TrialFamily()
    rng = _rng(seed)
    if 3.0 < p < fm.TEN_THIRDS and not near(p, 3.0, fm.P_THREE_TOL):
        found, seeds = _threshold_values(p, q, lam, family, budget, rng, threshold_values)
        if not r1 > found["r_star"]:
            raise DomainError("the estimate needs r1 above the r* estimate", r1=r1, r_star=found["r_star"])
        part = "ii"
    elif 2.0 < p < 3.0 and not near(p, 3.0, fm.P_THREE_TOL):
        seeds = []
        part = "i"
    else:
        raise DomainError("appendix estimates cover p in (2,3) and (3,10/3)", p=p)

    radii = [r1] if r1 == r2 else [r1, r2]
    rows = _nehari_rows(p, q, lam, radii, family, budget, "plus_union_zero", rng, seeds)
    I1, I2 = rows[0].value, rows[-1].value
    ratio = r2 / r1
    if part == "ii":
        if k_gn is None:
            from .rayleigh import estimate_kgn

            k_gn = estimate_kgn(p, family, budget, rng, lam).value
        c_prime = fm.lp_floor_constant(k_gn, p)
        bound = ratio**3 * I1 - c_prime / r1 * ratio**p * (ratio ** (2.0 * (p - 3.0)) - 1.0)
        slack = bound - I2
        holds = None if r1 == r2 else bool(slack > 0.0)
        return AppendixReport(p, r1, r2, part, I1, I2, bound, slack, holds, k_gn=k_gn, c_prime=c_prime)
    bracket = ratio ** (-2.0 * (p - 3.0)) - 1.0
    scale = lam * ratio ** (-(p - 3.0)) * bracket
    f_emp = (I2 - ratio**3 * I1) / scale if scale != 0.0 else math.nan
    holds = None if math.isnan(f_emp) else bool(f_emp > 0.0)
    return AppendixReport(p, r1, r2, part, I1, I2, ratio**3 * I1, I2 - ratio**3 * I1, holds, f_empirical=f_emp)
