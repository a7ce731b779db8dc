"""Radial functions on a uniform grid and the scalar integrals of the energy.

Every integral is a weighted sum over the nodes. The weights carry the
``4 pi r^2`` volume factor, so ``sum(w * f)`` approximates the integral of a
radial ``f`` over the ball of radius ``r_max``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline

from ._validation import check_exponent, check_positive
from .errors import DegenerateInputError, DomainError, InvalidInputError

DEFAULT_R_MAX = 40.0
DEFAULT_N_POINTS = 4096
LEAK_TOLERANCE = 1e-8

# Half-width of the staggered difference stencil (sixth order).
_STENCIL_HALF = 3


def _stencil_weights(offsets: np.ndarray) -> np.ndarray:
    """First-derivative weights for unit spacing at offset 0."""
    n = len(offsets)
    vander = np.vander(offsets.astype(float), n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes on ``[0, r_max]`` with volume-weighted quadrature."""

    r_max: float = DEFAULT_R_MAX
    n_points: int = DEFAULT_N_POINTS
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        r_max = check_positive("r_max", self.r_max)
        n = int(self.n_points)
        if n != self.n_points or n < 3:
            raise InvalidInputError(f"grid needs at least 3 nodes, got {self.n_points}", n_points=self.n_points)
        object.__setattr__(self, "r_max", r_max)
        object.__setattr__(self, "n_points", n)

        nodes = np.linspace(0.0, r_max, n)
        h = nodes[1]
        line = np.full(n, h)
        line[0] = line[-1] = 0.5 * h
        if n >= 5:
            # Endpoint correction of the trapezoid rule at r_max. The r=0 end
            # needs none: integrands there are even in r.
            line[-1] -= 3.0 * h / 24.0
            line[-2] += 4.0 * h / 24.0
            line[-3] -= h / 24.0
        weights = 4.0 * math.pi * nodes**2 * line
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def step(self) -> float:
        return float(self.nodes[1])

    @cached_property
    def midpoints(self) -> np.ndarray:
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        mid.setflags(write=False)
        return mid

    @cached_property
    def midpoint_weights(self) -> np.ndarray:
        """Midpoint-rule weights (with the volume factor) for the cells between nodes."""
        w = 4.0 * math.pi * self.midpoints**2 * self.step
        w.setflags(write=False)
        return w

    @cached_property
    def derivative_matrix(self) -> sparse.csr_matrix:
        """Sparse map from node values to ``u'`` at the cell midpoints.

        Staggered sixth-order stencils, with even reflection across r=0 and
        one-sided stencils near r_max. Evaluating the derivative between
        nodes keeps the alternating grid mode visible to the kinetic energy,
        which a collocated central stencil would annihilate.
        """
        n = self.n_points
        half = min(_STENCIL_HALF, n // 2)
        width = 2 * half
        h = self.step
        rows, cols, vals = [], [], []
        central = _stencil_weights(np.arange(-half, half) + 0.5)
        for m in range(n - 1):
            first = m - half + 1
            if first + width - 1 <= n - 1:
                coeffs = central
            else:
                first = n - width
                coeffs = _stencil_weights(np.arange(first, first + width) - (m + 0.5))
            for k, c in enumerate(coeffs):
                rows.append(m)
                cols.append(abs(first + k))  # reflection: u(-r) = u(r)
                vals.append(c / h)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))

    def header(self) -> str:
        return f"# r_max={float(self.r_max)!r}, n={self.n_points}"


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RadialFunction:
    """Samples ``u(r_i)`` of a radial function on ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != (self.grid.n_points,):
            raise InvalidInputError(
                f"expected {self.grid.n_points} samples, got shape {values.shape}",
                shape=list(values.shape),
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("samples must be finite", bad_nodes=int(np.sum(~np.isfinite(values))))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: RadialGrid, profile) -> RadialFunction:
        return cls(grid, profile(grid.nodes))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> RadialFunction:
        return cls(grid, np.zeros(grid.n_points))

    @property
    def leak(self) -> float:
        """Boundary indicator ``u(r_max)^2 r_max^3``."""
        return float(self.values[-1] ** 2 * self.grid.r_max**3)

    def check_leak(self, tolerance: float = LEAK_TOLERANCE) -> None:
        if self.leak > tolerance:
            raise InvalidInputError(
                f"profile does not decay inside the box (leak {self.leak:.3e} > {tolerance:.1e})",
                leak=self.leak,
                r_max=self.grid.r_max,
            )

    def __mul__(self, factor: float) -> RadialFunction:
        return RadialFunction(self.grid, self.values * float(factor))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def to_csv(self, path: str | Path, metadata: dict | None = None) -> None:
        """Write ``r,u`` rows after the grid line and optional ``# key=value`` lines."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.grid.header() + "\n")
            fh.write(metadata_lines(metadata))
            fh.write("r,u\n")
            for r, u in zip(self.grid.nodes, self.values):
                fh.write(f"{float(r)!r},{float(u)!r}\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> RadialFunction:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            match = re.match(r"#\s*r_max=([^,]+),\s*n=(\d+)", first)
            if match is None:
                raise InvalidInputError(f"{path}: missing '# r_max=..., n=...' header line")
            grid = RadialGrid(float(match.group(1)), int(match.group(2)))
            rows = [line for line in fh if line.strip() and not line.startswith("#")]
        try:
            data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: unreadable rows ({exc})") from exc
        if data.shape != (grid.n_points, 2) or not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=1e-12):
            raise InvalidInputError(f"{path}: nodes do not match the declared grid")
        return cls(grid, data[:, 1])


def metadata_lines(metadata: dict | None) -> str:
    """``# key=value`` comment lines for CSV headers."""
    return "".join(f"# {key}={value}\n" for key, value in (metadata or {}).items())


@dataclass(frozen=True)
class Integrals:
    """The four scalar integrals of a profile for exponent ``p``."""

    mass: float
    grad_sq: float
    hartree: float
    lp: float
    p: float

    def __post_init__(self) -> None:
        for name in ("mass", "grad_sq", "hartree", "lp"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise InvalidInputError(f"integral {name}={value} must be finite and nonnegative")

    def dilated(self, t: float) -> Integrals:
        """Integrals of ``u^t`` from those of ``u``."""
        t = check_positive("t", t)
        return Integrals(
            self.mass,
            self.grad_sq * t**2,
            self.hartree * t,
            self.lp * t ** (1.5 * (self.p - 2.0)),
            self.p,
        )

    def scaled(self, factor: float) -> Integrals:
        """Integrals of ``factor * u``."""
        f = abs(float(factor))
        return Integrals(self.mass * f**2, self.grad_sq * f**2, self.hartree * f**4, self.lp * f**self.p, self.p)

    def on_sphere(self, r: float = 1.0) -> Integrals:
        """Integrals after rescaling the amplitude to mass ``r``."""
        r = check_positive("r", r)
        if self.mass <= 0.0:
            raise DegenerateInputError("cannot rescale a zero profile")
        return self.scaled(math.sqrt(r / self.mass))

    def with_unit_gradient(self) -> Integrals:
        """Dilate so that ``grad_sq == 1`` (mass unchanged)."""
        if self.grad_sq <= 0.0:
            raise DegenerateInputError("profile has zero gradient integral")
        return self.dilated(1.0 / math.sqrt(self.grad_sq))

    def as_dict(self) -> dict[str, float]:
        return {"mass": self.mass, "grad_sq": self.grad_sq, "hartree": self.hartree, "lp": self.lp, "p": self.p}


def integrate_mass(u: RadialFunction) -> float:
    return float(np.dot(u.grid.weights, u.values**2))


def radial_derivative(u: RadialFunction) -> np.ndarray:
    """``u'`` at the cell midpoints ``grid.midpoints``."""
    return u.grid.derivative_matrix @ u.values


def integrate_grad_sq(u: RadialFunction) -> float:
    du = radial_derivative(u)
    return float(np.dot(u.grid.midpoint_weights, du**2))


def integrate_lp(u: RadialFunction, p: float) -> float:
    p = check_exponent(p)
    return float(np.dot(u.grid.weights, np.abs(u.values) ** p))


def integrals(u: RadialFunction, p: float) -> Integrals:
    """All four integrals at once."""
    from .hartree import hartree_energy

    return Integrals(integrate_mass(u), integrate_grad_sq(u), hartree_energy(u), integrate_lp(u, p), check_exponent(p))


def dilate(u: RadialFunction, t: float, leak_tolerance: float = LEAK_TOLERANCE) -> RadialFunction:
    """Return ``u^t(r) = t^{3/2} u(t r)`` on the same grid.

    Samples are interpolated with a cubic spline that is flat at the origin.
    Points mapped beyond ``r_max`` become zero; a :class:`DomainError` is
    raised when that truncation, or the new boundary value, exceeds
    ``leak_tolerance``.
    """
    if not (isinstance(t, (int, float, np.floating)) and math.isfinite(t) and t > 0):
        raise DomainError(f"dilation factor must be positive, got {t}", t=t)
    t = float(t)
    if t == 1.0:
        return u
    grid = u.grid
    target = t * grid.nodes
    inside = target <= grid.r_max
    spline = CubicSpline(grid.nodes, u.values, bc_type=((1, 0.0), "not-a-knot"))
    values = np.zeros_like(target)
    values[inside] = t**1.5 * spline(target[inside])
    result = RadialFunction(grid, values)

    total = integrate_mass(u)
    if total > 0.0:
        beyond = grid.nodes > grid.r_max / t
        lost = float(np.dot(grid.weights[beyond], u.values[beyond] ** 2)) / total
        if lost > leak_tolerance or result.leak > leak_tolerance * max(total, 1.0):
            raise DomainError(
                f"dilation by t={t} moves mass across r_max",
                t=t,
                truncated_fraction=lost,
                leak=result.leak,
            )
    return result


def project_to_sphere(u: RadialFunction, r: float) -> RadialFunction:
    """Rescale ``u`` to mass ``r``."""
    r = check_positive("r", r)
    mass = integrate_mass(u)
    if mass <= 0.0:
        raise DegenerateInputError("cannot project the zero function onto a mass sphere")
    return u * math.sqrt(r / mass)


def gaussian(grid: RadialGrid, width: float = 1.0, mass: float = 1.0) -> RadialFunction:
    """Gaussian ``c exp(-r^2 / (2 width^2))`` with the given exact mass."""
    width = check_positive("width", width)
    amplitude = math.sqrt(mass) * (math.pi * width**2) ** -0.75
    return RadialFunction(grid, amplitude * np.exp(-0.5 * (grid.nodes / width) ** 2))
