"""Parametric trial profiles used to search the unit mass sphere.

A parameter vector holds ``n_terms`` log-coefficients followed by
``n_terms`` log-widths. Profiles are positive sums of Gaussians or of
decaying exponentials. Because every quotient evaluated over a family is
invariant under mass rescaling and dilation, each candidate is first placed
on a canonical grid where its widest term is well resolved, and the
normalizations are then applied to its integrals analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .radial import Integrals, RadialFunction, RadialGrid, integrals

KINDS = ("single-gaussian", "gaussian-mixture", "exponential")

# Box size measured in units of the widest term.
_BOX_WIDTHS = {"single-gaussian": 10.0, "gaussian-mixture": 10.0, "exponential": 25.0}

CANONICAL_R_MAX = 40.0
CANONICAL_N_POINTS = 4096


@lru_cache(maxsize=8)
def _grid(r_max: float, n_points: int) -> RadialGrid:
    return RadialGrid(r_max, n_points)


@dataclass(frozen=True)
class TrialFamily:
    kind: str = "gaussian-mixture"
    n_terms: int = 3
    log_coeff_bounds: tuple[float, float] = (-5.0, 5.0)
    log_width_bounds: tuple[float, float] = (math.log(0.3), math.log(3.0))

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "single-gaussian" and self.n_terms != 1:
            object.__setattr__(self, "n_terms", 1)
        if self.n_terms < 1:
            raise ConfigurationError("a family needs at least one term")
        for lo, hi in (self.log_coeff_bounds, self.log_width_bounds):
            if not lo <= hi:
                raise ConfigurationError(f"empty parameter interval [{lo}, {hi}]")

    @classmethod
    def parse(cls, text: str) -> TrialFamily:
        """Parse ``kind`` or ``kind:n_terms``."""
        kind, _, terms = text.partition(":")
        if kind == "single-gaussian":
            return cls(kind, 1)
        default = 3 if kind == "gaussian-mixture" else 1
        try:
            n_terms = int(terms) if terms else default
        except ValueError as exc:
            raise ConfigurationError(f"bad term count in family descriptor {text!r}") from exc
        return cls(kind, n_terms)

    @property
    def dimension(self) -> int:
        return 2 * self.n_terms

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.log_coeff_bounds] * self.n_terms + [self.log_width_bounds] * self.n_terms)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "n_terms": self.n_terms,
            "log_coeff_bounds": list(self.log_coeff_bounds),
            "log_width_bounds": list(self.log_width_bounds),
        }

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo, hi = self.bounds.T
        return lo + (hi - lo) * rng.random((size, self.dimension))

    def clip(self, params: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds.T
        return np.clip(params, lo, hi)

    def collapsed(self) -> np.ndarray:
        """All terms equal: the single-term member embedded in the family."""
        lo, hi = self.bounds.T
        return 0.5 * (lo + hi)

    def _split(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dimension,):
            raise InvalidInputError(f"expected {self.dimension} parameters, got shape {params.shape}")
        coeffs = np.exp(params[: self.n_terms] - params[: self.n_terms].max())
        widths = np.exp(params[self.n_terms :])
        return coeffs, widths

    def profile(self, params: np.ndarray, r: np.ndarray, length: float = 1.0) -> np.ndarray:
        """Unnormalized profile with every width multiplied by ``length``."""
        coeffs, widths = self._split(params)
        x = np.asarray(r)[None, :] / (length * widths[:, None])
        shape = np.exp(-x) if self.kind == "exponential" else np.exp(-0.5 * x**2)
        return coeffs @ shape

    def _canonical_length(self, params: np.ndarray, r_max: float) -> float:
        _, widths = self._split(params)
        return r_max / (_BOX_WIDTHS[self.kind] * widths.max())

    def canonical(self, params: np.ndarray) -> RadialFunction:
        grid = _grid(CANONICAL_R_MAX, CANONICAL_N_POINTS)
        length = self._canonical_length(params, grid.r_max)
        return RadialFunction(grid, self.profile(params, grid.nodes, length))

    def reference(self, params: np.ndarray, p: float) -> tuple[Integrals, float, float]:
        """Integrals of the member with mass 1 and unit gradient integral.

        Also returns the amplitude and length factors that turn
        :meth:`profile` into that member, for rebuilding it on other grids.
        """
        grid = _grid(CANONICAL_R_MAX, CANONICAL_N_POINTS)
        length = self._canonical_length(params, grid.r_max)
        raw = integrals(RadialFunction(grid, self.profile(params, grid.nodes, length)), p)
        amplitude = 1.0 / math.sqrt(raw.mass)
        unit = raw.scaled(amplitude)
        tau = 1.0 / math.sqrt(unit.grad_sq)
        return unit.dilated(tau), amplitude * tau**1.5, length / tau

    def member(
        self,
        params: np.ndarray,
        p: float,
        mass: float = 1.0,
        t: float = 1.0,
        n_points: int = CANONICAL_N_POINTS,
    ) -> RadialFunction:
        """``mass^{1/2} u^t`` for the reference member ``u`` on an adapted grid."""
        _, amplitude, length = self.reference(params, p)
        _, widths = self._split(params)
        length_t = length / t
        r_max = _BOX_WIDTHS[self.kind] * widths.max() * length_t
        grid = RadialGrid(r_max, n_points)
        values = math.sqrt(mass) * amplitude * t**1.5 * self.profile(params, grid.nodes, length_t)
        return RadialFunction(grid, values)
