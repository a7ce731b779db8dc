"""Coulomb potential of a radial density and the Hartree energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .radial import RadialFunction, RadialGrid, metadata_lines


@dataclass(frozen=True)
class HartreePotential:
    grid: RadialGrid
    phi_values: np.ndarray

    def to_csv(self, path: str | Path, metadata: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.grid.header() + "\n")
            fh.write(metadata_lines(metadata))
            fh.write("r,phi\n")
            for r, phi in zip(self.grid.nodes, self.phi_values):
                fh.write(f"{float(r)!r},{float(phi)!r}\n")


def newton_potential(grid: RadialGrid, density: np.ndarray) -> np.ndarray:
    """Potential ``int rho(y) / |x - y| dy`` of a radial density on ``grid``.

    Uses the shell decomposition ``1/max(r, s)`` with two cumulative sums.
    The kernel has a kink on the diagonal. The two leading Euler-Maclaurin
    terms of that kink are added back: ``-(pi h^2/3) rho`` and
    ``+(pi h^4/60) Lap rho``. Both keep the discrete bilinear form symmetric,
    so its derivative (see :func:`hartree_energy_and_gradient`) is exact.
    """
    nodes, weights = grid.nodes, grid.weights
    charge = weights * density
    enclosed = np.cumsum(charge)
    with np.errstate(divide="ignore", invalid="ignore"):
        shell = np.where(nodes > 0.0, charge / np.where(nodes > 0.0, nodes, 1.0), 0.0)
    outer = np.cumsum(shell[::-1])[::-1]
    outside = np.empty_like(outer)
    outside[:-1] = outer[1:]
    outside[-1] = 0.0

    phi = np.empty_like(density)
    phi[1:] = enclosed[1:] / nodes[1:] + outside[1:]
    # r = 0: only the outer shells contribute (charge[0] carries zero weight).
    phi[0] = outside[0]

    kink = math.pi * grid.step**2 / 3.0
    phi[1:] -= kink * density[1:]
    phi[0] += kink * density[0]
    # Weighted Laplacian term; the r = 0 node (zero weight) takes the even extrapolation.
    laplace = -_curvature_form(grid, density)
    phi[1:] += laplace[1:] / weights[1:]
    phi[0] += float(np.dot(_ORIGIN_EXTRAPOLATION, laplace[1:4] / weights[1:4]))
    return phi


_ORIGIN_EXTRAPOLATION = (1.5, -0.6, 0.1)


def _curvature_form(grid: RadialGrid, density: np.ndarray) -> np.ndarray:
    """``(pi h^4 / 60) D^T W D rho``: minus the weighted Laplacian term of the kink."""
    d = grid.derivative_matrix
    return (math.pi * grid.step**4 / 60.0) * (d.T @ (grid.midpoint_weights * (d @ density)))


def hartree_energy_and_gradient(grid: RadialGrid, density: np.ndarray) -> tuple[float, np.ndarray]:
    """``B`` and half its gradient with respect to the density samples.

    ``B = rho^T K rho`` with a symmetric ``K``, so the half gradient is
    ``K rho = w * phi``.
    """
    half = grid.weights * newton_potential(grid, density)
    return float(np.dot(half, density)), half


def hartree_potential(u: RadialFunction) -> HartreePotential:
    phi = newton_potential(u.grid, u.values**2)
    phi.setflags(write=False)
    return HartreePotential(u.grid, phi)


def hartree_energy(u: RadialFunction) -> float:
    """``B = int phi_u u^2`` (the coupling ``q`` is applied by callers)."""
    return hartree_energy_and_gradient(u.grid, u.values**2)[0]
