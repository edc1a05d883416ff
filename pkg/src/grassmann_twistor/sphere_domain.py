"""Two-chart model of the Riemann sphere and tensor-product quadrature on it.

Chart ``0`` uses the coordinate ``z``, chart ``inf`` uses ``w = 1/z``; each
chart integrates over its own closed unit disc, so the two discs meet only
along the equator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .numeric_core import NonFinite

Chart = Literal["0", "inf"]

#: Overall constant of the energy functional.  The artifact integrates the
#: conformally invariant density 2(|A'|^2 + |A''|^2) in Lebesgue measure of a
#: chart coordinate; with this convention a degree-one holomorphic line in
#: C^2 has energy 2*pi.
ENERGY_CONSTANT = 1.0


@dataclass(frozen=True)
class ChartPoint:
    chart: Chart
    coord: complex

    def z(self) -> complex:
        """Coordinate of this point in chart 0 (``inf`` for the pole w = 0)."""
        if self.chart == "0":
            return self.coord
        return np.inf if self.coord == 0 else 1.0 / self.coord


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre (radial) x uniform (angular) nodes on both chart discs."""

    coords: dict  # chart -> complex array of nodes
    weights: dict  # chart -> real array of Lebesgue weights
    radial_order: int
    angular_order: int
    nudged: tuple = field(default=())

    @property
    def nodes(self) -> list[ChartPoint]:
        return [ChartPoint(ch, complex(c)) for ch in ("0", "inf") for c in self.coords[ch]]

    def __len__(self) -> int:
        return sum(len(v) for v in self.coords.values())

    def avoid(self, points, chart: Chart = "0", radius: float = 1e-6,
              shift: float = 1e-5) -> "SphereGrid":
        """Copy of the grid with nodes near ``points`` pushed radially outward."""
        pts = np.asarray(list(points), dtype=complex)
        if pts.size == 0:
            return self
        coords = dict(self.coords)
        c = coords[chart].copy()
        moved = []
        for k, node in enumerate(c):
            if np.min(np.abs(pts - node)) < radius:
                r = abs(node)
                c[k] = node * (r + shift) / r if r > 0 else shift
                moved.append((chart, k))
        coords[chart] = c
        return SphereGrid(coords, self.weights, self.radial_order,
                          self.angular_order, self.nudged + tuple(moved))


def make_grid(radial_order: int, angular_order: int) -> SphereGrid:
    """Quadrature grid with ``radial_order * angular_order`` nodes per chart.

    Radii are Gauss-Legendre nodes mapped to (0, 1); the weights carry the
    polar Jacobian ``r``, so summing them gives pi on each chart.
    """
    if radial_order < 2 or angular_order < 2:
        raise ValueError("orders must be at least 2")
    x, wx = np.polynomial.legendre.leggauss(radial_order)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * wx * r
    theta = 2 * np.pi * (np.arange(angular_order) + 0.5) / angular_order
    wt = np.full(angular_order, 2 * np.pi / angular_order)
    nodes = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = (wr[:, None] * wt[None, :]).ravel()
    return SphereGrid({"0": nodes, "inf": nodes.copy()},
                      {"0": weights, "inf": weights.copy()},
                      radial_order, angular_order)


def integrate_sphere(grid: SphereGrid, density: Callable[[ChartPoint], float]) -> float:
    """Sum of the density over both charts, each in its own Lebesgue measure."""
    total = 0.0
    for point, w in zip(grid.nodes, np.concatenate([grid.weights["0"], grid.weights["inf"]])):
        v = density(point)
        if not np.isfinite(v):
            raise NonFinite(f"density is {v} at {point}")
        total += w * v
    return float(total)


def integrate_chartwise(grid: SphereGrid, values: dict) -> float:
    """Vectorised variant: ``values[chart]`` holds the density at that chart's nodes."""
    total = 0.0
    for ch in ("0", "inf"):
        v = np.asarray(values[ch], dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"density not finite on chart {ch}")
        total += float(np.dot(grid.weights[ch], v))
    return total
