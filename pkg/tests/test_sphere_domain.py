import numpy as np
import pytest

from grassmann_twistor.numeric_core import NonFinite
from grassmann_twistor.sphere_domain import ChartPoint, integrate_chartwise, integrate_sphere, make_grid


def test_node_count():
    g = make_grid(2, 4)
    assert len(g) == 16 and len(g.nodes) == 16


def test_disc_areas():
    g = make_grid(6, 8)
    assert abs(integrate_sphere(g, lambda p: 1.0) - 2 * np.pi) < 1e-12
    assert abs(g.weights["0"].sum() - np.pi) < 1e-12


def test_radial_integral():
    # integral of (1 + r^2)^-2 over the unit disc is pi / 2
    g = make_grid(24, 8)
    vals = {"0": 1.0 / (1 + np.abs(g.coords["0"]) ** 2) ** 2, "inf": np.zeros(len(g.coords["inf"]))}
    assert abs(integrate_chartwise(g, vals) - np.pi / 2) < 1e-10


def test_chart_symmetry():
    # (1 + |z|^2)^-2 |dz|^2 is invariant under z -> 1/z
    g = make_grid(20, 8)
    dens = lambda p: 1.0 / (1 + abs(p.coord) ** 2) ** 2
    a = integrate_sphere(g, lambda p: dens(p) if p.chart == "0" else 0.0)
    b = integrate_sphere(g, lambda p: dens(p) if p.chart == "inf" else 0.0)
    assert abs(a - b) < 1e-12 and abs(a + b - np.pi) < 1e-10


def test_refinement_converges():
    f = lambda g: integrate_chartwise(g, {ch: np.exp(-np.abs(g.coords[ch]) ** 2) for ch in ("0", "inf")})
    exact = 2 * np.pi * (1 - np.exp(-1.0))
    errs = [abs(f(make_grid(n, 8)) - exact) for n in (2, 4, 8)]
    assert errs[1] < errs[0] and errs[2] < 1e-12


def test_nonfinite_density():
    with pytest.raises(NonFinite):
        integrate_sphere(make_grid(2, 4), lambda p: np.nan)


def test_order_validation():
    with pytest.raises(ValueError):
        make_grid(1, 4)


def test_avoid_moves_nodes():
    g = make_grid(3, 4)
    target = g.coords["0"][5]
    g2 = g.avoid([target])
    assert np.min(np.abs(g2.coords["0"] - target)) >= 1e-6
    assert ChartPoint("inf", 0).z() == np.inf
