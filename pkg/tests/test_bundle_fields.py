import numpy as np
import pytest
from hypothesis import given, strategies as st

from grassmann_twistor import catalog
from grassmann_twistor.bundle_fields import (ComplementField, RankDrop, SubbundleField, ZeroColumn, commutator_oracle,
                                             component_a, energy, fd_derivs, flag_components,
                                             flatness_identity_check, gauss_transform, harmonicity_residual,
                                             harmonicity_residual_fd, holomorphicity_residual, osculating_flag,
                                             projector_field, random_flag_field, veronese_curve)
from grassmann_twistor.numeric_core import BiPoly
from grassmann_twistor.sphere_domain import ChartPoint, make_grid

TAUT = BiPoly.from_holomorphic([[[1], [0, 1]]])


def closed_form_line(z):
    # projector onto span(1, z) and its z-derivative, written out by hand
    n = 1 + abs(z) ** 2
    P = np.array([[1, np.conj(z)], [z, abs(z) ** 2]]) / n
    Pz = np.array([[0, 0], [1, np.conj(z)]]) / n - P * np.conj(z) / n
    return P, Pz


@pytest.mark.parametrize("z", [0.0, 0.3 - 0.2j, 0.9j])
def test_line_projector_closed_form(z):
    P, Pz, Pb, _ = projector_field(SubbundleField(TAUT), ChartPoint("0", z))
    P0, Pz0 = closed_form_line(z)
    assert np.allclose(P, P0) and np.allclose(Pz, Pz0) and np.allclose(Pb, Pz0.conj().T)


def test_derivative_at_origin():
    _, Pz, _, _ = projector_field(SubbundleField(TAUT), ChartPoint("0", 0))
    expected = np.zeros((2, 2))
    expected[1, 0] = 1.0
    assert np.allclose(Pz, expected)


def test_components_of_holomorphic_line():
    E = SubbundleField(TAUT)
    p = ChartPoint("0", 0.4 + 0.1j)
    assert np.linalg.norm(component_a(E, p, "dblprime")) < 1e-14
    assert np.linalg.norm(component_a(E, p, "prime")) > 0.1
    with pytest.raises(ValueError):
        component_a(E, p, "other")


def test_rank_drop_detected():
    E = SubbundleField(BiPoly.from_holomorphic([[[0, 1], [0, 0, 1]]]))  # z * (1, z): vanishes at 0
    with pytest.raises(RankDrop):
        E.derivs("0", [0.0])
    found = E.with_rank_drops()
    assert any(abs(p) < 1e-6 for p in found.rank_drop_points.get("0", ()))
    assert harmonicity_residual(found, make_grid(4, 8)) < 1e-8


def test_gauss_transform_errors():
    with pytest.raises(ZeroColumn):
        gauss_transform(BiPoly.from_holomorphic([[[1], [2]]]))


def test_energy_of_line_and_ratio(fine_grid):
    e1 = energy(SubbundleField(TAUT), fine_grid)
    assert abs(e1 - 2 * np.pi) < 1e-8
    assert abs(energy(SubbundleField(veronese_curve(2)), fine_grid) / e1 - 2) < 1e-8


def test_constant_map_energy(fine_grid):
    assert energy(SubbundleField(BiPoly.from_holomorphic([[[1], [0]]])), fine_grid) <= 1e-12


def test_middle_veronese(grid):
    E = gauss_transform(veronese_curve(2))
    assert harmonicity_residual(E, grid) <= 1e-8
    assert holomorphicity_residual(E, grid, "prime") > 0.1
    assert holomorphicity_residual(E, grid, "dblprime") > 0.1


def test_nonharmonic_is_large(grid):
    E = SubbundleField(BiPoly.from_holomorphic([[[1], [0, 1]]]) + BiPoly(np.array([[[[0, 0]]], [[[0, 0.5]]]])))
    assert harmonicity_residual(E, grid) > 1e-2


@given(st.integers(0, 10**6))
def test_hermitian_symmetry(seed):
    F = random_flag_field(np.random.default_rng(seed), 3, (1, 2))
    z = np.array([0.2 + 0.3j, -0.5j])
    P, Pz, Pb, Pzb = F.pieces[0].derivs("0", z)
    H = lambda a: np.conj(np.swapaxes(a, 1, 2))
    assert np.allclose(P, H(P)) and np.allclose(Pb, H(Pz)) and np.allclose(Pzb, H(Pzb))
    assert np.allclose(P @ P, P)


@given(st.integers(0, 10**6))
def test_complement_symmetry(seed):
    E = random_flag_field(np.random.default_rng(seed), 3, (1, 2)).pieces[0]
    g = make_grid(4, 8)
    assert abs(harmonicity_residual(E, g) - harmonicity_residual(E.perp(), g)) < 1e-9 * (1 + harmonicity_residual(E, g))
    assert abs(harmonicity_residual(E, g) - harmonicity_residual(ComplementField(E), g)) < 1e-9 * (1 + harmonicity_residual(E, g))
    assert np.isclose(energy(E, g), energy(E.perp(), g))


@given(st.integers(0, 10**6))
def test_tensoriality_under_frame_change(seed):
    # multiplying the frame by an invertible function leaves the projector and its derivatives alone
    r = np.random.default_rng(seed)
    f = BiPoly(r.standard_normal((3, 1, 2, 2)) + np.array([2.0, 0, 0])[:, None, None, None])
    scal = BiPoly(np.array([[[[2.0, 0.3], [0.3, 1.0]]]]))  # 2 + 0.3(z + zbar) + |z|^2 > 0 on the disc
    z = np.array([0.1 + 0.2j, 0.5 - 0.4j])
    a = SubbundleField(f).derivs("0", z)
    b = SubbundleField(f.scale(scal)).derivs("0", z)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-9)


@given(st.integers(0, 10**6))
def test_ambient_rotation_invariance(seed):
    U = catalog.random_unitary(np.random.default_rng(seed), 3)
    g = make_grid(6, 12)
    E = gauss_transform(veronese_curve(2))
    F = SubbundleField(BiPoly.constant(U) @ E.frame)
    assert abs(energy(E, g) - energy(F, g)) < 1e-9
    assert harmonicity_residual(F, g) < 1e-8


def test_mobius_energy_invariance(fine_grid):
    for D, p in zip((2, 3), catalog.MOBIUS_PARAMS):
        E = SubbundleField(catalog.mobius(veronese_curve(D), *p))
        assert abs(energy(E, fine_grid) - 2 * np.pi * D) < 1e-6


@given(st.integers(0, 10**6))
def test_fd_derivatives_match_exact(seed):
    E = random_flag_field(np.random.default_rng(seed), 3, (1, 2)).pieces[0]
    z = np.array([0.3 + 0.1j])
    exact = E.derivs("0", z)
    approx = fd_derivs(E, "0", z, 1e-4)
    for a, b in zip(exact, approx):
        assert np.allclose(a, b, atol=1e-5 * (1 + np.abs(a).max()))


def test_fd_residual_second_order():
    F = osculating_flag(veronese_curve(2))
    E = F.sigma_field((2,))
    g = make_grid(6, 12)
    r3, r4 = harmonicity_residual_fd(E, g, 1e-3), harmonicity_residual_fd(E, g, 1e-4)
    assert 80 < r3 / r4 < 120


def test_commutator_oracle_pairing(grid):
    E = gauss_transform(veronese_curve(3))
    assert commutator_oracle(E, grid) < 1e-8
    N = catalog.nonharmonic_fields()["zzbar-line"]
    assert commutator_oracle(N, grid) > 1e-6 and harmonicity_residual(N, grid) > 1e-6


def test_flag_components_structure():
    F = osculating_flag(veronese_curve(2))
    comps = flag_components(F, ChartPoint("0", 0.2))
    # osculating flags only move to the next piece under d/dz
    assert np.linalg.norm(comps[(3, 1)][0]) < 1e-12 and np.linalg.norm(comps[(2, 1)][0]) > 0.1
    assert np.linalg.norm(comps[(1, 2)][1]) > 0.1


@given(st.integers(0, 10**6), st.sampled_from([(1, 1, 1), (1, 2, 1), (2, 1)]))
def test_flatness_identity_random(seed, tv):
    F = random_flag_field(np.random.default_rng(seed), sum(tv), tv)
    g = make_grid(3, 6)
    for s in range(1, F.length + 1):
        for t in range(1, F.length + 1):
            if s != t:
                assert flatness_identity_check(F, g, s, t) < 1e-8


def test_sum_field_pieces(grid):
    F = osculating_flag(veronese_curve(3))
    E = F.sigma_field((1, 3))
    assert E.rank == 2
    assert harmonicity_residual(E, grid) < 1e-8
    assert F.pointwise_error(grid) < 1e-10
