import numpy as np
import pytest

from grassmann_twistor import catalog
from grassmann_twistor.bundle_fields import harmonicity_residual, osculating_flag, veronese_curve
from grassmann_twistor.grassmann_flags import SigmaSubset
from grassmann_twistor.numeric_core import BiPoly
from grassmann_twistor.splitting import HolomorphicSubbundle
from grassmann_twistor.twistor import (DerivativeConditionFailed, LengthZero, NotJ2Holomorphic, NotLengthZero,
                                       NotNested, PresentedBundle, admissible_sigmas, check_km_frames,
                                       check_length_zero_form, flag_distance, forbidden_pairs, j2_residual,
                                       reduce_length, reduction_chain, twistor_lift, verify_twistor_property)

hol = catalog.hol
TAUT = hol([[[1], [0, 1]]])


def test_forbidden_pairs():
    pairs = set(forbidden_pairs(SigmaSubset((2,), 3)))
    # same membership and i > j, or mixed membership and i < j
    assert pairs == {(3, 1), (1, 2), (2, 3)}


def test_admissible_sigmas_conic(grid):
    F = osculating_flag(veronese_curve(2))
    ok = [s.indices for s in admissible_sigmas(F, grid)]
    assert sorted(ok) == [(1, 3), (2,)]
    for s in SigmaSubset.all_for(3):
        if s.indices not in ok:
            assert j2_residual(F, s, grid) > 0.1


def test_verify_and_violation(grid):
    F = osculating_flag(veronese_curve(2))
    rep = verify_twistor_property(F, SigmaSubset((2,), 3), grid)
    assert rep.passed and rep.harmonicity_residual < 1e-8
    with pytest.raises(NotJ2Holomorphic):
        verify_twistor_property(F, SigmaSubset((1,), 3), grid)


def test_flag_energy_splits(grid):
    F = osculating_flag(veronese_curve(3))
    rep = verify_twistor_property(F, SigmaSubset((2, 4), 4), grid)
    assert rep.flag_energy > 0 and rep.projected_energy > 0


def test_lift_tautological(grid):
    L = twistor_lift(PresentedBundle.present(TAUT), grid)
    assert L.sigma.indices == (1,) and L.reconstruction_error < 1e-10


def test_lift_middle_veronese(grid):
    f = veronese_curve(2)
    W = catalog.osculating_frames(f)
    L = twistor_lift(PresentedBundle.present(W[1], W[0]), grid)
    assert L.sigma.indices == (2,)
    assert [d for d, _ in L.delta_list] == [-2, 0, 2]
    assert flag_distance(L.flag_field, osculating_flag(f), grid) < 1e-10


def test_sigma_complement_duality(grid):
    for name in ("veronese-2-E2", "veronese-3-E3", "hol-mixed-degree"):
        E = catalog.presented_catalog()[name][0]
        a, b = twistor_lift(E, grid), twistor_lift(E.perp(), grid)
        assert b.sigma.indices == a.sigma.complement().indices
        assert flag_distance(a.flag_field, b.flag_field, grid) < 1e-10


def test_km_frames_valid(grid):
    for E, _, _ in list(catalog.presented_catalog().values())[:6]:
        check_km_frames(E, grid)


def test_reduce_mixed(grid):
    E = PresentedBundle.present(hol([[[1], [0, 1], [0, 0, 1]], [[0], [0], [1]]]))
    assert E.length() == 1
    E2, mv = reduce_length(E, grid)
    assert mv.name == "remove-first-filtration-piece" and mv.length == 0
    assert mv.removed_kind in ("holomorphic", "antiholomorphic")
    assert harmonicity_residual(E2.field, grid) < 1e-8


def test_reduce_length_zero_raises(grid):
    W = catalog.osculating_frames(veronese_curve(2))
    with pytest.raises(LengthZero):
        reduce_length(PresentedBundle.present(W[1], W[0]), grid)


def test_chain_on_perp_bundles(grid):
    for name, E in catalog.reduction_catalog().items():
        moves = reduction_chain(E, grid)
        lengths = [E.length()] + [m.length for m in moves]
        assert lengths[-1] == 0 and all(b < a for a, b in zip(lengths, lengths[1:])), name


def test_length_zero_form_examples(grid):
    E = check_length_zero_form(HolomorphicSubbundle(BiPoly.identity(2)), HolomorphicSubbundle(TAUT), grid)
    assert E.rank == 1
    check_length_zero_form(HolomorphicSubbundle(TAUT), None, grid)
    with pytest.raises(NotLengthZero):
        check_length_zero_form(HolomorphicSubbundle(hol([[[1], [0, 1], [0]], [[0], [0], [1]]])), None, grid)


def test_length_zero_derivative_condition(grid):
    F = HolomorphicSubbundle(hol([[[1], [0, 1], [0, 0, 1]], [[0], [0], [1]]]))
    with pytest.raises(DerivativeConditionFailed):
        check_length_zero_form(F, HolomorphicSubbundle(hol([[[1], [0, 1], [0, 0, 1]]])), grid)


def test_length_zero_not_nested(grid):
    with pytest.raises(NotNested):
        check_length_zero_form(HolomorphicSubbundle(hol([[[1], [0], [0]]])),
                               HolomorphicSubbundle(hol([[[0], [1], [0]]])), grid)
