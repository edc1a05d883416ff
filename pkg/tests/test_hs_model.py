import numpy as np
import pytest
from hypothesis import given, strategies as st

from grassmann_twistor.hs_model import (HS_FAMILIES, HSSubspacePoint, InvalidVirtualFlag, RankAmbiguous,
                                        TruncatedPolarizedSpace, Unstable, bumped_family, frame_path_index,
                                        geometric_tail_family, hs_block_report, kernel_cokernel, make_virtual_flag,
                                        positive_half_family, shift_operator, truncation_stability,
                                        virtual_codimension, virtual_dimension)
from grassmann_twistor.numeric_core import ShapeMismatch


def test_labels_and_positions():
    sp = TruncatedPolarizedSpace(2, 3)
    assert sp.labels == [-2, -1, 1, 2, 3]
    assert sp.position(-2) == 0 and sp.position(1) == 2
    with pytest.raises(IndexError):
        sp.position(0)


@pytest.mark.parametrize("fam, expected", [(positive_half_family, 0), (bumped_family, 1), (geometric_tail_family, 0)])
def test_family_indices(fam, expected):
    for N in (4, 8, 16):
        assert virtual_dimension(fam(N)) == expected


def test_kernel_cokernel_counts():
    sp = TruncatedPolarizedSpace(3, 3)
    W = HSSubspacePoint(np.stack([sp.e(-1), sp.e(2)], axis=1), sp)
    assert kernel_cokernel(W) == (1, 2)
    assert virtual_dimension(W) == -1


@given(st.integers(2, 8), st.integers(0, 10**6))
def test_complementarity(N, seed):
    sp = TruncatedPolarizedSpace(N, N)
    r = np.random.default_rng(seed)
    k = int(r.integers(1, 2 * N))
    W = HSSubspacePoint(r.standard_normal((2 * N, k)) + 1j * r.standard_normal((2 * N, k)), sp)
    assert virtual_dimension(W) + virtual_codimension(W.perp()) == 0


@given(st.integers(3, 8), st.integers(1, 3))
def test_additivity(N, extra):
    sp = TruncatedPolarizedSpace(N, N)
    W = positive_half_family(N)
    add = HSSubspacePoint(np.stack([sp.e(-k) for k in range(1, extra + 1)], axis=1), sp)
    assert virtual_dimension(W.direct_sum(add)) == virtual_dimension(W) + extra


def test_path_stays_in_component():
    W0 = positive_half_family(6)
    W1 = geometric_tail_family(6)
    assert set(frame_path_index(W0, W1, steps=20)) == {0}


def test_rank_ambiguous():
    sp = TruncatedPolarizedSpace(2, 2)
    # positive block with one singular value right at the cutoff
    f = np.stack([sp.e(1) + 1e3 * sp.e(-1), sp.e(2)], axis=1)
    f[:, 0] = sp.e(-1) + 1e-10 * sp.e(1)
    with pytest.raises(RankAmbiguous):
        virtual_dimension(HSSubspacePoint(f, sp))


def test_shift_operator_blocks():
    sp = TruncatedPolarizedSpace(3, 3)
    rep = hs_block_report(shift_operator(sp), sp)
    assert rep.b == pytest.approx(1.0) and rep.c == 0.0
    with pytest.raises(ShapeMismatch):
        hs_block_report(np.eye(2), sp)


def test_stability_reports():
    assert truncation_stability(positive_half_family, [8, 16, 32, 64]).stable
    assert truncation_stability(bumped_family, [8, 16, 32, 64]).stable
    assert truncation_stability(geometric_tail_family, [16, 32, 64, 128]).stable
    rep = truncation_stability(geometric_tail_family, [8, 16, 32, 64])
    assert rep.dimension_constant and not rep.cauchy
    with pytest.raises(Unstable):
        rep.raise_if_unstable()
    with pytest.raises(ValueError):
        truncation_stability(positive_half_family, [8, 4])


def test_virtual_flag():
    sp = TruncatedPolarizedSpace(3, 3)
    W_in = HSSubspacePoint(np.stack([sp.e(k) for k in (1, 2, 3)], axis=1), sp)
    mid = HSSubspacePoint(sp.e(-1)[:, None], sp)
    W_out = HSSubspacePoint(np.stack([sp.e(-3), sp.e(-2)], axis=1), sp)
    V = make_virtual_flag([W_in, mid, W_out], [0, 1, -1], k=1, l=3)
    assert V.W_in is W_in and len(V.finite_parts) == 1
    with pytest.raises(InvalidVirtualFlag):
        make_virtual_flag([W_in, mid, W_out], [0, 1, 0], k=1, l=3)
    with pytest.raises(InvalidVirtualFlag):
        make_virtual_flag([W_in, mid], [0, 1], k=1, l=2)


def test_families_registered():
    assert set(HS_FAMILIES) == {"positive-half", "bumped", "geometric-tail"}
