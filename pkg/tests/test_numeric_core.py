import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grassmann_twistor.numeric_core import (BiPoly, RankDeficient, ShapeMismatch, ToleranceConfig,
                                            bipoly_adjugate, bipoly_det, column_reduce, holomorphic_column_degrees,
                                            kernel_basis, nullspace, orthonormal_projector, project_off)

seeds = st.integers(0, 2**32 - 1)


def rand_bipoly(seed, rows, cols, degz=2, degzbar=1):
    r = np.random.default_rng(seed)
    c = r.standard_normal((rows, cols, degz + 1, degzbar + 1)) + 1j * r.standard_normal((rows, cols, degz + 1, degzbar + 1))
    return BiPoly(c)


def pts(seed, n=7):
    r = np.random.default_rng(seed + 1)
    return 1.5 * (r.random(n) - 0.5) + 1.5j * (r.random(n) - 0.5)


def test_projector_of_span():
    P = orthonormal_projector([[1.0], [1j]])
    assert np.allclose(P, np.array([[0.5, -0.5j], [0.5j, 0.5]]))


def test_projector_rank_deficient():
    with pytest.raises(RankDeficient):
        orthonormal_projector(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_tolerance_validation():
    with pytest.raises(ValueError):
        ToleranceConfig(rank_tol=0.0)
    with pytest.raises(ValueError):
        ToleranceConfig(residual_tol=-1.0)


def test_kernel_basis_tall_and_wide():
    a = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    k = kernel_basis(a, 1e-12)
    assert k.shape == (3, 1) and np.allclose(a @ k, 0)
    tall = np.vstack([a, a, 2 * a])
    assert kernel_basis(tall, 1e-12).shape == (3, 1)
    assert nullspace(np.eye(3)).shape == (3, 0)


def test_eval_conventions():
    m = BiPoly.z() @ BiPoly.zbar()
    z = 0.3 + 0.4j
    assert np.isclose(m.eval(z)[0, 0], abs(z) ** 2)
    assert m.eval(np.array([z, 1j])).shape == (2, 1, 1)


def test_json_roundtrip_and_layout():
    m = BiPoly.from_holomorphic([[[1], [0, 1j]]])
    data = json.loads(json.dumps(m.to_json()))
    assert data[1][0][1][0] == [0.0, 1.0]
    assert BiPoly.from_json(data).allclose(m)
    with pytest.raises(ShapeMismatch):
        BiPoly.from_json([[1.0, 2.0]])


@given(seeds)
def test_product_matches_pointwise(seed):
    a, b = rand_bipoly(seed, 2, 3), rand_bipoly(seed + 7, 3, 2)
    z = pts(seed)
    assert np.allclose((a @ b).eval(z), a.eval(z) @ b.eval(z))


@given(seeds)
def test_derivatives_against_difference_quotients(seed):
    a = rand_bipoly(seed, 2, 2)
    z, h = pts(seed, 3), 1e-6
    dx = (a.eval(z + h) - a.eval(z - h)) / (2 * h)
    dy = (a.eval(z + 1j * h) - a.eval(z - 1j * h)) / (2 * h)
    assert np.allclose(a.diff("z").eval(z), 0.5 * (dx - 1j * dy), atol=1e-6)
    assert np.allclose(a.diff("zbar").eval(z), 0.5 * (dx + 1j * dy), atol=1e-6)


@given(seeds)
def test_hermitian_conjugate_is_pointwise(seed):
    a = rand_bipoly(seed, 2, 3)
    z = pts(seed)
    assert np.allclose(a.H.eval(z), np.conj(np.swapaxes(a.eval(z), 1, 2)))


@given(seeds, st.integers(1, 3))
def test_det_and_adjugate(seed, n):
    a = rand_bipoly(seed, n, n, 1, 1)
    z = pts(seed)
    assert np.allclose(bipoly_det(a).eval(z)[:, 0, 0], np.linalg.det(a.eval(z)))
    prod = (bipoly_adjugate(a) @ a).eval(z)
    assert np.allclose(prod, bipoly_det(a).eval(z)[:, 0, 0, None, None] * np.eye(n))


@given(seeds)
def test_project_off_matches_projector(seed):
    f = rand_bipoly(seed, 4, 2, 1, 0)
    col = rand_bipoly(seed + 3, 4, 1, 1, 1)
    num, den = project_off(col, f)
    z = pts(seed, 4)
    for k, zk in enumerate(z):
        Q = np.eye(4) - orthonormal_projector(f.eval(zk))
        assert np.allclose(num.eval(zk) / den.eval(zk)[0, 0], Q @ col.eval(zk))


def test_substitute_inverse_preserves_spans():
    m = BiPoly.from_holomorphic([[[1], [0, 2], [0, 0, 1]]])
    w = 0.7 - 0.2j
    v0, v1 = m.eval(1 / w)[:, 0], m.substitute_inverse().eval(w)[:, 0]
    assert np.isclose(abs(np.vdot(v0, v1)), np.linalg.norm(v0) * np.linalg.norm(v1))


def test_column_reduce_example():
    m = BiPoly.from_holomorphic([[[1], [0, 1], [0, 0, 1]], [[0, 1], [0, 0, 1], [1, 0, 0, 1]]])
    r = column_reduce(m)
    assert sorted(holomorphic_column_degrees(r)) == [0, 1]


def test_column_reduce_dependent():
    m = BiPoly.from_holomorphic([[[1], [0, 1]], [[0, 1], [0, 0, 1]]])
    with pytest.raises(RankDeficient):
        column_reduce(m)


def test_from_function_recovers_polynomial():
    f = BiPoly.from_function(lambda z, w: np.array([[1 + 2 * z * w], [z**2]]), 2, 1, 2, 1)
    assert f.allclose(BiPoly(np.array([[[[1, 0], [0, 2], [0, 0]]], [[[0, 0], [0, 0], [1, 0]]]])), atol=1e-12)
