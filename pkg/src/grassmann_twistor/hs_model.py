"""Finite truncation of a polarized Hilbert space and its Grassmannian.

Basis vectors are labelled by nonzero integers: ``e_k`` with ``k < 0`` span
the negative half, ``k > 0`` the positive half.  The truncation keeps
``-N_minus .. -1`` and ``1 .. N_plus`` in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numeric_core import DEFAULT_TOL, RankDeficient, ShapeMismatch, ToleranceConfig, TwistorError, as_matrix


class RankAmbiguous(TwistorError):
    pass


class Unstable(TwistorError):
    pass


class InvalidVirtualFlag(TwistorError):
    pass


@dataclass(frozen=True)
class TruncatedPolarizedSpace:
    neg_count: int
    pos_count: int

    def __post_init__(self):
        if self.neg_count < 0 or self.pos_count < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def dim(self) -> int:
        return self.neg_count + self.pos_count

    @property
    def labels(self) -> list[int]:
        return list(range(-self.neg_count, 0)) + list(range(1, self.pos_count + 1))

    def position(self, k: int) -> int:
        if k == 0 or k < -self.neg_count or k > self.pos_count:
            raise IndexError(f"label {k} outside the truncation")
        return k + self.neg_count if k < 0 else self.neg_count + k - 1

    def e(self, k: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.position(k)] = 1.0
        return v

    @property
    def plus_slice(self) -> slice:
        return slice(self.neg_count, self.dim)

    @property
    def minus_slice(self) -> slice:
        return slice(0, self.neg_count)

    def positive_half(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)[:, self.plus_slice]

    def negative_half(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)[:, self.minus_slice]

    def swapped(self) -> "TruncatedPolarizedSpace":
        return TruncatedPolarizedSpace(self.pos_count, self.neg_count)


@dataclass(frozen=True)
class HSSubspacePoint:
    frame: np.ndarray
    space: TruncatedPolarizedSpace

    def __post_init__(self):
        f = as_matrix(self.frame)
        if f.shape[0] != self.space.dim:
            raise ShapeMismatch(f"frame has {f.shape[0]} rows, space has dimension {self.space.dim}")
        if f.shape[1] and np.linalg.matrix_rank(f) < f.shape[1]:
            raise RankDeficient("frame columns are dependent")
        object.__setattr__(self, "frame", f)

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return self.frame
        q, _ = np.linalg.qr(self.frame)
        return q

    def projector(self) -> np.ndarray:
        q = self.orthonormal()
        return q @ q.conj().T

    def perp(self) -> "HSSubspacePoint":
        u, s, _ = np.linalg.svd(self.frame, full_matrices=True)
        return HSSubspacePoint(u[:, self.dim:], self.space)

    def direct_sum(self, other: "HSSubspacePoint") -> "HSSubspacePoint":
        return HSSubspacePoint(np.hstack([self.frame, other.frame]), self.space)


def _swap_rows(W: HSSubspacePoint) -> HSSubspacePoint:
    """Same subspace with the roles of the two halves exchanged."""
    sp = W.space
    f = np.vstack([W.frame[sp.plus_slice], W.frame[sp.minus_slice]])
    return HSSubspacePoint(f, sp.swapped())


def _ranked(m: np.ndarray, tol: ToleranceConfig) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    cut = tol.rank_tol * s[0]
    if np.any((s > cut / 10) & (s < cut * 10)):
        raise RankAmbiguous(f"singular value within a factor 10 of the rank cutoff {cut:.2e}")
    return int(np.sum(s > cut))


def positive_block(W: HSSubspacePoint) -> np.ndarray:
    """Matrix of ``pr_plus`` restricted to ``W`` (orthonormal basis of W)."""
    return W.orthonormal()[W.space.plus_slice]


def negative_block(W: HSSubspacePoint) -> np.ndarray:
    return W.orthonormal()[W.space.minus_slice]


def kernel_cokernel(W: HSSubspacePoint, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[int, int]:
    wp = positive_block(W)
    rk = _ranked(wp, tol)
    return W.dim - rk, W.space.pos_count - rk


def virtual_dimension(W: HSSubspacePoint, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Index of the projection of ``W`` onto the positive half."""
    ker, coker = kernel_cokernel(W, tol)
    return ker - coker


def component_of(W: HSSubspacePoint, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    return virtual_dimension(W, tol)


def virtual_codimension(W: HSSubspacePoint, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Index with the two halves exchanged."""
    return virtual_dimension(_swap_rows(W), tol)


def frame_path_index(W0: HSSubspacePoint, W1: HSSubspacePoint, steps: int = 50,
                     tol: ToleranceConfig = DEFAULT_TOL) -> list[int]:
    """Virtual dimensions along a straight path between aligned orthonormal frames."""
    if W0.dim != W1.dim:
        raise ShapeMismatch("path needs subspaces of equal truncated dimension")
    q0, q1 = W0.orthonormal(), W1.orthonormal()
    u, _, vh = np.linalg.svd(q1.conj().T @ q0)
    q1 = q1 @ (u @ vh)
    out = []
    for t in np.linspace(0.0, 1.0, steps):
        f = (1 - t) * q0 + t * q1
        out.append(virtual_dimension(HSSubspacePoint(f, W0.space), tol))
    return out


@dataclass(frozen=True)
class BlockReport:
    a: float
    b: float
    c: float
    d: float
    min_singular: float
    in_model: bool


def hs_block_report(A, space: TruncatedPolarizedSpace) -> BlockReport:
    """Frobenius norms of the blocks ``[[a, b], [c, d]]`` over ``H_plus + H_minus``.

    ``b`` maps the negative half into the positive half and ``c`` the
    positive half into the negative half.
    """
    A = as_matrix(A)
    if A.shape != (space.dim, space.dim):
        raise ShapeMismatch(f"operator of shape {A.shape} on a space of dimension {space.dim}")
    p, m = space.plus_slice, space.minus_slice
    fro = lambda x: float(np.linalg.norm(x)) if x.size else 0.0
    smin = float(np.linalg.svd(A, compute_uv=False)[-1]) if A.size else 0.0
    return BlockReport(fro(A[p, p]), fro(A[p, m]), fro(A[m, p]), fro(A[m, m]), smin, True)


def shift_operator(space: TruncatedPolarizedSpace) -> np.ndarray:
    """``e_k -> e_(next label)``; the last basis vector is sent to zero."""
    labels = space.labels
    A = np.zeros((space.dim, space.dim), dtype=complex)
    for src, dst in zip(labels, labels[1:]):
        A[space.position(dst), space.position(src)] = 1.0
    return A


@dataclass(frozen=True)
class VirtualFlagPoint:
    """Orthogonal decomposition with one incoming (``k``) and one outgoing (``l``) slot.

    ``type_vector[k]`` is the virtual dimension of the incoming part and
    ``type_vector[l]`` the virtual codimension-side index of the outgoing part;
    other entries are plain dimensions.  Indices are 1-based.
    """

    parts: tuple
    type_vector: tuple
    k: int
    l: int

    @property
    def W_in(self) -> HSSubspacePoint:
        return self.parts[self.k - 1]

    @property
    def W_out(self) -> HSSubspacePoint:
        return self.parts[self.l - 1]

    @property
    def finite_parts(self) -> list:
        return [p for i, p in enumerate(self.parts, 1) if i not in (self.k, self.l)]


def make_virtual_flag(parts: Sequence[HSSubspacePoint], type_vector: Sequence[int], k: int, l: int,
                      tol: ToleranceConfig = DEFAULT_TOL) -> VirtualFlagPoint:
    parts, tv = tuple(parts), tuple(int(t) for t in type_vector)
    n = len(parts)
    if len(tv) != n:
        raise InvalidVirtualFlag("type vector length differs from the number of parts")
    if not (1 <= k <= n and 1 <= l <= n) or k == l:
        raise InvalidVirtualFlag("designated slots must be two distinct valid indices")
    space = parts[0].space
    if any(p.space != space for p in parts):
        raise InvalidVirtualFlag("parts live in different truncations")
    projs = [p.projector() for p in parts]
    for a in range(n):
        for b in range(a + 1, n):
            if np.linalg.norm(projs[a] @ projs[b]) > tol.residual_tol:
                raise InvalidVirtualFlag(f"parts {a + 1} and {b + 1} are not orthogonal")
    if np.linalg.norm(sum(projs) - np.eye(space.dim)) > tol.residual_tol:
        raise InvalidVirtualFlag("parts do not fill the space")
    for i, p in enumerate(parts, 1):
        if i == k:
            got = virtual_dimension(p, tol)
        elif i == l:
            got = virtual_codimension(p, tol)
        else:
            got = p.dim
        if got != tv[i - 1]:
            raise InvalidVirtualFlag(f"slot {i}: expected {tv[i - 1]}, found {got}")
    return VirtualFlagPoint(parts, tv, k, l)


@dataclass(frozen=True)
class StabilityReport:
    N_list: tuple
    dims: tuple
    minus_norms: tuple
    differences: tuple
    dimension_constant: bool
    cauchy: bool
    tolerance: float

    @property
    def stable(self) -> bool:
        return self.dimension_constant and self.cauchy

    def raise_if_unstable(self):
        if not self.stable:
            raise Unstable(f"dims {self.dims}, successive differences {self.differences}")


def truncation_stability(family: Callable[[int], HSSubspacePoint], N_list: Sequence[int],
                         cauchy_tol: float = 1e-6, tol: ToleranceConfig = DEFAULT_TOL) -> StabilityReport:
    """Virtual dimension and negative-block norm of ``family(N)`` across truncations."""
    Ns = tuple(int(n) for n in N_list)
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("N_list must be increasing")
    dims, norms = [], []
    for N in Ns:
        W = family(N)
        dims.append(virtual_dimension(W, tol))
        norms.append(float(np.linalg.norm(negative_block(W))))
    diffs = tuple(abs(b - a) for a, b in zip(norms, norms[1:]))
    return StabilityReport(Ns, tuple(dims), tuple(norms), diffs, len(set(dims)) == 1,
                           all(x <= cauchy_tol for x in diffs), cauchy_tol)


# catalog families ------------------------------------------------------------


def positive_half_family(N: int) -> HSSubspacePoint:
    sp = TruncatedPolarizedSpace(N, N)
    return HSSubspacePoint(sp.positive_half(), sp)


def bumped_family(N: int) -> HSSubspacePoint:
    """Positive half plus ``e_-1``."""
    sp = TruncatedPolarizedSpace(N, N)
    return HSSubspacePoint(np.hstack([sp.e(-1)[:, None], sp.positive_half()]), sp)


def geometric_tail_family(N: int, ratio: float = 0.5) -> HSSubspacePoint:
    """Span of ``e_k + ratio^k e_-k`` for ``k = 1 .. N``."""
    sp = TruncatedPolarizedSpace(N, N)
    cols = [sp.e(k) + ratio**k * sp.e(-k) for k in range(1, N + 1)]
    return HSSubspacePoint(np.stack(cols, axis=1), sp)


HS_FAMILIES = {
    "positive-half": positive_half_family,
    "bumped": bumped_family,
    "geometric-tail": geometric_tail_family,
}
