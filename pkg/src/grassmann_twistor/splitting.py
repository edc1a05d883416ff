"""Splitting type and Harder-Narasimhan filtration of bundles over P^1.

Exponents use the tautological scale: a summand ``L^beta`` (L the tautological
line) is ``O(-beta)``, so ``span(1, z)`` has ``beta = 1``.  The exponents are
read off the dimensions of the spaces ``V_m`` of global sections of growth at
most ``|z|^m``, using ``dim V_m - dim V_(m-1) = #{i : beta_i <= m}``.

Two kinds of input are handled:

* holomorphic subbundles given by a polynomial frame in ``z`` (sections are
  polynomial vectors, found by sampling);
* bundles carrying a Koszul-Malgrange holomorphic structure presented by a
  generating frame ``num / den`` with ``num`` polynomial in ``(z, zbar)`` and
  ``den`` a positive scalar polynomial (sections are found by linear algebra on
  coefficient tensors).

The transition-function mode factors a Laurent polynomial matrix as
``f = f0 d finf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .bundle_fields import SubbundleField
from .numeric_core import (DEFAULT_TOL, BiPoly, RankDeficient, ShapeMismatch, ToleranceConfig,
                           TwistorError, column_reduce, holomorphic_column_degrees, hstack,
                           kernel_basis, numerical_rank)


class RankDeficientSampling(TwistorError):
    pass


class ProfileInconsistent(TwistorError):
    pass


class NotHolomorphic(TwistorError):
    pass


class Singular(TwistorError):
    pass


class ReconstructionFailed(TwistorError):
    pass


def _orth(a: np.ndarray, rank_tol: float, rank: int | None = None) -> np.ndarray:
    """Orthonormal basis of the column span (numerical rank unless ``rank`` is given)."""
    if a.size == 0 or a.shape[1] == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if rank is None:
        rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    return u[:, :rank]


def _select_minimal(spaces: list, shift: Callable, rank_tol: float) -> list:
    """Minimal graded basis from nested section spaces.

    ``spaces`` is a list of ``(m, basis)`` with ascending ``m``, each basis a
    matrix whose columns are flattened sections in a common layout.  At each
    step the new picks complete ``span{z^j s : s chosen earlier}`` to ``V_m``.
    Returns ``[(m, vector), ...]``.
    """
    chosen: list = []
    for m, V in spaces:
        U = [shift(v, j) for mi, v in chosen for j in range(m - mi + 1)]
        need = V.shape[1] - len(U)
        if need < 0:
            raise ProfileInconsistent(f"section space at m={m} smaller than the shifted basis")
        if need == 0:
            continue
        if U:
            Uo = _orth(np.stack(U, axis=1), rank_tol, rank=len(U))
            rest = V - Uo @ (Uo.conj().T @ V)
        else:
            rest = V
        picks = _orth(rest, rank_tol, rank=need)
        chosen.extend((m, picks[:, k]) for k in range(need))
    return chosen


def _profile_to_exponents(dims: dict, r: int) -> list[tuple[int, int]]:
    """``[(beta, multiplicity), ...]`` in descending beta from ``{m: dim V_m}``."""
    ms = sorted(dims)
    prev_delta, out = 0, []
    for m in ms[1:]:
        delta = dims[m] - dims[m - 1]
        if delta < prev_delta or delta > r:
            raise ProfileInconsistent(f"dimension profile {dims} is not a valid section count")
        if delta > prev_delta:
            out.append((m, delta - prev_delta))
        prev_delta = delta
    if prev_delta != r:
        raise ProfileInconsistent(f"profile {dims} does not reach rank {r}")
    return sorted(out, reverse=True)


@dataclass(frozen=True)
class SplittingData:
    """Exponents (descending beta) with multiplicities, plus optional filtration.

    ``filtration_frames[i]`` spans the subbundle generated by sections of growth
    at most ``filtration_exponents[i]``; these run in ascending beta, so the first
    frame is the maximal-degree (most positive) piece and the last one spans
    the whole bundle.
    """

    exponents: tuple
    multiplicities: tuple
    filtration_exponents: tuple = ()
    filtration_frames: tuple = ()
    profile: dict = field(default_factory=dict, compare=False)

    @property
    def rank(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.exponents, self.multiplicities))

    @property
    def length(self) -> int:
        return int(self.exponents[0] - self.exponents[-1])

    @property
    def degree_sum(self) -> int:
        return int(sum(b * m for b, m in self.pairs))

    def graded_pieces(self) -> list[SubbundleField]:
        """``B_i = B_(i) minus B_(i-1)`` as subbundle fields, in filtration order."""
        out, prev = [], None
        for fr in self.filtration_frames:
            out.append(SubbundleField(fr, prev))
            prev = fr
        return out


# ---------------------------------------------------------------------------
# holomorphic subbundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolomorphicSubbundle:
    """Subbundle of the trivial bundle spanned by a frame polynomial in ``z`` only."""

    frame: BiPoly
    label: str = ""

    def __post_init__(self):
        if not self.frame.is_holomorphic():
            raise NotHolomorphic("frame depends on zbar")
        probe = self.frame.eval(np.array([0.37 + 0.21j, -0.6 + 0.45j, 1.3 - 0.2j]))
        if max(numerical_rank(p, 1e-9) for p in probe) < self.frame.shape[1]:
            raise RankDeficient("frame columns are dependent")

    @property
    def rank(self) -> int:
        return self.frame.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @cached_property
    def reduced(self) -> BiPoly:
        return column_reduce(self.frame)

    @property
    def degree_bound(self) -> int:
        return int(sum(max(d, 0) for d in holomorphic_column_degrees(self.frame)))

    def field(self) -> SubbundleField:
        return SubbundleField(self.reduced, label=self.label)


def _unit_samples(k: int, offset: float = 0.0) -> np.ndarray:
    return np.exp(2j * np.pi * (np.arange(k) + offset) / k)


def section_space(E: HolomorphicSubbundle, m: int, samples: int | None = None,
                  tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of polynomial sections of degree <= m lying in ``E``.

    Returns an array of shape ``(k, d, m + 1)``; entry ``[s, i, j]`` is the
    coefficient of ``z^j`` in row ``i`` of section ``s``.  The membership
    condition ``(I - P(z)) s(z) = 0`` is imposed at ``samples`` roots of unity;
    at least ``m + degree_bound + 1`` are required for exactness.
    """
    if m < 0:
        return np.zeros((0, E.ambient_dim, 0), dtype=complex)
    d = E.ambient_dim
    need = m + E.degree_bound + 1
    k = need if samples is None else samples
    if k < need:
        raise RankDeficientSampling(f"{k} samples cannot certify degree {need - 1} conditions")
    for offset in (0.0, 0.5, 0.25, 0.125):
        z = _unit_samples(k, offset)
        g = E.frame.eval(z)
        s = np.linalg.svd(g, compute_uv=False)
        if np.all(s[:, -1] > 1e-8 * s[:, 0]):
            break
    else:
        raise RankDeficientSampling("frame degenerates at every sample rotation tried")
    u, _, _ = np.linalg.svd(g, full_matrices=False)
    Q = np.eye(d) - u @ np.conj(np.swapaxes(u, 1, 2))
    powers = z[:, None] ** np.arange(m + 1)[None, :]
    # rows: sample, output row; columns: (ambient row i, degree j)
    A = np.einsum("kab,kj->kabj", Q, powers).reshape(k * d, d * (m + 1))
    basis = kernel_basis(A, 1e3 * tol.rank_tol, floor=1.0).T
    return basis.reshape(-1, d, m + 1)


def section_dims(E: HolomorphicSubbundle, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    """``{m: dim V_m}`` from ``m = -1`` until every exponent has appeared."""
    dims = {-1: 0}
    r = E.rank
    for m in range(0, E.degree_bound + 2):
        dims[m] = section_space(E, m, tol=tol).shape[0]
        if dims[m] - dims[m - 1] == r:
            return dims
    raise ProfileInconsistent(f"section profile {dims} never reaches rank {r}")


def splitting_exponents(E: HolomorphicSubbundle, tol: ToleranceConfig = DEFAULT_TOL) -> SplittingData:
    dims = section_dims(E, tol)
    pairs = _profile_to_exponents(dims, E.rank)
    return SplittingData(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), profile=dims)


def _poly_shift(d: int, width: int):
    def shift(v, j):
        a = v.reshape(d, width)
        out = np.zeros_like(a)
        if j < width:
            out[:, j:] = a[:, : width - j]
        return out.ravel()
    return shift


def minimal_section_basis(E: HolomorphicSubbundle, tol: ToleranceConfig = DEFAULT_TOL):
    """``[(degree, BiPoly column), ...]`` forming a minimal basis of the section module."""
    data = splitting_exponents(E, tol)
    top = data.exponents[0]
    d = E.ambient_dim
    spaces = []
    for m in range(0, top + 1):
        b = section_space(E, m, tol=tol)
        padded = np.zeros((b.shape[0], d, top + 1), dtype=complex)
        padded[:, :, : m + 1] = b
        spaces.append((m, padded.reshape(b.shape[0], d * (top + 1)).T))
    chosen = _select_minimal(spaces, _poly_shift(d, top + 1), tol.rank_tol)
    out = []
    for m, v in chosen:
        col = v.reshape(d, top + 1)[:, : m + 1]
        out.append((m, BiPoly(col[:, None, :, None]).prune(1e-13)))
    return data, out


def hn_filtration(E: HolomorphicSubbundle, tol: ToleranceConfig = DEFAULT_TOL) -> SplittingData:
    data, chosen = minimal_section_basis(E, tol)
    betas = sorted(set(data.exponents))
    frames = []
    for b in betas:
        frames.append(hstack([c for m, c in chosen if m <= b]))
    return SplittingData(data.exponents, data.multiplicities, tuple(betas), tuple(frames), data.profile)


def minimal_kernel_basis(M: BiPoly, tol: ToleranceConfig = DEFAULT_TOL) -> BiPoly:
    """Minimal polynomial basis of ``{h(z) : M(z) h(z) = 0}`` for holomorphic ``M``."""
    if not M.is_holomorphic():
        raise NotHolomorphic("kernel basis needs a matrix polynomial in z")
    p, d = M.shape
    c = M.coef[:, :, :, 0]
    deg = c.shape[2] - 1
    full = numerical_rank(M.eval(0.31 + 0.17j), 1e-9)
    target = d - full
    if target == 0:
        return BiPoly.zeros(d, 0)
    top = deg * full + 1
    spaces = []
    for m in range(0, top + 1):
        # coefficients of M h for h of degree <= m
        A = np.zeros((p, m + deg + 1, d, m + 1), dtype=complex)
        for j in range(m + 1):
            A[:, j: j + deg + 1, :, j] = np.transpose(c, (0, 2, 1))
        A = A.reshape(p * (m + deg + 1), d * (m + 1))
        b = kernel_basis(A, tol.rank_tol, floor=1.0).T.reshape(-1, d, m + 1)
        padded = np.zeros((b.shape[0], d, top + 1), dtype=complex)
        padded[:, :, : m + 1] = b
        spaces.append((m, padded.reshape(b.shape[0], d * (top + 1)).T))
        if b.shape[0] >= target and _count_picks(spaces, d, top, tol) >= target:
            break
    chosen = _select_minimal(spaces, _poly_shift(d, top + 1), tol.rank_tol)[:target]
    cols = [BiPoly(v.reshape(d, top + 1)[:, : m + 1][:, None, :, None]).prune(1e-13) for m, v in chosen]
    return hstack(cols)


def _count_picks(spaces, d, top, tol) -> int:
    return len(_select_minimal(spaces, _poly_shift(d, top + 1), tol.rank_tol))


# ---------------------------------------------------------------------------
# bundles with a presented Koszul-Malgrange structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KMFrame:
    """Generators ``num[:, j] / den`` of the holomorphic sections of a bundle over C.

    ``den`` is a real scalar polynomial, positive on C.  ``lift`` (optional,
    polynomial in z) records holomorphic vectors whose orthogonal projection is
    the generator; it lets subbundles found among the sections be pulled back
    to holomorphic data.
    """

    num: BiPoly
    den: BiPoly
    lift: BiPoly | None = None

    def __post_init__(self):
        if self.den.shape != (1, 1):
            raise ShapeMismatch("denominator must be a scalar polynomial")
        if self.lift is not None and self.lift.shape != self.num.shape:
            raise ShapeMismatch("lift must have the generator shape")

    @property
    def ambient_dim(self) -> int:
        return self.num.shape[0]

    @property
    def generators(self) -> int:
        return self.num.shape[1]

    def total_degree(self) -> int:
        return self.num.total_degree()

    def sections(self, z) -> np.ndarray:
        """Generator values at ``z``, shape ``(N, d, g)``."""
        return self.num.eval(z) / self.den.eval(z)

    @staticmethod
    def combine(frames) -> "KMFrame":
        """Generators of a direct sum over a common denominator."""
        frames = [f for f in frames if f.generators > 0]
        if not frames:
            raise ShapeMismatch("no generators")
        dens = []
        for f in frames:
            if not any(f.den.allclose(g, 1e-12) for g in dens):
                dens.append(f.den)
        nums, lifts, have_lift = [], [], all(f.lift is not None for f in frames)
        for f in frames:
            factor = BiPoly.constant([[1.0]])
            skipped = False
            for g in dens:
                if not skipped and f.den.allclose(g, 1e-12):
                    skipped = True
                    continue
                factor = factor @ g
            nums.append(f.num.scale(factor))
            if have_lift:
                lifts.append(f.lift)
        den = BiPoly.constant([[1.0]])
        for g in dens:
            den = den @ g
        return KMFrame(hstack(nums), den, hstack(lifts) if have_lift else None)


def km_residual(km: KMFrame, E, z, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[float, float]:
    """``(span error, dbar error)`` of a presented frame against a subbundle field.

    The span error measures ``|(I - P) s| / |s|`` and the dbar error
    ``|P d(s)/dzbar| / |s|`` (scaled by ``1 + |z|``), maximised over the
    points and generators.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    P = E.derivs("0", z, tol)[0]
    n = km.num.eval(z)
    nb = km.num.diff("zbar").eval(z)
    q = km.den.eval(z)
    qb = km.den.diff("zbar").eval(z)
    # d/dzbar (n / q) = (nb q - n qb) / q^2
    ds = (nb * q - n * qb) / q**2
    s = n / q
    norm = np.linalg.norm(s, axis=1)
    norm = np.where(norm > 0, norm, 1.0)
    span_err = np.linalg.norm(s - P @ s, axis=1) / norm
    dbar_err = np.linalg.norm(P @ ds, axis=1) / norm / (1.0 + np.abs(z))[:, None]
    return float(np.max(span_err)), float(np.max(dbar_err))


def _tot_layout(num: BiPoly):
    c = num.coef
    a = np.arange(c.shape[2])[:, None]
    b = np.arange(c.shape[3])[None, :]
    return a + b


class _KMSections:
    """Section spaces ``V_m`` of a presented bundle, computed on coefficient tensors."""

    def __init__(self, km: KMFrame, tol: ToleranceConfig):
        self.km = km
        self.tol = tol
        num = km.num
        scales = np.sqrt(np.sum(np.abs(num.coef) ** 2, axis=(0, 2, 3)))
        scales = np.where(scales > 0, scales, 1.0)
        self.scales = scales
        self.gen = num.coef / scales[None, :, None, None]
        self.d, self.g = num.shape
        self.degQ = km.den.total_degree()
        self.Dn = num.total_degree()
        self.nz_gen = self.gen.shape[2]
        self.nb = self.gen.shape[3]

    def c_bound(self, m: int) -> int:
        return max(0, m + self.degQ + self.Dn + 2)

    def matrix(self, M: int) -> np.ndarray:
        """Map from coefficients of ``c_j(z)`` (deg <= M) to numerator coefficients."""
        d, g, nz, nb = self.d, self.g, self.nz_gen, self.nb
        A = np.zeros((d, M + nz, nb, g, M + 1), dtype=complex)
        for k in range(M + 1):
            A[:, k: k + nz, :, :, k] = np.transpose(self.gen, (0, 2, 3, 1))
        return A

    def space(self, m: int, width: int):
        """Basis of ``V_m`` as numerator tensors of shape ``(d, width, nb)``, plus c-coefficients."""
        if m + self.degQ < 0:
            return np.zeros((self.d * width * self.nb, 0), dtype=complex), None
        M = self.c_bound(m)
        A = self.matrix(M)
        d, nzA, nb = A.shape[0], A.shape[1], A.shape[2]
        tot = np.arange(nzA)[:, None] + np.arange(nb)[None, :]
        high = tot > m + self.degQ
        Af = A.reshape(d, nzA, nb, -1)
        A_high = Af[:, high, :].reshape(-1, Af.shape[-1])
        N = kernel_basis(A_high, 1e2 * self.tol.rank_tol, floor=1.0)
        image = Af.reshape(-1, Af.shape[-1]) @ N
        u, sv, vh2 = np.linalg.svd(image, full_matrices=False)
        if sv.size == 0 or sv[0] == 0:
            return np.zeros((d * width * nb, 0), dtype=complex), None
        rank = int(np.sum(sv > 1e2 * self.tol.rank_tol * max(sv[0], 1.0)))
        basis = u[:, :rank].reshape(d, nzA, nb, rank)
        # coefficients c reproducing each basis vector: image @ x = u_k
        cs = N @ (vh2[:rank].conj().T / sv[:rank][None, :])
        out = np.zeros((d, width, nb, rank), dtype=complex)
        keep = min(width, nzA)
        if np.any(np.abs(basis[:, keep:]) > 1e-9):
            raise ProfileInconsistent("section layout too narrow")
        out[:, :keep] = basis[:, :keep]
        return out.reshape(d * width * nb, rank), (cs, M)


def km_section_dims(km: KMFrame, r: int, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    S = _KMSections(km, tol)
    m0 = -S.degQ - 1
    dims = {m0: 0}
    width = S.Dn + S.degQ + 2
    for m in range(m0 + 1, S.Dn + 2):
        dims[m] = S.space(m, width + m - m0)[0].shape[1]
        if dims[m] - dims[m - 1] == r:
            return dims
    raise ProfileInconsistent(f"section profile {dims} never reaches rank {r}")


def km_splitting(km: KMFrame, r: int, tol: ToleranceConfig = DEFAULT_TOL) -> SplittingData:
    dims = km_section_dims(km, r, tol)
    pairs = _profile_to_exponents(dims, r)
    return SplittingData(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), profile=dims)


@dataclass(frozen=True)
class KMFiltration:
    data: SplittingData
    sections: tuple  # ((beta, numerator column BiPoly, lift column BiPoly | None), ...)

    def frame_upto(self, beta: int) -> BiPoly:
        return hstack([s[1] for s in self.sections if s[0] <= beta])

    def lift_upto(self, beta: int) -> BiPoly | None:
        cols = [s[2] for s in self.sections if s[0] <= beta]
        if any(c is None for c in cols):
            return None
        return hstack(cols) if cols else None


def km_hn_filtration(km: KMFrame, r: int, tol: ToleranceConfig = DEFAULT_TOL) -> KMFiltration:
    """Harder-Narasimhan data of a presented bundle of rank ``r``.

    Sections are chosen as a minimal graded basis; the filtration frames are
    their numerators (the common positive denominator does not change spans).
    """
    data = km_splitting(km, r, tol)
    S = _KMSections(km, tol)
    top = data.exponents[0]
    width = top + S.degQ + 1
    nb = S.nb
    spaces, coeffs = [], {}
    for m in sorted(data.profile):
        if m > top:
            break
        V, cs = S.space(m, width)
        spaces.append((m, V))
        coeffs[m] = (V, cs)

    def shift(v, j):
        a = v.reshape(S.d, width, nb)
        out = np.zeros_like(a)
        if j < width:
            out[:, j:] = a[:, : width - j]
        return out.ravel()

    chosen = _select_minimal(spaces, shift, tol.rank_tol)
    sections = []
    lift = km.lift
    for m, v in chosen:
        numcol = BiPoly(v.reshape(S.d, width, nb)[:, None]).prune(1e-12)
        liftcol = None
        if lift is not None:
            V, (cs, M) = coeffs[m]
            x = np.linalg.lstsq(V, v, rcond=None)[0]
            c = (cs @ x).reshape(S.g, M + 1) / S.scales[:, None]
            col = BiPoly.zeros(S.d, 1)
            for j in range(S.g):
                cj = BiPoly(c[j][None, None, :, None])
                col = col + lift[:, [j]].scale(cj)
            liftcol = col.prune(1e-12)
        sections.append((m, numcol, liftcol))
    betas = sorted(set(data.exponents))
    frames = tuple(hstack([s[1] for s in sections if s[0] <= b]) for b in betas)
    full = SplittingData(data.exponents, data.multiplicities, tuple(betas), frames, data.profile)
    return KMFiltration(full, tuple(sections))


def km_frame_holomorphic(frame: BiPoly) -> KMFrame:
    return KMFrame(frame, BiPoly.constant([[1.0]]), frame)


def km_frame_difference(F: BiPoly, F1: BiPoly | None) -> KMFrame:
    """Generators of ``F minus F1``: projections of the columns of ``F`` off ``F1``."""
    from .numeric_core import project_off

    num, det = project_off(F, F1)
    return KMFrame(num.prune(1e-14), det.prune(1e-14), F)


def km_frame_perp(F: BiPoly, tol: ToleranceConfig = DEFAULT_TOL) -> KMFrame | None:
    """Generators of ``F^perp``: ``gbar (gbar^H gbar)^-1`` with ``g`` a minimal kernel basis of ``F^T``."""
    from .numeric_core import bipoly_adjugate, bipoly_det

    h = minimal_kernel_basis(F.T, tol)
    if h.shape[1] == 0:
        return None
    gb = h.conj()
    gram = gb.H @ gb
    return KMFrame((gb @ bipoly_adjugate(gram)).prune(1e-14), bipoly_det(gram).prune(1e-14), None)


# ---------------------------------------------------------------------------
# Birkhoff factorisation of Laurent polynomial loops
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaurentMatrix:
    """``sum_k coef[:, :, k] z^(low + k)``."""

    coef: np.ndarray
    low: int

    @classmethod
    def from_bipoly(cls, b: BiPoly) -> "LaurentMatrix":
        """Read ``zbar`` as ``1/z`` (the two agree on the unit circle)."""
        c = b.coef
        low = -(c.shape[3] - 1)
        out = np.zeros(c.shape[:2] + (c.shape[2] + c.shape[3] - 1,), dtype=complex)
        for a in range(c.shape[2]):
            for bb in range(c.shape[3]):
                out[:, :, a - bb - low] += c[:, :, a, bb]
        return cls(out, low).trim()

    @classmethod
    def from_samples(cls, fn, shape, low: int, high: int) -> "LaurentMatrix":
        """Coefficients in ``[low, high]`` of a Laurent polynomial known on the unit circle."""
        L = high - low + 1
        z = np.exp(2j * np.pi * np.arange(L) / L)
        vals = fn(z) * (z ** (-low))[:, None, None]
        c = np.fft.fft(vals, axis=0) / L
        return cls(np.moveaxis(c, 0, -1), low)

    @classmethod
    def identity(cls, n: int) -> "LaurentMatrix":
        return cls(np.eye(n, dtype=complex)[:, :, None], 0)

    @property
    def shape(self):
        return self.coef.shape[:2]

    @property
    def high(self) -> int:
        return self.low + self.coef.shape[2] - 1

    def trim(self, tol: float = 1e-12) -> "LaurentMatrix":
        c = self.coef
        m = np.max(np.abs(c)) if c.size else 0.0
        if m == 0:
            return LaurentMatrix(np.zeros(c.shape[:2] + (1,), dtype=complex), 0)
        mask = np.any(np.abs(c) > tol * m, axis=(0, 1))
        idx = np.nonzero(mask)[0]
        return LaurentMatrix(c[:, :, idx[0]: idx[-1] + 1].copy(), self.low + int(idx[0]))

    def eval(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        k = np.arange(self.coef.shape[2]) + self.low
        return np.einsum("rck,nk->nrc", self.coef, z[:, None] ** k[None, :])

    def __matmul__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        a, b = self.coef, other.coef
        out = np.zeros(a.shape[:1] + b.shape[1:2] + (a.shape[2] + b.shape[2] - 1,), dtype=complex)
        for i in range(a.shape[2]):
            for j in range(b.shape[2]):
                out[:, :, i + j] += a[:, :, i] @ b[:, :, j]
        return LaurentMatrix(out, self.low + other.low).trim()

    def inverse(self) -> "LaurentMatrix":
        """Inverse, assuming a monomial determinant (so the inverse is again Laurent)."""
        n = self.shape[0]
        det_pow = self.det_power()
        low = (n - 1) * self.low - det_pow
        high = (n - 1) * self.high - det_pow
        return LaurentMatrix.from_samples(lambda z: np.linalg.inv(self.eval(z)),
                                          (n, n), low, high).trim()

    def det_power(self, tol: float = 1e-9) -> int:
        """Exponent k with ``det = c z^k``; raises :class:`Singular` otherwise."""
        n = self.shape[0]
        if self.shape != (n, n):
            raise ShapeMismatch("square matrix expected")
        low, high = n * self.low, n * self.high
        L = high - low + 1
        z = np.exp(2j * np.pi * np.arange(L) / L)
        dets = np.linalg.det(self.eval(z)) * z ** (-low)
        c = np.fft.fft(dets) / L
        mag = np.abs(c)
        k = int(np.argmax(mag))
        if mag[k] == 0 or np.sum(mag > tol * mag[k]) != 1:
            raise Singular("determinant is not a monomial, so the loop is not invertible on C*")
        return low + k


def loop_section_dims(f: LaurentMatrix, tol: ToleranceConfig = DEFAULT_TOL):
    """Profile and section bases for the bundle glued by ``s0 = f sinf``.

    ``Gamma_m = {s0 in C[z]^d : z^-m f^-1 s0 in C[1/z]^d}``; for
    ``f = diag(z^kappa)`` this is the bundle ``O(kappa)``.
    """
    g = f.inverse()
    d = f.shape[0]
    spaces, dims = [], {}
    m = -f.high - 1
    dims[m] = 0
    while True:
        m += 1
        N = m + f.high
        if N < 0:
            dims[m] = 0
            continue
        # coefficient of z^p in z^-m g s0 is sum_j g_(p+m-j) s_j
        rows = []
        for p in range(1, g.high - m + N + 1):
            row = np.zeros((d, d, N + 1), dtype=complex)
            for j in range(N + 1):
                k = p + m - j - g.low
                if 0 <= k < g.coef.shape[2]:
                    row[:, :, j] = g.coef[:, :, k]
            rows.append(row.reshape(d, d * (N + 1)))
        # s0 layout (row i, degree j) flattened as i*(N+1)+j
        if rows:
            basis = kernel_basis(np.concatenate(rows, axis=0), tol.rank_tol, floor=1.0)
        else:
            basis = np.eye(d * (N + 1), dtype=complex)
        dims[m] = basis.shape[1]
        spaces.append((m, N, basis))
        if dims[m] - dims[m - 1] == d:
            return dims, spaces
        if m > -f.low + 2:
            raise ProfileInconsistent(f"loop section profile {dims} does not close")


@dataclass(frozen=True)
class BirkhoffFactors:
    f0: LaurentMatrix
    kappa: tuple
    finf: LaurentMatrix
    error: float

    def d(self) -> LaurentMatrix:
        n = len(self.kappa)
        lo, hi = min(self.kappa), max(self.kappa)
        c = np.zeros((n, n, hi - lo + 1), dtype=complex)
        for i, k in enumerate(self.kappa):
            c[i, i, k - lo] = 1.0
        return LaurentMatrix(c, lo)


def annulus_points(n: int = 64) -> np.ndarray:
    """``n`` points spread over ``1/2 <= |z| <= 2`` (radii and angles interleaved)."""
    k = np.arange(n)
    radii = 2.0 ** (np.cos(np.pi * (k + 0.5) / n))
    return radii * np.exp(2j * np.pi * ((k * 0.618034) % 1.0))


def birkhoff_factorize(f, tol: ToleranceConfig = DEFAULT_TOL) -> BirkhoffFactors:
    """Factor ``f = f0 diag(z^kappa) finf`` with ``f0`` invertible on C, ``finf`` near infinity.

    ``kappa`` is returned in descending order.  Accepts a :class:`LaurentMatrix`
    or a BiPoly whose ``zbar`` powers are read as negative powers of ``z``.
    """
    if isinstance(f, BiPoly):
        f = LaurentMatrix.from_bipoly(f)
    n = f.shape[0]
    if f.shape != (n, n):
        raise ShapeMismatch("transition function must be square")
    pts = annulus_points()
    if np.min(np.abs(np.linalg.det(f.eval(pts)))) < tol.rank_tol:
        raise Singular("transition function is not invertible on the annulus")
    f.det_power()
    dims, spaces = loop_section_dims(f, tol)
    pairs = _profile_to_exponents(dims, n)
    width = max(N for _, N, _ in spaces) + 1

    def embed(m, N, basis):
        b = basis.reshape(n, N + 1, -1)
        out = np.zeros((n, width, b.shape[2]), dtype=complex)
        out[:, : N + 1] = b
        return out.reshape(n * width, -1)

    padded = [(m, embed(m, N, B)) for m, N, B in spaces if B.shape[1]]
    chosen = _select_minimal(padded, _poly_shift(n, width), tol.rank_tol)
    kappa = tuple(-m for m, _ in chosen)
    expected = tuple(k for b, mult in pairs for k in [-b] * mult)
    if tuple(sorted(kappa, reverse=True)) != tuple(sorted(expected, reverse=True)):
        raise ReconstructionFailed(f"basis degrees {kappa} disagree with profile {expected}")
    c = np.zeros((n, n, width), dtype=complex)
    for i, (_, v) in enumerate(chosen):
        c[:, i, :] = v.reshape(n, width)
    f0 = LaurentMatrix(c, 0).trim()
    # f0 has constant determinant; normalise so it is 1
    dk = f0.det_power()
    if dk != 0:
        raise ReconstructionFailed(f"f0 determinant has degree {dk}")
    vals = f0.eval(pts)
    if np.max(np.linalg.cond(vals)) > 1.0 / tol.rank_tol:
        raise ReconstructionFailed("f0 is too badly conditioned on the annulus")
    kap = np.array(kappa)
    # f0^-1 = adj(f0) / const has only nonnegative powers, of degree <= (n-1) deg f0
    lo = f.low - int(kap.max())
    hi = f.high - int(kap.min()) + (n - 1) * f0.high + 1
    finf = LaurentMatrix.from_samples(
        lambda z: (z[:, None] ** (-kap)[None, :])[:, :, None] * np.linalg.solve(f0.eval(z), f.eval(z)),
        (n, n), lo, hi).trim(1e-11)
    if finf.high > 0 and np.max(np.abs(finf.coef[:, :, -(finf.high):])) > 1e-8 * np.max(np.abs(finf.coef)):
        raise ReconstructionFailed("factor at infinity has positive powers of z")
    if finf.high > 0:
        finf = LaurentMatrix(finf.coef[:, :, : finf.coef.shape[2] - finf.high], finf.low).trim()
    fac = BirkhoffFactors(f0, kappa, finf, 0.0)
    recon = f0.eval(pts) @ fac.d().eval(pts) @ finf.eval(pts)
    err = float(np.max(np.linalg.norm(recon - f.eval(pts), axis=(1, 2))))
    if not np.isfinite(err) or err > 1e-6:
        raise ReconstructionFailed(f"reconstruction error {err:.3e}")
    return BirkhoffFactors(f0, kappa, finf, err)


def transition_from_subbundle(E: HolomorphicSubbundle, U: LaurentMatrix | None = None,
                              V: LaurentMatrix | None = None) -> LaurentMatrix:
    """Loop ``U^-1 diag(z^-beta) V`` gluing the same bundle as ``E``.

    ``beta`` are the column degrees of a minimal frame of ``E``; ``U`` is a
    unimodular polynomial change of chart-0 frame and ``V`` a unimodular
    change of the chart-infinity frame in ``1/z``.
    """
    data, chosen = minimal_section_basis(E)
    degs = [m for m, _ in chosen]
    r = len(degs)
    lo = -max(degs)
    c = np.zeros((r, r, max(degs) - min(degs) + 1), dtype=complex)
    for i, b in enumerate(degs):
        c[i, i, -b - lo] = 1.0
    f = LaurentMatrix(c, lo)
    if U is not None:
        f = U.inverse() @ f
    if V is not None:
        f = f @ V
    return f


# ---------------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------------


def brute_force_dims(frame: BiPoly, m_max: int) -> dict:
    """Exact ``dim V_m`` for ``m <= m_max`` by symbolic interpolation at integer nodes.

    Independent of :func:`section_space`: the frame coefficients are recognised
    as exact algebraic numbers, membership at a node is imposed through an exact
    left-kernel basis of the frame value, and ranks are computed symbolically.
    """
    import sympy as sp

    if not frame.is_holomorphic():
        raise NotHolomorphic("oracle works with frames polynomial in z")
    d, r = frame.shape
    c = frame.coef[:, :, :, 0]
    consts = [sp.sqrt(2), sp.sqrt(3), sp.sqrt(6)]

    def exact(x):
        if abs(x.imag) > 1e-12:
            return sp.nsimplify(x.real, consts) + sp.I * sp.nsimplify(x.imag, consts)
        return sp.nsimplify(x.real, consts)

    z = sp.Symbol("z")
    F = sp.Matrix(d, r, lambda i, j: sum(exact(c[i, j, k]) * z**k for k in range(c.shape[2])))
    for i in range(d):
        for j in range(r):
            check = complex(sp.N(F[i, j].subs(z, sp.Rational(3, 7))))
            approx = complex(frame.eval(3 / 7)[i, j])
            if abs(check - approx) > 1e-9 * (1 + abs(approx)):
                raise ValueError("frame coefficients are not recognisable exact numbers")
    colsum = int(sum(max(v, 0) for v in holomorphic_column_degrees(frame)))
    dims = {}
    for m in range(0, m_max + 1):
        need = m + colsum + 1
        rows = []
        node, used = 1, 0
        while used < need:
            val = F.subs(z, node)
            node += 1
            if val.rank() < r:
                continue
            left = val.T.nullspace()
            for v in left:
                row = []
                for i in range(d):
                    for j in range(m + 1):
                        row.append(v[i] * sp.Integer(node - 1) ** j)
                rows.append(row)
            used += 1
        A = sp.Matrix(rows) if rows else sp.zeros(0, d * (m + 1))
        dims[m] = d * (m + 1) - (A.rank(simplify=True) if rows else 0)
    return dims
