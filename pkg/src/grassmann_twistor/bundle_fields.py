"""Subbundle and flag fields over P^1 given by polynomial frames.

A subbundle is described by a polynomial frame in the chart coordinate.  All
first and second derivatives of its projector are computed in closed form from
derivatives of the frame, so harmonicity residuals carry no finite-difference
noise.  A field may also be a difference ``span(frame) - span(inner)`` (with
``inner`` pointwise inside ``frame``) or the orthogonal complement of such a
difference; both shapes occur for harmonic bundles and flag summands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .grassmann_flags import FlagPoint
from .numeric_core import (DEFAULT_TOL, BiPoly, NonFinite, ShapeMismatch, ToleranceConfig,
                           TwistorError, column_reduce, hstack)
from .sphere_domain import ENERGY_CONSTANT, ChartPoint, SphereGrid, integrate_chartwise


class RankDrop(TwistorError):
    pass


class ZeroColumn(TwistorError):
    pass


def _dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class _FrameData:
    """A frame together with its formal derivatives, in one chart."""

    g: BiPoly

    @cached_property
    def parts(self):
        gz = self.g.diff("z")
        gb = self.g.diff("zbar")
        return self.g, gz, gb, gz.diff("zbar")

    def values(self, coords):
        return [p.eval(coords) for p in self.parts]


def frame_projector_derivs(g, gz, gb, gzb, rank_tol: float = DEFAULT_TOL.rank_tol):
    """Projector of a frame and its derivatives, batched over a leading node axis.

    Returns ``(P, dP/dz, dP/dzbar, d2P/dz dzbar)``.  With ``G+`` the
    pseudo-inverse, ``dP = (I-P) dG G+ + ((I-P) d'G G+)^H`` where ``d'`` is
    the conjugate derivative; the mixed second derivative follows from the
    product rule applied once more.
    """
    n, d, r = g.shape
    eye = np.broadcast_to(np.eye(d), (n, d, d))
    if r == 0:
        z = np.zeros((n, d, d), dtype=complex)
        return z, z, z, z
    u, s, vh = np.linalg.svd(g, full_matrices=False)
    bad = s[:, -1] <= rank_tol * s[:, 0]
    if np.any(bad):
        raise RankDrop(f"frame loses rank at {int(bad.sum())} node(s)")
    P = u @ _dag(u)
    pinv = _dag(vh) @ (_dag(u) / s[:, :, None])
    Q = eye - P
    X = Q @ gz @ pinv
    Y = Q @ gb @ pinv
    Pz = X + _dag(Y)
    Pb = _dag(Pz)
    hinv = pinv @ _dag(pinv)
    # derivatives of the pseudo-inverse; d(G^H) is (conjugate-derivative of G)^H
    pinv_z = -pinv @ gz @ pinv + hinv @ _dag(gb) @ Q
    pinv_b = -pinv @ gb @ pinv + hinv @ _dag(gz) @ Q
    dbX = -Pb @ gz @ pinv + Q @ gzb @ pinv + Q @ gz @ pinv_b
    dzY = -Pz @ gb @ pinv + Q @ gzb @ pinv + Q @ gb @ pinv_z
    Pzb = dbX + _dag(dzY)
    return P, Pz, Pb, Pzb


def gram_projector_second_derivative(g, gz, gb, gzb):
    """``P`` and ``d2P/dz dzbar`` from ``P = G (G^H G)^-1 G^H`` by the product rule.

    Independent of :func:`frame_projector_derivs`: it inverts the Gram matrix
    explicitly and differentiates each of the three factors.
    """
    gh, gh_z, gh_b, gh_zb = _dag(g), _dag(gb), _dag(gz), _dag(gzb)
    H = gh @ g
    H_z = gh_z @ g + gh @ gz
    H_b = gh_b @ g + gh @ gb
    H_zb = gh_zb @ g + gh_b @ gz + gh_z @ gb + gh @ gzb
    K = np.linalg.inv(H)
    K_z = -K @ H_z @ K
    K_b = -K @ H_b @ K
    K_zb = K @ H_z @ K @ H_b @ K + K @ H_b @ K @ H_z @ K - K @ H_zb @ K
    P = g @ K @ gh
    Pzb = (gzb @ K @ gh + g @ K_zb @ gh + g @ K @ gh_zb
           + gz @ K_b @ gh + gb @ K_z @ gh
           + gz @ K @ gh_b + gb @ K @ gh_z
           + g @ K_z @ gh_b + g @ K_b @ gh_z)
    return P, Pzb


def _eval_ld(b: BiPoly, coords) -> np.ndarray:
    z = np.asarray(coords, dtype=np.clongdouble).ravel()
    c = b.coef.astype(np.clongdouble)
    pz = z[:, None] ** np.arange(c.shape[2])[None, :]
    pb = np.conj(z)[:, None] ** np.arange(c.shape[3])[None, :]
    return np.einsum("rcab,na,nb->nrc", c, pz, pb)


def _gram_projector_ld(g: np.ndarray) -> np.ndarray:
    """``G (G^H G)^-1 G^H`` by Gauss-Jordan elimination in extended precision."""
    n, d, r = g.shape
    if r == 0:
        return np.zeros((n, d, d), dtype=np.clongdouble)
    gh = np.conj(np.swapaxes(g, 1, 2))
    H = gh @ g
    A = np.concatenate([H, np.broadcast_to(np.eye(r, dtype=np.clongdouble), (n, r, r))], axis=2)
    for k in range(r):
        A[:, k, :] = A[:, k, :] / A[:, k, k][:, None]
        for i in range(r):
            if i != k:
                A[:, i, :] = A[:, i, :] - A[:, i, k][:, None] * A[:, k, :]
    return g @ A[:, :, r:] @ gh


@dataclass(frozen=True)
class SubbundleField:
    """Subbundle ``E`` of the trivial bundle over P^1.

    ``E = span(frame) minus span(inner)`` (orthogonal difference), replaced by
    its orthogonal complement when ``complement`` is set.  ``frame`` is the
    chart-0 frame; the chart-infinity frames are derived by the substitution
    ``z = 1/w`` unless given explicitly.
    """

    frame: BiPoly
    inner: BiPoly | None = None
    complement: bool = False
    infty_frame: BiPoly | None = None
    infty_inner: BiPoly | None = None
    rank_drop_points: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.inner is not None:
            if self.inner.shape[1] == 0:
                object.__setattr__(self, "inner", None)
            elif self.inner.shape[0] != self.frame.shape[0]:
                raise ShapeMismatch("inner frame lives in a different ambient space")

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def rank(self) -> int:
        r = self.frame.shape[1] - (0 if self.inner is None else self.inner.shape[1])
        return self.ambient_dim - r if self.complement else r

    @cached_property
    def chart_infty_frame(self) -> BiPoly:
        return self.infty_frame if self.infty_frame is not None else self.frame.substitute_inverse()

    @cached_property
    def chart_infty_inner(self) -> BiPoly | None:
        if self.inner is None:
            return None
        return self.infty_inner if self.infty_inner is not None else self.inner.substitute_inverse()

    def frames(self, chart: str) -> tuple[BiPoly, BiPoly | None]:
        if chart == "0":
            return self.frame, self.inner
        return self.chart_infty_frame, self.chart_infty_inner

    @cached_property
    def _data(self):
        out = {}
        for ch in ("0", "inf"):
            f, i = self.frames(ch)
            out[ch] = (_FrameData(f), None if i is None else _FrameData(i))
        return out

    def perp(self) -> "SubbundleField":
        return SubbundleField(self.frame, self.inner, not self.complement, self.infty_frame,
                              self.infty_inner, self.rank_drop_points, self.label + "^perp")

    def derivs(self, chart: str, coords, tol: ToleranceConfig = DEFAULT_TOL):
        """Batched ``(P, P_z, P_zbar, P_zzbar)`` at chart coordinates ``coords``."""
        coords = np.atleast_1d(np.asarray(coords, dtype=complex))
        outer, inner = self._data[chart]
        res = frame_projector_derivs(*outer.values(coords), rank_tol=tol.rank_tol)
        if inner is not None:
            sub = frame_projector_derivs(*inner.values(coords), rank_tol=tol.rank_tol)
            res = tuple(a - b for a, b in zip(res, sub))
        if self.complement:
            eye = np.eye(self.ambient_dim)
            res = (eye - res[0],) + tuple(-a for a in res[1:])
        return res

    def gram_derivs(self, chart: str, coords):
        """``(P, P_zzbar)`` through the explicit Gram-inverse route."""
        coords = np.atleast_1d(np.asarray(coords, dtype=complex))
        outer, inner = self._data[chart]
        P, Pzb = gram_projector_second_derivative(*outer.values(coords))
        if inner is not None:
            P2, Pzb2 = gram_projector_second_derivative(*inner.values(coords))
            P, Pzb = P - P2, Pzb - Pzb2
        if self.complement:
            P, Pzb = np.eye(self.ambient_dim) - P, -Pzb
        return P, Pzb

    def projector(self, chart: str, coords, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
        return self.derivs(chart, coords, tol)[0]

    def projector_ld(self, chart: str, coords) -> np.ndarray:
        """Projector in extended precision (used by the finite-difference oracle)."""
        f, i = self.frames(chart)
        P = _gram_projector_ld(_eval_ld(f, coords))
        if i is not None:
            P = P - _gram_projector_ld(_eval_ld(i, coords))
        if self.complement:
            P = np.eye(self.ambient_dim, dtype=np.clongdouble) - P
        return P

    def min_singular_ratio(self, chart: str, coords) -> np.ndarray:
        """Smallest relative singular value over the defining frames, per node."""
        coords = np.atleast_1d(np.asarray(coords, dtype=complex))
        ratio = np.full(coords.shape, np.inf)
        for fd in self._data[chart]:
            if fd is None:
                continue
            s = np.linalg.svd(fd.g.eval(coords), compute_uv=False)
            ratio = np.minimum(ratio, s[:, -1] / np.maximum(s[:, 0], 1e-300))
        return ratio

    def with_rank_drops(self, probe: int = 24, threshold: float = 1e-3) -> "SubbundleField":
        """Copy with rank-drop points registered from a singular-value sweep."""
        found = {}
        for ch in ("0", "inf"):
            r = np.linspace(0.0, 1.05, probe)
            t = np.linspace(0, 2 * np.pi, 2 * probe, endpoint=False)
            pts = (r[:, None] * np.exp(1j * t)[None, :]).ravel()
            ratio = self.min_singular_ratio(ch, pts)
            cands = pts[ratio < threshold]
            located = []
            for c in cands:
                res = minimize(lambda x: float(self.min_singular_ratio(ch, x[0] + 1j * x[1])[0]),
                               [c.real, c.imag], method="Nelder-Mead",
                               options=dict(xatol=1e-12, fatol=1e-16, maxiter=400))
                p = complex(res.x[0], res.x[1])
                if res.fun < 1e-6 and all(abs(p - q) > 1e-4 for q in located):
                    located.append(p)
            if located:
                found[ch] = tuple(located)
        return SubbundleField(self.frame, self.inner, self.complement, self.infty_frame,
                              self.infty_inner, found, self.label)


def prepare_grid(grid: SphereGrid, *fields) -> SphereGrid:
    """Nudge grid nodes away from rank-drop points registered on the fields."""
    for f in fields:
        for ch, pts in getattr(f, "rank_drop_points", {}).items():
            grid = grid.avoid(pts, chart=ch)
    return grid


def _point_coords(p: ChartPoint):
    return p.chart, np.array([p.coord])


def projector_field(E: SubbundleField, p: ChartPoint, tol: ToleranceConfig = DEFAULT_TOL):
    """``(P, dP/dz, dP/dzbar, d2P/dz dzbar)`` at one point, in that point's chart."""
    ch, c = _point_coords(p)
    return tuple(a[0] for a in E.derivs(ch, c, tol))


def _components(P, Pz, Pb):
    Q = np.eye(P.shape[-1]) - P
    return Q @ Pz @ P, Q @ Pb @ P


def component_a(E: SubbundleField, p: ChartPoint, kind: str = "prime",
                tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Tensorial value of ``A'_E`` (``kind='prime'``) or ``A''_E`` (``'dblprime'``)."""
    P, Pz, Pb, _ = projector_field(E, p, tol)
    a1, a2 = _components(P, Pz, Pb)
    if kind == "prime":
        return a1
    if kind == "dblprime":
        return a2
    raise ValueError(f"kind must be 'prime' or 'dblprime', not {kind!r}")


def harmonicity_matrices(P, Pz, Pb, Pzb) -> np.ndarray:
    """Residual of ``A'_E d''_E - d''_{E^perp} A'_E`` on the sections ``P c``.

    Both compositions are evaluated as written: ``d''_E s = P d(s)/dzbar``,
    ``A'_E`` acts tensorially, and ``d''_{E^perp}`` differentiates the field
    ``(I-P) P_z P`` by the product rule.
    """
    Q = np.eye(P.shape[-1]) - P
    a_prime = Q @ Pz @ P
    first = a_prime @ (P @ Pb)
    d_field = -Pb @ Pz @ P + Q @ Pzb @ P + Q @ Pz @ Pb
    second = Q @ d_field
    return first - second


def _chart_max(values: dict) -> float:
    return float(max((np.max(v) if np.size(v) else 0.0) for v in values.values()))


def fd_derivs(E, chart: str, coords, h: float):
    """Central-difference ``(P, P_z, P_zbar, P_zzbar)`` from extended-precision projectors."""
    z = np.asarray(coords, dtype=np.clongdouble)
    hh = np.longdouble(h)
    P0 = E.projector_ld(chart, z)
    Pe, Pw = E.projector_ld(chart, z + hh), E.projector_ld(chart, z - hh)
    Pn, Ps = E.projector_ld(chart, z + 1j * hh), E.projector_ld(chart, z - 1j * hh)
    Px = (Pe - Pw) / (2 * hh)
    Py = (Pn - Ps) / (2 * hh)
    lap = (Pe + Pw + Pn + Ps - 4 * P0) / hh**2
    out = (P0, 0.5 * (Px - 1j * Py), 0.5 * (Px + 1j * Py), lap / 4)
    return tuple(np.asarray(a, dtype=complex) for a in out)


def harmonicity_residual_fd(E, grid: SphereGrid, h: float) -> float:
    """Harmonicity residual with every projector derivative replaced by a difference quotient."""
    grid = prepare_grid(grid, E)
    out = {}
    for ch in ("0", "inf"):
        R = harmonicity_matrices(*fd_derivs(E, ch, grid.coords[ch], h))
        out[ch] = np.linalg.norm(R, axis=(1, 2))
    return _chart_max(out)


def harmonicity_residual(E: SubbundleField, grid: SphereGrid,
                         tol: ToleranceConfig = DEFAULT_TOL) -> float:
    grid = prepare_grid(grid, E)
    out = {}
    for ch in ("0", "inf"):
        R = harmonicity_matrices(*E.derivs(ch, grid.coords[ch], tol))
        out[ch] = np.linalg.norm(R, axis=(1, 2))
    return _chart_max(out)


def commutator_oracle(E: SubbundleField, grid: SphereGrid,
                      tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Max over nodes of ``|[d2P/dz dzbar, P]|`` with the Gram-inverse derivative route."""
    grid = prepare_grid(grid, E)
    out = {}
    for ch in ("0", "inf"):
        P, Pzb = E.gram_derivs(ch, grid.coords[ch])
        out[ch] = np.linalg.norm(Pzb @ P - P @ Pzb, axis=(1, 2))
    return _chart_max(out)


def energy_density(E: SubbundleField, chart: str, coords,
                   tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    P, Pz, Pb, _ = E.derivs(chart, coords, tol)
    a1, a2 = _components(P, Pz, Pb)
    return 2.0 * (np.sum(np.abs(a1) ** 2, axis=(1, 2)) + np.sum(np.abs(a2) ** 2, axis=(1, 2)))


def energy(E: SubbundleField, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Dirichlet energy: the density ``2(|A'|^2 + |A''|^2)`` integrated over both charts."""
    grid = prepare_grid(grid, E)
    vals = {ch: energy_density(E, ch, grid.coords[ch], tol) for ch in ("0", "inf")}
    return ENERGY_CONSTANT * integrate_chartwise(grid, vals)


def holomorphicity_residual(E: SubbundleField, grid: SphereGrid, kind: str = "dblprime",
                            tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Max of ``|A''_E|`` (holomorphic test) or ``|A'_E|`` (anti-holomorphic test)."""
    grid = prepare_grid(grid, E)
    out = {}
    for ch in ("0", "inf"):
        P, Pz, Pb, _ = E.derivs(ch, grid.coords[ch], tol)
        a1, a2 = _components(P, Pz, Pb)
        out[ch] = np.linalg.norm(a2 if kind == "dblprime" else a1, axis=(1, 2))
    return _chart_max(out)


def gauss_transform(f: BiPoly) -> SubbundleField:
    """Line bundle spanned by ``<f,f> f' - <f',f> f`` for a holomorphic column ``f``."""
    if f.shape[1] != 1 or not f.is_holomorphic():
        raise ValueError("gauss_transform expects one holomorphic column")
    if f.is_zero():
        raise ZeroColumn("input column is identically zero")
    fp = f.diff("z")
    g = fp.scale(f.H @ f) - f.scale(f.H @ fp)
    g = g.prune(1e-14)
    if g.is_zero():
        raise ZeroColumn("derivative is parallel to f everywhere (constant curve)")
    return SubbundleField(g, label="gauss")


# ---------------------------------------------------------------------------
# flag fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlagField:
    """Moving flag ``(E_1, ..., E_n)``: mutually orthogonal subbundles summing to C^d."""

    pieces: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        d = {p.ambient_dim for p in self.pieces}
        if len(d) != 1:
            raise ShapeMismatch("flag pieces live in different ambient spaces")
        if sum(p.rank for p in self.pieces) != self.ambient_dim:
            raise ShapeMismatch("piece ranks do not add up to the ambient dimension")

    @property
    def ambient_dim(self) -> int:
        return self.pieces[0].ambient_dim

    @property
    def type_vector(self) -> tuple[int, ...]:
        return tuple(p.rank for p in self.pieces)

    @property
    def length(self) -> int:
        return len(self.pieces)

    def derivs(self, chart: str, coords, tol: ToleranceConfig = DEFAULT_TOL):
        return [p.derivs(chart, coords, tol) for p in self.pieces]

    def at(self, p: ChartPoint, tol: ToleranceConfig = DEFAULT_TOL) -> FlagPoint:
        return FlagPoint(tuple(d[0][0] for d in self.derivs(p.chart, [p.coord], tol)))

    def sigma_field(self, indices: Sequence[int]) -> SubbundleField:
        """Sum of the pieces with the given 1-based indices, as a single field."""
        return SumField(tuple(self.pieces[i - 1] for i in indices))

    def pointwise_error(self, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> float:
        grid = prepare_grid(grid, *self.pieces)
        worst = 0.0
        for ch in ("0", "inf"):
            projs = [d[0] for d in self.derivs(ch, grid.coords[ch], tol)]
            total = sum(projs)
            worst = max(worst, float(np.max(np.linalg.norm(total - np.eye(self.ambient_dim), axis=(1, 2)))))
            for a in range(len(projs)):
                for b in range(a + 1, len(projs)):
                    worst = max(worst, float(np.max(np.linalg.norm(projs[a] @ projs[b], axis=(1, 2)))))
        return worst


@dataclass(frozen=True)
class SumField:
    """Orthogonal direct sum of subbundle fields; quacks like :class:`SubbundleField`."""

    parts: tuple
    label: str = ""

    @property
    def ambient_dim(self) -> int:
        return self.parts[0].ambient_dim

    @property
    def rank(self) -> int:
        return sum(p.rank for p in self.parts)

    @property
    def rank_drop_points(self) -> dict:
        out: dict = {}
        for p in self.parts:
            for ch, pts in p.rank_drop_points.items():
                out[ch] = out.get(ch, ()) + tuple(pts)
        return out

    def derivs(self, chart, coords, tol: ToleranceConfig = DEFAULT_TOL):
        ds = [p.derivs(chart, coords, tol) for p in self.parts]
        return tuple(sum(d[k] for d in ds) for k in range(4))

    def gram_derivs(self, chart, coords):
        ds = [p.gram_derivs(chart, coords) for p in self.parts]
        return sum(d[0] for d in ds), sum(d[1] for d in ds)

    def projector_ld(self, chart, coords):
        return sum(p.projector_ld(chart, coords) for p in self.parts)

    def perp(self):
        return ComplementField(self)


@dataclass(frozen=True)
class ComplementField:
    base: object

    @property
    def ambient_dim(self) -> int:
        return self.base.ambient_dim

    @property
    def rank(self) -> int:
        return self.ambient_dim - self.base.rank

    @property
    def rank_drop_points(self) -> dict:
        return self.base.rank_drop_points

    def derivs(self, chart, coords, tol: ToleranceConfig = DEFAULT_TOL):
        P, Pz, Pb, Pzb = self.base.derivs(chart, coords, tol)
        return np.eye(self.ambient_dim) - P, -Pz, -Pb, -Pzb

    def gram_derivs(self, chart, coords):
        P, Pzb = self.base.gram_derivs(chart, coords)
        return np.eye(self.ambient_dim) - P, -Pzb

    def projector_ld(self, chart, coords):
        return np.eye(self.ambient_dim, dtype=np.clongdouble) - self.base.projector_ld(chart, coords)

    def perp(self):
        return self.base


def flag_components(F: FlagField, p: ChartPoint, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    """``{(i, j): (A'_ij, A''_ij)}`` for ``i != j`` (1-based), ``A'_ij = pi_i d/dz pi_j``."""
    ds = F.derivs(p.chart, [p.coord], tol)
    out = {}
    for i, di in enumerate(ds, 1):
        for j, dj in enumerate(ds, 1):
            if i != j:
                pi, pj = di[0][0], dj[0][0]
                out[(i, j)] = (pi @ dj[1][0] @ pj, pi @ dj[2][0] @ pj)
    return out


def flag_component_arrays(ds):
    """Batched ``A'[i][j]``, ``A''[i][j]`` (0-based lists) from piece derivatives."""
    n = len(ds)
    ap = [[None] * n for _ in range(n)]
    app = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                ap[i][j] = ds[i][0] @ ds[j][1] @ ds[j][0]
                app[i][j] = ds[i][0] @ ds[j][2] @ ds[j][0]
    return ap, app


def flatness_matrices(ds, s: int, t: int) -> np.ndarray:
    """Tensorial form of ``pi_t sum_i [d/dzbar pi_i d/dz - d/dz pi_i d/dzbar] pi_s`` (0-based s, t).

    Middle terms are products of flag components; the two endpoint terms
    carry the induced connections ``d'_s, d''_s`` and ``d'_t, d''_t`` and are
    differentiated by the product rule.
    """
    ap, app = flag_component_arrays(ds)
    ps, psz, psb, pszb = ds[s]
    pt, ptz, ptb, _ = ds[t]
    total = np.zeros_like(ps)
    for i in range(len(ds)):
        if i in (s, t):
            continue
        total += app[t][i] @ ap[i][s] - ap[t][i] @ app[i][s]
    # A''_ts d'_s - A'_ts d''_s on the section pi_s c
    total += app[t][s] @ (ps @ psz) - ap[t][s] @ (ps @ psb)
    # d''_t (A'_ts pi_s c) - d'_t (A''_ts pi_s c)
    d_ap = ptb @ psz @ ps + pt @ pszb @ ps + pt @ psz @ psb
    d_app = ptz @ psb @ ps + pt @ pszb @ ps + pt @ psb @ psz
    total += pt @ d_ap - pt @ d_app
    return total @ ps


def flatness_identity_check(F: FlagField, grid: SphereGrid, s: int, t: int,
                            tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Max over nodes of the flatness identity residual for 1-based ``s != t``."""
    if s == t:
        raise ValueError("s and t must differ")
    grid = prepare_grid(grid, *F.pieces)
    out = {}
    for ch in ("0", "inf"):
        ds = F.derivs(ch, grid.coords[ch], tol)
        out[ch] = np.linalg.norm(flatness_matrices(ds, s - 1, t - 1), axis=(1, 2))
    return _chart_max(out)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def veronese_curve(degree: int, weighted: bool = True) -> BiPoly:
    """Column ``(sqrt(binom(D, k)) z^k)_k`` (or plain monomials) in C^(D+1)."""
    from math import comb

    coefs = []
    for k in range(degree + 1):
        c = [0.0] * (degree + 1)
        c[k] = np.sqrt(comb(degree, k)) if weighted else 1.0
        coefs.append(c)
    return BiPoly.from_holomorphic([coefs])


def osculating_frames(f: BiPoly, tol: ToleranceConfig = DEFAULT_TOL) -> list[BiPoly]:
    """Column-reduced frames of ``W_k = span(f, f', ..., f^(k-1))`` for k = 1 .. d-1."""
    d = f.shape[0]
    cols = [f]
    for _ in range(d - 2):
        cols.append(cols[-1].diff("z"))
    frames = []
    for k in range(1, d):
        frames.append(column_reduce(hstack(cols[:k]), tol))
    return frames


def osculating_flag(f: BiPoly, tol: ToleranceConfig = DEFAULT_TOL, label: str = "") -> FlagField:
    """Harmonic-sequence flag ``E_k = W_k - W_(k-1)`` of a full holomorphic curve."""
    d = f.shape[0]
    frames = osculating_frames(f, tol)
    pieces = [SubbundleField(frames[0], label="E1")]
    for k in range(1, d - 1):
        pieces.append(SubbundleField(frames[k], frames[k - 1], label=f"E{k + 1}"))
    pieces.append(SubbundleField(frames[-1], complement=True, label=f"E{d}"))
    return FlagField(tuple(pieces), label=label)


def merge_flag(F: FlagField, groups: Sequence[Sequence[int]]) -> FlagField:
    """Coarsen a flag by summing consecutive groups of pieces (1-based indices)."""
    pieces = []
    for g in groups:
        pieces.append(F.pieces[g[0] - 1] if len(g) == 1 else SumField(tuple(F.pieces[i - 1] for i in g)))
    return FlagField(tuple(pieces), label=F.label + "-merged")


def random_flag_field(rng: np.random.Generator, d: int, type_vector: Sequence[int],
                      degz: int = 1, degzbar: int = 1) -> FlagField:
    """Flag from nested spans of a random polynomial matrix in (z, zbar)."""
    if sum(type_vector) != d:
        raise ValueError("type vector must sum to d")
    coef = (rng.standard_normal((d, d, degz + 1, degzbar + 1))
            + 1j * rng.standard_normal((d, d, degz + 1, degzbar + 1)))
    coef[:, :, 0, 0] += 3 * np.eye(d)  # keeps the frame well conditioned on the unit disc
    G = BiPoly(coef)
    pieces, start = [], 0
    for k, r in enumerate(type_vector):
        outer = G[:, list(range(start + r))]
        inner = G[:, list(range(start))] if start else None
        if k == len(type_vector) - 1:
            pieces.append(SubbundleField(G[:, list(range(start))], complement=True))
        else:
            pieces.append(SubbundleField(outer, inner))
        start += r
    return FlagField(tuple(pieces), label="random")
