"""Twistor lifts of harmonic spheres into flag fields, and length reduction.

A flag field ``(E_1, ..., E_n)`` with a subset ``sigma`` is holomorphic for the
flipped structure when these components vanish for every pair ``(i, j)``:

* ``i > j`` and ``i, j`` both in or both outside ``sigma``;
* ``i < j`` and exactly one of ``i, j`` in ``sigma``.

For each such pair both ``A'_ij`` and ``A''_ji`` must be zero.  The sum of
the pieces indexed by ``sigma`` is then a harmonic subbundle.

Harmonic subbundles are handled in a presented form
``E = F minus F1`` (``F1`` inside ``F``, both holomorphic, ``d/dz`` of
sections of ``F1`` lying in ``F``), or the orthogonal complement of such a
difference.  The presentation supplies explicit holomorphic frames for the
induced structures on ``E`` and ``E^perp``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bundle_fields import (FlagField, SubbundleField, energy, flag_component_arrays,
                            harmonicity_residual, holomorphicity_residual, prepare_grid)
from .grassmann_flags import BadSigma, SigmaSubset
from .numeric_core import (DEFAULT_TOL, BiPoly, ToleranceConfig, TwistorError, column_reduce,
                           hstack, numerical_rank)
from .sphere_domain import SphereGrid
from .splitting import (HolomorphicSubbundle, KMFrame, km_frame_difference, km_frame_holomorphic,
                        km_frame_perp, km_hn_filtration, km_residual, km_splitting, minimal_kernel_basis)


class NotJ2Holomorphic(TwistorError):
    pass


class NotHarmonic(TwistorError):
    pass


class KMFrameInvalid(TwistorError):
    pass


class LiftResidualExceeded(TwistorError):
    pass


class NoReducingMove(TwistorError):
    def __init__(self, message: str, candidates: list):
        super().__init__(message)
        self.candidates = candidates


class LengthZero(TwistorError):
    pass


class NotNested(TwistorError):
    pass


class DerivativeConditionFailed(TwistorError):
    pass


class NotLengthZero(TwistorError):
    pass


@dataclass(frozen=True)
class TwistorConfig:
    """Subset ``sigma`` and type vector; ``in_index``/``out_index`` mark the infinite slots."""

    sigma: SigmaSubset
    type_vector: tuple
    in_index: int | None = None
    out_index: int | None = None

    def __post_init__(self):
        n = len(self.type_vector)
        if self.sigma.n != n:
            raise BadSigma(f"sigma is for length {self.sigma.n}, type vector has {n} slots")
        hs = self.in_index is not None or self.out_index is not None
        if hs:
            if self.in_index is None or self.out_index is None:
                raise BadSigma("both designated slots are needed")
            if self.in_index not in self.sigma or self.out_index in self.sigma:
                raise BadSigma("the incoming slot must lie in sigma and the outgoing slot outside it")
        elif any(r < 1 for r in self.type_vector):
            raise BadSigma("every slot of a finite flag needs positive rank")


def forbidden_pairs(sigma: SigmaSubset) -> list[tuple[int, int]]:
    """1-based pairs ``(i, j)`` for which ``A'_ij`` and ``A''_ji`` must vanish."""
    out = []
    for i in range(1, sigma.n + 1):
        for j in range(1, sigma.n + 1):
            if i == j:
                continue
            same = (i in sigma) == (j in sigma)
            if (i > j and same) or (i < j and not same):
                out.append((i, j))
    return out


def _check_sigma(F: FlagField, sigma: SigmaSubset):
    if sigma.n != F.length:
        raise BadSigma(f"sigma is for flags of length {sigma.n}, flag has {F.length}")


def j2_residual(F: FlagField, sigma: SigmaSubset, grid: SphereGrid,
                tol: ToleranceConfig = DEFAULT_TOL) -> float:
    _check_sigma(F, sigma)
    grid = prepare_grid(grid, *F.pieces)
    pairs = forbidden_pairs(sigma)
    worst = 0.0
    for ch in ("0", "inf"):
        ap, app = flag_component_arrays(F.derivs(ch, grid.coords[ch], tol))
        for i, j in pairs:
            worst = max(worst, float(np.max(np.linalg.norm(ap[i - 1][j - 1], axis=(1, 2)))),
                        float(np.max(np.linalg.norm(app[j - 1][i - 1], axis=(1, 2)))))
    return worst


def admissible_sigmas(F: FlagField, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> list:
    return [s for s in SigmaSubset.all_for(F.length) if j2_residual(F, s, grid, tol) <= tol.residual_tol]


def flag_energy(F: FlagField, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Energy of the flag map: half the sum of the energies of its pieces."""
    return 0.5 * sum(energy(p, grid, tol) for p in F.pieces)


@dataclass(frozen=True)
class TwistorReport:
    sigma: tuple
    j2_residual: float
    harmonicity_residual: float
    projected_energy: float
    flag_energy: float
    holomorphic_residual: float
    antiholomorphic_residual: float
    passed: bool


def verify_twistor_property(F: FlagField, sigma: SigmaSubset, grid: SphereGrid,
                            tol: ToleranceConfig = DEFAULT_TOL) -> TwistorReport:
    """Check that the sigma-projection of a holomorphic flag field is harmonic."""
    j2 = j2_residual(F, sigma, grid, tol)
    if j2 > tol.residual_tol:
        raise NotJ2Holomorphic(f"flag is not holomorphic for sigma {sigma.indices}: residual {j2:.3e}")
    E = F.sigma_field(sigma.indices)
    h = harmonicity_residual(E, grid, tol)
    return TwistorReport(sigma.indices, j2, h, energy(E, grid, tol), flag_energy(F, grid, tol),
                         holomorphicity_residual(E, grid, "dblprime", tol),
                         holomorphicity_residual(E, grid, "prime", tol),
                         h <= tol.residual_tol)


# ---------------------------------------------------------------------------
# presented harmonic bundles
# ---------------------------------------------------------------------------


def _normalise(frame: BiPoly | None, d: int) -> BiPoly | None:
    if frame is None or frame.shape[1] == 0:
        return None
    if frame.shape[0] != d:
        raise ValueError("frame lives in the wrong ambient space")
    if frame.shape[1] >= d and numerical_rank(frame.eval(0.3 + 0.2j), 1e-9) == d:
        return BiPoly.identity(d)
    return column_reduce(frame)


@dataclass(frozen=True)
class PresentedBundle:
    """``E = F minus F1`` (or its complement when ``complement`` is set).

    ``F`` and ``F1`` are holomorphic frames; ``F = None`` means the whole
    space.  ``km`` and ``km_perp`` override the frames derived from the
    presentation.
    """

    F: BiPoly | None
    F1: BiPoly | None = None
    complement: bool = False
    ambient: int | None = None
    label: str = ""
    km: KMFrame | None = field(default=None, compare=False)
    km_perp: KMFrame | None = field(default=None, compare=False)

    @classmethod
    def present(cls, F: BiPoly | None, F1: BiPoly | None = None, complement: bool = False,
                ambient: int | None = None, label: str = "") -> "PresentedBundle":
        d = ambient if ambient is not None else (F if F is not None else F1).shape[0]
        Fn = _normalise(F, d) if F is not None else BiPoly.identity(d)
        return cls(Fn, _normalise(F1, d), complement, d, label)

    @property
    def d(self) -> int:
        return self.ambient if self.ambient is not None else self.F.shape[0]

    @property
    def outer(self) -> BiPoly:
        return self.F if self.F is not None else BiPoly.identity(self.d)

    @property
    def rank(self) -> int:
        r = self.outer.shape[1] - (0 if self.F1 is None else self.F1.shape[1])
        return self.d - r if self.complement else r

    @cached_property
    def field(self) -> SubbundleField:
        return SubbundleField(self.outer, self.F1, self.complement, label=self.label)

    def perp(self) -> "PresentedBundle":
        return PresentedBundle(self.F, self.F1, not self.complement, self.ambient,
                               self.label + "^perp", self.km_perp, self.km)

    def _km_difference(self) -> KMFrame:
        return km_frame_difference(self.outer, self.F1)

    def _km_sum(self) -> KMFrame | None:
        parts = []
        if self.F1 is not None:
            parts.append(km_frame_holomorphic(self.F1))
        if self.outer.shape[1] < self.d:
            perp = km_frame_perp(self.outer)
            if perp is not None:
                parts.append(perp)
        return KMFrame.combine(parts) if parts else None

    @cached_property
    def km_frame(self) -> KMFrame:
        if self.km is not None:
            return self.km
        return self._km_sum() if self.complement else self._km_difference()

    @cached_property
    def km_perp_frame(self) -> KMFrame:
        if self.km_perp is not None:
            return self.km_perp
        return self._km_difference() if self.complement else self._km_sum()

    def splitting(self, tol: ToleranceConfig = DEFAULT_TOL):
        return km_splitting(self.km_frame, self.rank, tol)

    def length(self, tol: ToleranceConfig = DEFAULT_TOL) -> int:
        return self.splitting(tol).length

    def with_frames(self, km: KMFrame | None = None, km_perp: KMFrame | None = None) -> "PresentedBundle":
        return PresentedBundle(self.F, self.F1, self.complement, self.ambient, self.label,
                               km if km is not None else self.km,
                               km_perp if km_perp is not None else self.km_perp)


def _probe_points(grid: SphereGrid, count: int = 24) -> np.ndarray:
    pts = grid.coords["0"]
    step = max(1, len(pts) // count)
    return np.concatenate([pts[::step], [0.0, 2.5 + 1.5j, -4.0j]])


def check_km_frames(E: PresentedBundle, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL):
    """Raise :class:`KMFrameInvalid` unless both presented frames span and are holomorphic."""
    z = _probe_points(grid)
    for name, km, fld, r in (("E", E.km_frame, E.field, E.rank),
                             ("E^perp", E.km_perp_frame, E.field.perp(), E.d - E.rank)):
        if r == 0:
            continue
        if km is None:
            raise KMFrameInvalid(f"no frame for {name}")
        span_err, dbar_err = km_residual(km, fld, z, tol)
        if span_err > tol.residual_tol or dbar_err > tol.residual_tol:
            raise KMFrameInvalid(f"{name} frame fails: span error {span_err:.2e}, dbar error {dbar_err:.2e}")
        rk = min(numerical_rank(v, 1e-8) for v in km.sections(z))
        if rk < r:
            raise KMFrameInvalid(f"{name} frame has rank {rk} < {r} somewhere")


@dataclass(frozen=True)
class LiftResult:
    flag_field: FlagField
    sigma: SigmaSubset
    delta_list: tuple  # ((delta, multiplicity), ...) ascending
    j2_residual: float
    reconstruction_error: float
    sources: tuple  # "E" or "perp" per piece


def _pieces(filt) -> list[tuple[int, SubbundleField]]:
    out, prev = [], None
    for beta, fr in zip(filt.data.filtration_exponents, filt.data.filtration_frames):
        out.append((beta, SubbundleField(fr, prev)))
        prev = fr
    return out


def twistor_lift(E: PresentedBundle, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL,
                 recon_tol: float | None = None) -> LiftResult:
    """Flag field whose sigma-projection is ``E``, built from the two filtrations.

    Pieces of ``E`` and ``E^perp`` are merged by ascending ``delta = -beta``;
    on ties a piece of ``E`` comes first.  ``sigma`` is the set of positions
    of the pieces of ``E``.
    """
    if E.rank == 0 or E.rank == E.d:
        raise ValueError("lift needs a proper nonzero subbundle")
    h = harmonicity_residual(E.field, grid, tol)
    if h > tol.residual_tol:
        raise NotHarmonic(f"harmonicity residual {h:.3e}")
    check_km_frames(E, grid, tol)
    hn_e = km_hn_filtration(E.km_frame, E.rank, tol)
    hn_p = km_hn_filtration(E.km_perp_frame, E.d - E.rank, tol)
    tagged = [(-b, 0, k, p) for k, (b, p) in enumerate(_pieces(hn_e))]
    tagged += [(-b, 1, k, p) for k, (b, p) in enumerate(_pieces(hn_p))]
    tagged.sort(key=lambda t: (t[0], t[1], t[2]))
    flag = FlagField(tuple(t[3] for t in tagged), label=f"lift({E.label})")
    sigma = SigmaSubset(tuple(i + 1 for i, t in enumerate(tagged) if t[1] == 0), len(tagged))
    deltas: list = []
    for t in tagged:
        mult = t[3].rank
        if deltas and deltas[-1][0] == t[0]:
            deltas[-1] = (t[0], deltas[-1][1] + mult)
        else:
            deltas.append((t[0], mult))
    j2 = j2_residual(flag, sigma, grid, tol)
    recon = _reconstruction_error(flag, sigma, E.field, grid, tol)
    limit = tol.residual_tol if recon_tol is None else recon_tol
    if j2 > tol.residual_tol or recon > limit:
        raise LiftResidualExceeded(f"lift residuals: j2 {j2:.3e}, reconstruction {recon:.3e}")
    return LiftResult(flag, sigma, tuple(deltas), j2, recon, tuple("E" if t[1] == 0 else "perp" for t in tagged))


def _reconstruction_error(flag: FlagField, sigma: SigmaSubset, E, grid: SphereGrid,
                          tol: ToleranceConfig) -> float:
    grid = prepare_grid(grid, *flag.pieces, E)
    worst = 0.0
    S = flag.sigma_field(sigma.indices)
    for ch in ("0", "inf"):
        c = grid.coords[ch]
        diff = S.derivs(ch, c, tol)[0] - E.derivs(ch, c, tol)[0]
        worst = max(worst, float(np.max(np.linalg.norm(diff, axis=(1, 2)))))
    return worst


def span_distance(a, b, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Max over nodes of the projector distance between two fields."""
    grid = prepare_grid(grid, a, b)
    worst = 0.0
    for ch in ("0", "inf"):
        c = grid.coords[ch]
        d = a.derivs(ch, c, tol)[0] - b.derivs(ch, c, tol)[0]
        worst = max(worst, float(np.max(np.linalg.norm(d, axis=(1, 2)))))
    return worst


def flag_distance(a: FlagField, b: FlagField, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Largest piecewise projector distance; infinite if the types differ."""
    if a.type_vector != b.type_vector:
        return float("inf")
    return max(span_distance(p, q, grid, tol) for p, q in zip(a.pieces, b.pieces))


# ---------------------------------------------------------------------------
# length reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Move:
    name: str
    host: str  # "E" or "E^perp"
    removed: SubbundleField
    removed_kind: str  # holomorphic / antiholomorphic / neither
    result: PresentedBundle
    residual: float
    length: int


def _kind(S: SubbundleField, grid: SphereGrid, tol: ToleranceConfig) -> str:
    if holomorphicity_residual(S, grid, "dblprime", tol) <= tol.residual_tol:
        return "holomorphic"
    if holomorphicity_residual(S, grid, "prime", tol) <= tol.residual_tol:
        return "antiholomorphic"
    return "neither"


def _stack(a: BiPoly | None, b: BiPoly | None) -> BiPoly | None:
    parts = [x for x in (a, b) if x is not None and x.shape[1] > 0]
    if not parts:
        return None
    return hstack(parts) if len(parts) > 1 else parts[0]


def candidate_moves(E: PresentedBundle, tol: ToleranceConfig = DEFAULT_TOL) -> list[tuple]:
    """The four removal moves as ``(name, host, removed field, result bundle)``.

    With ``N = F minus F1`` the non-complemented member of ``{E, E^perp}``
    and ``B_1 ... B_s`` its filtration (lifted to holomorphic vectors):

    * remove ``B_1`` from ``N``: ``F minus (F1 + B_1)``;
    * keep only ``B_(s-1)`` in ``N``: ``(F1 + B_(s-1)) minus F1``;
    * remove ``F1`` from the other member: ``F^perp``;
    * remove ``F^perp`` from the other member: ``F1``.
    """
    d = E.d
    F, F1 = E.outer, E.F1
    n_host, o_host = ("E^perp", "E") if E.complement else ("E", "E^perp")
    out = []
    N = PresentedBundle(F, F1, False, d)
    if N.rank > 0:
        filt = km_hn_filtration(km_frame_difference(F, F1), N.rank, tol)
        betas = filt.data.filtration_exponents
        low = filt.lift_upto(betas[0])
        if low is not None:
            inner = _stack(F1, low)
            res = PresentedBundle.present(F, inner, ambient=d)
            out.append(("remove-first-filtration-piece", n_host,
                        SubbundleField(inner, F1), res))
        if len(betas) >= 2:
            mid = filt.lift_upto(betas[-2])
            if mid is not None:
                outer = _stack(F1, mid)
                res = PresentedBundle.present(outer, F1, ambient=d)
                out.append(("remove-last-filtration-piece", n_host,
                            SubbundleField(F, outer), res))
    if F1 is not None and F.shape[1] < d:
        out.append(("remove-holomorphic-part", o_host, SubbundleField(F1),
                    PresentedBundle.present(None, F, ambient=d)))
    if F.shape[1] < d and F1 is not None:
        out.append(("remove-antiholomorphic-part", o_host, SubbundleField(F, complement=True),
                    PresentedBundle.present(F1, None, ambient=d)))
    return out


def reduce_length(E: PresentedBundle, grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> tuple:
    """One verified length-reducing move: ``(new bundle, Move)``."""
    L = E.length(tol)
    if L == 0:
        raise LengthZero("bundle already has length zero")
    report = []
    for name, host, removed, res in candidate_moves(E, tol):
        if res.rank == 0 or res.rank == res.d:
            report.append((name, host, None, None, "trivial result"))
            continue
        r = harmonicity_residual(res.field, grid, tol)
        length = res.length(tol)
        report.append((name, host, r, length, ""))
        if r <= tol.residual_tol and length < L:
            if length == 0:
                res = length_zero_normal_form(res, grid, tol)
            return res, Move(name, host, removed, _kind(removed, grid, tol), res, r, length)
    raise NoReducingMove(f"no move reduces length {L}", report)


def reduction_chain(E: PresentedBundle, grid: SphereGrid, max_steps: int = 4,
                    tol: ToleranceConfig = DEFAULT_TOL) -> list:
    """Apply :func:`reduce_length` until the length is zero; returns the moves."""
    moves = []
    cur = E
    while cur.length(tol) > 0:
        if len(moves) >= max_steps:
            raise NoReducingMove(f"length still positive after {max_steps} steps", [])
        cur, mv = reduce_length(cur, grid, tol)
        moves.append(mv)
    return moves


def _derivative_error(F: BiPoly, F1: BiPoly, z: np.ndarray, tol: ToleranceConfig) -> tuple[float, float]:
    """Relative distance of ``F1`` and of ``d/dz F1`` from the span of ``F`` at the points ``z``."""
    PF = SubbundleField(column_reduce(F, tol)).derivs("0", z, tol)[0]
    Q = np.eye(F.shape[0]) - PF
    v = F1.eval(z)
    nest = np.linalg.norm(Q @ v, axis=1) / np.maximum(np.linalg.norm(v, axis=1), 1e-300)
    dv = F1.diff("z").eval(z)
    scale = np.maximum(np.linalg.norm(v, axis=1) + np.linalg.norm(dv, axis=1), 1e-300)
    deriv = np.linalg.norm(Q @ dv, axis=1) / scale
    return float(np.max(nest)), float(np.max(deriv))


def length_zero_normal_form(E: PresentedBundle, grid: SphereGrid,
                            tol: ToleranceConfig = DEFAULT_TOL) -> PresentedBundle:
    """Re-present a length-zero difference so that ``d/dz F1`` lies in ``F``.

    A holomorphic difference ``F minus F1`` is re-presented by its own
    polynomial frame: sections ``F c`` orthogonal to ``F1`` for every ``z``
    solve ``F1^H F c = 0`` coefficientwise in ``zbar``.  Presentations that
    already satisfy the condition, and those this does not cover, are returned
    unchanged.
    """
    if E.complement or E.F1 is None:
        return E
    z = _probe_points(grid)
    if max(_derivative_error(E.outer, E.F1, z, tol)) <= tol.residual_tol:
        return E
    if holomorphicity_residual(E.field, grid, "dblprime", tol) > tol.residual_tol:
        return E
    M = E.F1.H @ E.outer
    stacked = BiPoly(np.concatenate([M.coef[:, :, :, b:b + 1] for b in range(M.coef.shape[3])], axis=0))
    K = minimal_kernel_basis(stacked, tol)
    if K.shape[1] != E.rank:
        return E
    return PresentedBundle.present(E.outer @ K, None, ambient=E.d, label=E.label)


def check_length_zero_form(F: HolomorphicSubbundle, F1: HolomorphicSubbundle | None,
                           grid: SphereGrid, tol: ToleranceConfig = DEFAULT_TOL) -> PresentedBundle:
    """Validate ``E = F minus F1`` as a harmonic bundle of length zero."""
    z = _probe_points(grid)
    if F1 is not None:
        nest, deriv = _derivative_error(F.frame, F1.frame, z, tol)
        if nest > tol.residual_tol:
            raise NotNested(f"F1 leaves F (relative error {nest:.2e})")
        if deriv > tol.residual_tol:
            raise DerivativeConditionFailed(f"d/dz of F1 leaves F (relative error {deriv:.2e})")
    E = PresentedBundle.present(F.frame, None if F1 is None else F1.frame, ambient=F.ambient_dim)
    if E.rank == 0:
        raise NotNested("F1 fills F; the difference is zero")
    h = harmonicity_residual(E.field, grid, tol)
    if h > tol.residual_tol:
        raise NotHarmonic(f"harmonicity residual {h:.3e}")
    L = E.length(tol)
    if L != 0:
        raise NotLengthZero(f"difference has length {L}")
    return E
