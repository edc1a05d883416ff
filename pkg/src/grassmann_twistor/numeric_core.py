"""Dense complex linear algebra and polynomials in (z, zbar).

Everything downstream works with matrices whose entries are polynomials in a
chart coordinate ``z`` and its conjugate.  :class:`BiPoly` stores them as a
coefficient tensor indexed ``(row, col, deg_z, deg_zbar)``; evaluation,
formal differentiation and products are exact on that tensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np


class TwistorError(Exception):
    """Base class for every error raised by the package."""


class RankDeficient(TwistorError):
    pass


class NonFinite(TwistorError):
    pass


class ShapeMismatch(TwistorError):
    pass


@dataclass(frozen=True)
class ToleranceConfig:
    rank_tol: float = 1e-10
    residual_tol: float = 1e-8
    prune_tol: float = 1e-12
    fd_step: float = 1e-4

    def __post_init__(self):
        for name in ("rank_tol", "residual_tol", "prune_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rank_tol >= 1:
            raise ValueError("rank_tol must be < 1")

    def replace(self, **kw) -> "ToleranceConfig":
        d = dict(rank_tol=self.rank_tol, residual_tol=self.residual_tol,
                 prune_tol=self.prune_tol, fd_step=self.fd_step)
        d.update(kw)
        return ToleranceConfig(**d)


DEFAULT_TOL = ToleranceConfig()


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim == 1:
        m = m[:, None]
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix has non-finite entries")
    return m


def numerical_rank(m: np.ndarray, rank_tol: float) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def orthonormal_basis(frame, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the column span; raises if the frame is rank deficient."""
    f = as_matrix(frame)
    if f.shape[1] == 0:
        return f
    u, s, _ = np.linalg.svd(f, full_matrices=False)
    if s[0] == 0 or np.sum(s > tol.rank_tol * s[0]) < f.shape[1]:
        raise RankDeficient(f"frame of {f.shape[1]} columns has numerical rank "
                            f"{int(np.sum(s > tol.rank_tol * s[0])) if s[0] else 0}")
    return u


def orthonormal_projector(frame, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Hermitian projector onto the column span of ``frame``.

    Built from an SVD orthonormalisation, so it stays accurate when the Gram
    matrix of the frame is badly conditioned.
    """
    q = orthonormal_basis(frame, tol)
    return q @ q.conj().T


def nullspace(m, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``m``."""
    return kernel_basis(as_matrix(m), tol.rank_tol, floor=0.0)


def kernel_basis(a: np.ndarray, rel_tol: float, floor: float = 0.0) -> np.ndarray:
    """Kernel of ``a``; singular values below ``rel_tol * max(s_max, floor)`` count as zero.

    Tall matrices use the economy SVD, which is all the kernel needs.
    """
    rows, n = a.shape
    if rows == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=rows < n)
    ref = max(s[0] if s.size else 0.0, floor)
    if ref == 0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > rel_tol * ref))
    return vh[rank:].conj().T


# ---------------------------------------------------------------------------
# polynomial matrices in (z, zbar)
# ---------------------------------------------------------------------------


class BiPoly:
    """Matrix of polynomials in ``z`` and ``zbar``.

    ``coef[i, j, a, b]`` is the coefficient of ``z**a * zbar**b`` in entry
    ``(i, j)``.  Instances are treated as immutable.
    """

    __slots__ = ("coef",)

    def __init__(self, coef, prune: float | None = 0.0):
        c = np.array(coef, dtype=complex)
        if c.ndim != 4:
            raise ShapeMismatch("BiPoly coefficients need 4 axes (row, col, degz, degzbar)")
        if c.shape[2] == 0 or c.shape[3] == 0:
            c = np.zeros(c.shape[:2] + (1, 1), dtype=complex)
        self.coef = _trim(c, prune)

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, m) -> "BiPoly":
        m = as_matrix(m)
        return cls(m[:, :, None, None])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BiPoly":
        return cls(np.zeros((rows, cols, 1, 1)))

    @classmethod
    def identity(cls, n: int) -> "BiPoly":
        return cls.constant(np.eye(n))

    @classmethod
    def z(cls) -> "BiPoly":
        return cls(np.array([[[[0], [1]]]]))

    @classmethod
    def zbar(cls) -> "BiPoly":
        return cls(np.array([[[[0, 1]]]]))

    @classmethod
    def from_holomorphic(cls, columns: Sequence[Sequence[Sequence[complex]]]) -> "BiPoly":
        """Build from ``columns[j][i] = [c0, c1, ...]`` (coefficients in z)."""
        cols = len(columns)
        rows = len(columns[0])
        deg = max(len(e) for col in columns for e in col)
        c = np.zeros((rows, cols, max(deg, 1), 1), dtype=complex)
        for j, col in enumerate(columns):
            if len(col) != rows:
                raise ShapeMismatch("ragged column list")
            for i, e in enumerate(col):
                c[i, j, : len(e), 0] = e
        return cls(c)

    @classmethod
    def from_function(cls, fn, rows: int, cols: int, degz: int, degzbar: int) -> "BiPoly":
        """Interpolate a polynomial map on a product of roots of unity.

        ``fn(z, w)`` must be polynomial of the stated degrees in two
        independent complex variables; ``w`` stands in for ``zbar``.
        """
        nz, nw = degz + 1, degzbar + 1
        zs = np.exp(2j * np.pi * np.arange(nz) / nz)
        ws = np.exp(2j * np.pi * np.arange(nw) / nw)
        vals = np.empty((rows, cols, nz, nw), dtype=complex)
        for a, zv in enumerate(zs):
            for b, wv in enumerate(ws):
                vals[:, :, a, b] = fn(zv, wv)
        coef = np.fft.fft(np.fft.fft(vals, axis=2), axis=3) / (nz * nw)
        return cls(coef, prune=1e-14)

    # shape ------------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.coef.shape[0], self.coef.shape[1]

    @property
    def degz(self) -> int:
        return self.coef.shape[2] - 1

    @property
    def degzbar(self) -> int:
        return self.coef.shape[3] - 1

    def total_degree(self) -> int:
        """Largest ``a + b`` carrying a nonzero coefficient (-1 for zero)."""
        mask = np.any(self.coef != 0, axis=(0, 1))
        if not mask.any():
            return -1
        a, b = np.nonzero(mask)
        return int(np.max(a + b))

    def column_total_degrees(self) -> list[int]:
        return [self[:, j].total_degree() for j in range(self.shape[1])]

    def is_holomorphic(self) -> bool:
        return self.degzbar == 0

    def is_zero(self) -> bool:
        return not np.any(self.coef)

    def __getitem__(self, key) -> "BiPoly":
        if not isinstance(key, tuple):
            key = (key, slice(None))
        r, c = key
        r = [r] if isinstance(r, (int, np.integer)) else r
        c = [c] if isinstance(c, (int, np.integer)) else c
        return BiPoly(self.coef[r][:, c])

    def hstack(self, *others: "BiPoly") -> "BiPoly":
        return hstack([self, *others])

    # algebra ------------------------------------------------------------------
    def _binary(self, other, op) -> "BiPoly":
        if not isinstance(other, BiPoly):
            other = BiPoly.constant(np.broadcast_to(np.asarray(other, dtype=complex), self.shape))
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} vs {other.shape}")
        nz = max(self.coef.shape[2], other.coef.shape[2])
        nb = max(self.coef.shape[3], other.coef.shape[3])
        return BiPoly(op(_pad(self.coef, nz, nb), _pad(other.coef, nz, nb)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return BiPoly(-self.coef)

    def __mul__(self, s):
        if isinstance(s, BiPoly):
            if s.shape != (1, 1):
                raise ShapeMismatch("elementwise product only with a scalar BiPoly")
            return self.scale(s)
        return BiPoly(self.coef * complex(s))

    __rmul__ = __mul__

    def scale(self, s: "BiPoly") -> "BiPoly":
        """Multiply every entry by the scalar polynomial ``s``."""
        sc = s.coef[0, 0]
        out = np.zeros(self.shape + (self.coef.shape[2] + sc.shape[0] - 1,
                                     self.coef.shape[3] + sc.shape[1] - 1), dtype=complex)
        for a, b in zip(*np.nonzero(sc)):
            out[:, :, a: a + self.coef.shape[2], b: b + self.coef.shape[3]] += sc[a, b] * self.coef
        return BiPoly(out)

    def __matmul__(self, other: "BiPoly") -> "BiPoly":
        if not isinstance(other, BiPoly):
            other = BiPoly.constant(other)
        if self.shape[1] != other.shape[0]:
            raise ShapeMismatch(f"{self.shape} @ {other.shape}")
        A, B = self.coef, other.coef
        out = np.zeros((A.shape[0], B.shape[1], A.shape[2] + B.shape[2] - 1,
                        A.shape[3] + B.shape[3] - 1), dtype=complex)
        for a, b in zip(*np.nonzero(np.any(A != 0, axis=(0, 1)))):
            out[:, :, a: a + B.shape[2], b: b + B.shape[3]] += np.einsum(
                "mk,knij->mnij", A[:, :, a, b], B)
        return BiPoly(out)

    def __rmatmul__(self, other) -> "BiPoly":
        return BiPoly.constant(other) @ self

    def conj(self) -> "BiPoly":
        """Entrywise complex conjugate: swaps z and zbar, conjugates coefficients."""
        return BiPoly(np.conj(self.coef).transpose(0, 1, 3, 2))

    @property
    def T(self) -> "BiPoly":
        return BiPoly(self.coef.transpose(1, 0, 2, 3))

    @property
    def H(self) -> "BiPoly":
        return self.conj().T

    def diff(self, which: str) -> "BiPoly":
        """Formal partial derivative in ``'z'`` or ``'zbar'``."""
        c = self.coef
        if which == "z":
            if c.shape[2] == 1:
                return BiPoly.zeros(*self.shape)
            k = np.arange(1, c.shape[2])[None, None, :, None]
            return BiPoly(c[:, :, 1:, :] * k)
        if which in ("zbar", "zb"):
            if c.shape[3] == 1:
                return BiPoly.zeros(*self.shape)
            k = np.arange(1, c.shape[3])[None, None, None, :]
            return BiPoly(c[:, :, :, 1:] * k)
        raise ValueError(f"unknown variable {which!r}")

    def prune(self, tol: float) -> "BiPoly":
        """Drop coefficients below ``tol`` times the largest one."""
        c = self.coef.copy()
        m = np.max(np.abs(c)) if c.size else 0.0
        if m > 0:
            c[np.abs(c) <= tol * m] = 0
        return BiPoly(c)

    # evaluation -----------------------------------------------------------------
    def __call__(self, z) -> np.ndarray:
        return self.eval(z)

    def eval(self, z) -> np.ndarray:
        """Substitute ``z`` and ``conj(z)``.  Scalar z gives (rows, cols); arrays add a leading axis."""
        zz = np.asarray(z, dtype=complex)
        scalar = zz.ndim == 0
        zz = np.atleast_1d(zz).ravel()
        pz = zz[:, None] ** np.arange(self.coef.shape[2])[None, :]
        pb = np.conj(zz)[:, None] ** np.arange(self.coef.shape[3])[None, :]
        vals = np.einsum("rcab,na,nb->nrc", self.coef, pz, pb, optimize=True)
        return vals[0] if scalar else vals

    # misc -----------------------------------------------------------------------
    def substitute_inverse(self) -> "BiPoly":
        """Chart change z = 1/w, column by column cleared of the minimal monomial.

        Column spans are preserved; each column is multiplied by
        ``w**a * wbar**b`` with (a, b) its own z and zbar degrees.
        """
        cols = []
        for j in range(self.shape[1]):
            c = self.coef[:, j: j + 1]
            mask = np.any(c != 0, axis=(0, 1))
            if not mask.any():
                cols.append(c[:, :, :1, :1])
                continue
            a = int(np.max(np.nonzero(mask)[0]))
            b = int(np.max(np.nonzero(mask)[1]))
            cols.append(c[:, :, : a + 1, : b + 1][:, :, ::-1, ::-1])
        nz = max(c.shape[2] for c in cols)
        nb = max(c.shape[3] for c in cols)
        return BiPoly(np.concatenate([_pad(c, nz, nb) for c in cols], axis=1))

    def to_json(self) -> list:
        """Nested lists ``[row][col][degz][degzbar] = [re, im]``."""
        return np.stack([self.coef.real, self.coef.imag], axis=-1).tolist()

    @classmethod
    def from_json(cls, data) -> "BiPoly":
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 5 or arr.shape[-1] != 2:
            raise ShapeMismatch("expected nested [row][col][degz][degzbar][re, im] arrays")
        return cls(arr[..., 0] + 1j * arr[..., 1])

    def allclose(self, other: "BiPoly", atol: float = 1e-12) -> bool:
        if self.shape != other.shape:
            return False
        nz = max(self.coef.shape[2], other.coef.shape[2])
        nb = max(self.coef.shape[3], other.coef.shape[3])
        return bool(np.allclose(_pad(self.coef, nz, nb), _pad(other.coef, nz, nb), atol=atol))

    def __repr__(self) -> str:
        return f"BiPoly(shape={self.shape}, degz={self.degz}, degzbar={self.degzbar})"


def _pad(c: np.ndarray, nz: int, nb: int) -> np.ndarray:
    if c.shape[2] == nz and c.shape[3] == nb:
        return c
    out = np.zeros(c.shape[:2] + (nz, nb), dtype=complex)
    out[:, :, : c.shape[2], : c.shape[3]] = c
    return out


def _trim(c: np.ndarray, prune: float | None) -> np.ndarray:
    if prune:
        m = np.max(np.abs(c)) if c.size else 0.0
        if m > 0:
            c = c.copy()
            c[np.abs(c) <= prune * m] = 0
    mask = np.any(c != 0, axis=(0, 1))
    if not mask.any():
        return np.zeros(c.shape[:2] + (1, 1), dtype=complex)
    a, b = np.nonzero(mask)
    return np.ascontiguousarray(c[:, :, : a.max() + 1, : b.max() + 1])


def hstack(blocks: Iterable[BiPoly]) -> BiPoly:
    blocks = list(blocks)
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ShapeMismatch("row counts differ")
    nz = max(b.coef.shape[2] for b in blocks)
    nb = max(b.coef.shape[3] for b in blocks)
    return BiPoly(np.concatenate([_pad(b.coef, nz, nb) for b in blocks], axis=1))


def eval_bipoly(m: BiPoly, z) -> np.ndarray:
    return m.eval(z)


def diff_bipoly(m: BiPoly, which: str) -> BiPoly:
    return m.diff(which)


def bipoly_det(m: BiPoly) -> BiPoly:
    """Determinant of a square polynomial matrix (Leibniz expansion, small sizes only)."""
    n = m.shape[0]
    if m.shape != (n, n):
        raise ShapeMismatch("determinant of a non-square matrix")
    if n == 0:
        return BiPoly.constant([[1.0]])
    if n > 6:
        raise ValueError("bipoly_det is meant for matrices up to 6x6")
    entries = [[m[i, j] for j in range(n)] for i in range(n)]
    total = BiPoly.zeros(1, 1)
    for perm in permutations(range(n)):
        sign = _perm_sign(perm)
        term = entries[0][perm[0]]
        for i in range(1, n):
            term = term @ entries[i][perm[i]]
        total = total + term * sign
    return total


def bipoly_adjugate(m: BiPoly) -> BiPoly:
    """Adjugate matrix, so that ``m @ adj = det * I``."""
    n = m.shape[0]
    if n == 1:
        return BiPoly.identity(1)
    coef = None
    blocks = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            rows = [r for r in range(n) if r != j]
            cols = [c for c in range(n) if c != i]
            minor = bipoly_det(m[rows, cols])
            blocks[i][j] = minor * ((-1) ** (i + j))
    nz = max(b.coef.shape[2] for row in blocks for b in row)
    nb = max(b.coef.shape[3] for row in blocks for b in row)
    coef = np.zeros((n, n, nz, nb), dtype=complex)
    for i in range(n):
        for j in range(n):
            c = blocks[i][j].coef
            coef[i, j, : c.shape[2], : c.shape[3]] = c[0, 0]
    return BiPoly(coef)


def _perm_sign(perm) -> int:
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def project_off(columns: BiPoly, frame: BiPoly | None) -> tuple[BiPoly, BiPoly]:
    """Polynomial form of ``(I - P_frame) @ columns``.

    Returns ``(numerator, denominator)`` with
    ``numerator = det(G) columns - frame adj(G) frame^H columns`` and
    ``denominator = det(G)``, ``G = frame^H frame``.  The denominator is a
    real polynomial, positive wherever the frame has full rank.
    """
    if frame is None or frame.shape[1] == 0:
        return columns, BiPoly.constant([[1.0]])
    gram = frame.H @ frame
    det = bipoly_det(gram)
    adj = bipoly_adjugate(gram)
    num = columns.scale(det) - frame @ (adj @ (frame.H @ columns))
    return num, det


def holomorphic_column_degrees(m: BiPoly) -> list[int]:
    return [m[:, j].degz if not m[:, j].is_zero() else -1 for j in range(m.shape[1])]


def column_reduce(m: BiPoly, tol: ToleranceConfig = DEFAULT_TOL) -> BiPoly:
    """Column-reduced basis of the same polynomial module (holomorphic input).

    Repeatedly cancels the leading coefficient of the highest-degree column
    involved in a dependency of the leading-coefficient matrix.  The result
    spans the same subbundle over all of P^1 and its chart-infinity frame has
    independent columns at w = 0.
    """
    if not m.is_holomorphic():
        raise ValueError("column_reduce expects a frame polynomial in z only")
    cols = [m[:, j] for j in range(m.shape[1])]
    for _ in range(10 * sum(c.degz + 1 for c in cols) + 10):
        degs = [c.degz for c in cols]
        lead = np.stack([c.coef[:, 0, c.degz, 0] for c in cols], axis=1)
        null = nullspace(lead, tol)
        if null.shape[1] == 0:
            break
        a = null[:, 0]
        active = [j for j in range(len(cols)) if abs(a[j]) > tol.rank_tol * np.max(np.abs(a))]
        top = max(active, key=lambda j: degs[j])
        new = BiPoly.zeros(m.shape[0], 1)
        for j in active:
            shift = degs[top] - degs[j]
            c = np.zeros((m.shape[0], 1, shift + cols[j].coef.shape[2], 1), dtype=complex)
            c[:, :, shift:, :] = cols[j].coef
            new = new + BiPoly(c) * a[j]
        new = new * (1.0 / a[top])
        # drop the cancelled leading coefficient explicitly
        c = new.coef.copy()
        if c.shape[2] > degs[top]:
            c[:, :, degs[top]:, :] = 0
        cols[top] = BiPoly(c).prune(tol.prune_tol)
    else:
        raise RankDeficient("column reduction did not terminate; frame is rank deficient")
    return hstack(cols)
