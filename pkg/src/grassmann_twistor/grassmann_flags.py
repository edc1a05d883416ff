"""Pointwise Grassmannian and flag geometry in the projector model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numeric_core import (DEFAULT_TOL, ShapeMismatch, ToleranceConfig, TwistorError,
                           as_matrix, orthonormal_projector)


class NotOrthogonal(TwistorError):
    pass


class NotComplete(TwistorError):
    pass


class BadSigma(TwistorError):
    pass


@dataclass(frozen=True)
class GrassmannPoint:
    projector: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.projector.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.projector).real))


@dataclass(frozen=True)
class FlagPoint:
    """Flag stored as mutually orthogonal projectors ``pi_1 .. pi_n`` summing to I."""

    projectors: tuple

    @property
    def type_vector(self) -> tuple[int, ...]:
        return tuple(int(round(np.trace(p).real)) for p in self.projectors)

    @property
    def length(self) -> int:
        return len(self.projectors)

    def nested(self, k: int) -> np.ndarray:
        """Projector onto ``W_k = E_1 + ... + E_k``."""
        return sum(self.projectors[:k], np.zeros_like(self.projectors[0]))


@dataclass(frozen=True)
class SigmaSubset:
    """Ordered subset of ``{1, ..., n}`` (1-based, as in the flag indexing)."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise BadSigma("sigma must be nonempty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise BadSigma("sigma indices must be strictly increasing")
        if idx[0] < 1 or idx[-1] > self.n:
            raise BadSigma(f"sigma {idx} out of range 1..{self.n}")
        if len(idx) == self.n:
            raise BadSigma("sigma must be a proper subset")

    def __contains__(self, i: int) -> bool:
        return i in self.indices

    def complement(self) -> "SigmaSubset":
        return SigmaSubset(tuple(i for i in range(1, self.n + 1) if i not in self.indices), self.n)

    @staticmethod
    def all_for(n: int) -> list["SigmaSubset"]:
        out = []
        for mask in range(1, 2 ** n - 1):
            out.append(SigmaSubset(tuple(i + 1 for i in range(n) if mask >> i & 1), n))
        return out


@dataclass(frozen=True)
class TangentBlock:
    i: int
    j: int
    block: np.ndarray


def make_flag(frames: Sequence, tol: ToleranceConfig = DEFAULT_TOL) -> FlagPoint:
    """Flag from frames of the summands ``E_1 .. E_n``."""
    projs = [orthonormal_projector(f, tol) for f in frames]
    d = projs[0].shape[0]
    if any(p.shape != (d, d) for p in projs):
        raise ShapeMismatch("frames live in different ambient spaces")
    for a in range(len(projs)):
        for b in range(a + 1, len(projs)):
            if np.linalg.norm(projs[a] @ projs[b]) > tol.residual_tol:
                raise NotOrthogonal(f"summands {a + 1} and {b + 1} are not orthogonal")
    if np.linalg.norm(sum(projs) - np.eye(d)) > tol.residual_tol:
        raise NotComplete("summands do not span the ambient space")
    return FlagPoint(tuple(projs))


def project_sigma(flag: FlagPoint, sigma: SigmaSubset) -> GrassmannPoint:
    if sigma.n != flag.length:
        raise BadSigma(f"sigma is for flags of length {sigma.n}, flag has {flag.length}")
    return GrassmannPoint(sum(flag.projectors[i - 1] for i in sigma.indices))


def invariant_metric(a, b) -> float:
    """Real part of ``trace(a b^H)``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return float(np.real(np.vdot(b, a)))


def tangent_blocks(flag: FlagPoint, x, include_diagonal: bool = False) -> list[TangentBlock]:
    """Compressions ``pi_i x pi_j`` for ``i != j`` (1-based indices)."""
    x = as_matrix(x)
    out = []
    for i, pi in enumerate(flag.projectors, 1):
        for j, pj in enumerate(flag.projectors, 1):
            if i != j or include_diagonal:
                out.append(TangentBlock(i, j, pi @ x @ pj))
    return out
