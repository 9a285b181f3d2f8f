"""Null functions: kernels whose tomographic average vanishes for every state.

Every member used here is a monomial ``x^k exp(i (k + 2 + 2n) phi)`` with
``k, n >= 0``.  The three families differ only in how the index ``j`` maps
to ``(k, n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "MonomialIndex",
    "NullFamily",
    "eval_monomial_null",
    "family_member",
    "closure_product",
    "null_feature_matrix",
]

FAMILY_KINDS = ("I", "II", "III")


class MonomialIndex(NamedTuple):
    k: int
    n: int

    @property
    def phase(self):
        """Phase exponent ``k + 2 + 2n``."""
        return self.k + 2 + 2 * self.n


@dataclass(frozen=True)
class NullFamily:
    kind: str
    M: int

    def __post_init__(self):
        kind = str(self.kind).upper().replace("TYPE", "").strip("-_ ")
        if kind not in FAMILY_KINDS:
            raise ValueError(f"unknown null family {self.kind!r}; expected I, II or III")
        if self.M < 0:
            raise ValueError("member count M must be non-negative")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "M", int(self.M))

    def members(self):
        return [family_member(self, j) for j in range(self.M)]

    def truncated(self, M):
        return NullFamily(self.kind, M)


def eval_monomial_null(idx: MonomialIndex, x, phi):
    """``x^k exp(i (k + 2 + 2n) phi)``; the conjugate is the matching G^- member."""
    x = np.asarray(x, dtype=float)
    return x ** idx.k * np.exp(1j * idx.phase * np.asarray(phi, dtype=float))


def _triangular_decode(j):
    d = (math.isqrt(8 * j + 1) - 1) // 2
    t = j - d * (d + 1) // 2
    return MonomialIndex(d - t, t)


def family_member(fam: NullFamily, j: int) -> MonomialIndex:
    if not 0 <= j < fam.M:
        raise IndexError(f"member {j} out of range for family of size {fam.M}")
    if fam.kind == "I":
        return MonomialIndex(j, 0)
    if fam.kind == "II":
        return MonomialIndex(0, j)
    return _triangular_decode(j)


def closure_product(a: MonomialIndex, b: MonomialIndex) -> MonomialIndex:
    """Index of the product of two G^+ monomials."""
    return MonomialIndex(a.k + b.k, a.n + b.n + 1)


def null_feature_matrix(fam: NullFamily, x, phi):
    """Matrix ``F[i, j] = F_j(x_i, phi_i)`` of shape ``(N, M)``."""
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.empty((x.size, fam.M), dtype=complex)
    if fam.M == 0:
        return out
    members = fam.members()
    kmax = max(m.k for m in members)
    pmax = max(m.phase for m in members)
    powers = np.vander(x.ravel(), kmax + 1, increasing=True)
    rot = np.exp(1j * phi.ravel())
    phases = np.vander(rot, pmax + 1, increasing=True)
    for j, m in enumerate(members):
        out[:, j] = powers[:, m.k] * phases[:, m.phase]
    return out
