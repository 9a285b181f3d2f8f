"""Single-mode test states in a truncated Fock basis.

Everything is expressed for the quadrature ``x_phi = (a e^{-i phi} + a^dag e^{i phi}) / 2``,
whose vacuum variance is 1/4.  All moments are computed from the truncated
Fock amplitudes by ladder-operator algebra, so the four state families share a
single code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exceptions import TruncationError

__all__ = [
    "StateSpec",
    "FockVector",
    "fock_amplitudes",
    "normally_ordered_moment",
    "quadrature_moment",
    "phase_averaged_moment",
    "phase_integral",
    "quadrature_pdf",
    "density_matrix_element",
    "intrinsic_noise",
]

NORM_TOLERANCE = 1e-14
MAX_DIMENSION = 4096
KINDS = ("coherent", "squeezed", "fock", "cat")


@dataclass(frozen=True)
class StateSpec:
    """Declarative description of a pure single-mode state.

    Use the classmethod constructors rather than the raw initializer.  When
    ``nmax`` is omitted it is chosen from the mean photon number and grown
    until the truncated norm deficit is at most 1e-14.  An explicit ``nmax``
    that is too small raises :class:`TruncationError`.
    """

    kind: str
    alpha: complex = 0j
    r: float = 0.0
    theta: float = 0.0
    n: int = 0
    nmax: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.kind == "squeezed":
            if self.r < 0:
                raise ValueError("squeeze magnitude r must be non-negative")
            object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))
        if self.kind == "fock":
            if int(self.n) != self.n or self.n < 0:
                raise ValueError("Fock photon number must be a non-negative integer")
            object.__setattr__(self, "n", int(self.n))
        if self.nmax is None:
            nmax = self._default_nmax()
            while _norm_deficit(self, nmax) > NORM_TOLERANCE:
                nmax = math.ceil(1.25 * nmax)
                if nmax > MAX_DIMENSION:
                    raise TruncationError(f"no truncation below {MAX_DIMENSION} reaches the norm tolerance for {self}")
            object.__setattr__(self, "nmax", nmax)
        else:
            if int(self.nmax) != self.nmax or self.nmax < 0:
                raise ValueError("nmax must be a non-negative integer")
            object.__setattr__(self, "nmax", int(self.nmax))
            if self.kind == "fock" and self.n > self.nmax:
                raise TruncationError(f"Fock state n={self.n} does not fit in nmax={self.nmax}")
            deficit = _norm_deficit(self, self.nmax)
            if deficit > NORM_TOLERANCE:
                raise TruncationError(f"nmax={self.nmax} leaves norm deficit {deficit:.3e} for {self}")

    # constructors -----------------------------------------------------
    @classmethod
    def coherent(cls, alpha, nmax=None):
        return cls("coherent", alpha=alpha, nmax=nmax)

    @classmethod
    def squeezed_vacuum(cls, r, theta=0.0, nmax=None):
        return cls("squeezed", r=float(r), theta=theta, nmax=nmax)

    @classmethod
    def squeezed_from_photons(cls, mean_photons, theta=0.0, nmax=None):
        """Squeezed vacuum with ``<a^dag a> = mean_photons``."""
        if mean_photons < 0:
            raise ValueError("mean photon number must be non-negative")
        return cls.squeezed_vacuum(math.asinh(math.sqrt(mean_photons)), theta, nmax)

    @classmethod
    def fock(cls, n, nmax=None):
        return cls("fock", n=n, nmax=nmax)

    @classmethod
    def cat(cls, alpha, nmax=None):
        """Even superposition of ``|alpha>`` and ``|-alpha>``, normalized to one."""
        return cls("cat", alpha=alpha, nmax=nmax)

    @classmethod
    def vacuum(cls, nmax=None):
        return cls.fock(0, nmax=nmax)

    # ------------------------------------------------------------------
    @property
    def mean_photons(self):
        if self.kind == "coherent":
            return abs(self.alpha) ** 2
        if self.kind == "squeezed":
            return math.sinh(self.r) ** 2
        if self.kind == "fock":
            return float(self.n)
        a2 = abs(self.alpha) ** 2
        return a2 * math.tanh(a2)

    @property
    def dim(self):
        return self.nmax + 1

    def _default_nmax(self):
        energy = self.mean_photons
        nmax = max(32, math.ceil(energy + 8 * math.sqrt(energy + 1)))
        if self.kind == "fock":
            nmax = max(nmax, self.n)
        return nmax

    def to_dict(self):
        d = {"kind": self.kind, "nmax": self.nmax}
        if self.kind in ("coherent", "cat"):
            d["alpha"] = [self.alpha.real, self.alpha.imag]
        elif self.kind == "squeezed":
            d["r"] = self.r
            d["theta"] = self.theta
        else:
            d["n"] = self.n
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        nmax = d.get("nmax")
        if kind in ("coherent", "cat"):
            alpha = d["alpha"]
            alpha = complex(alpha[0], alpha[1]) if isinstance(alpha, (list, tuple)) else complex(alpha)
            return cls(kind, alpha=alpha, nmax=nmax)
        if kind == "squeezed":
            if "mean_photons" in d:
                return cls.squeezed_from_photons(d["mean_photons"], d.get("theta", 0.0), nmax)
            return cls.squeezed_vacuum(d["r"], d.get("theta", 0.0), nmax)
        if kind == "fock":
            return cls.fock(d["n"], nmax)
        raise ValueError(f"unknown state kind {kind!r}")


@dataclass(frozen=True)
class FockVector:
    """Normalized truncated Fock amplitudes ``c_0 ... c_nmax``."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __len__(self):
        return len(self.amplitudes)


def _raw_amplitudes(spec, dim):
    """Unnormalized-by-truncation amplitudes of length ``dim``."""
    c = np.zeros(dim, dtype=complex)
    if spec.kind == "fock":
        if spec.n < dim:
            c[spec.n] = 1.0
        return c
    if spec.kind == "squeezed":
        ratio = -np.exp(1j * spec.theta) * math.tanh(spec.r)
        c[0] = 1.0 / math.sqrt(math.cosh(spec.r))
        for m in range(1, (dim - 1) // 2 + 1):
            c[2 * m] = c[2 * m - 2] * ratio * math.sqrt((2 * m - 1) / (2 * m))
        return c
    alpha = spec.alpha
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, dim):
        c[k] = c[k - 1] * alpha / math.sqrt(k)
    if spec.kind == "cat":
        norm = 1.0 / math.sqrt(2.0 * (1.0 + math.exp(-2 * abs(alpha) ** 2)))
        c = 2.0 * norm * c
        c[1::2] = 0.0
    return c


def _norm_deficit(spec, nmax):
    c = _raw_amplitudes(spec, nmax + 1)
    return 1.0 - float(np.vdot(c, c).real)


@lru_cache(maxsize=256)
def _amplitudes_cached(spec, dim):
    c = _raw_amplitudes(spec, dim)
    c = c / math.sqrt(float(np.vdot(c[: spec.dim], c[: spec.dim]).real))
    c.setflags(write=False)
    return c


def fock_amplitudes(spec: StateSpec) -> FockVector:
    """Normalized amplitudes ``c_n`` for ``n = 0 ... nmax``."""
    return FockVector(_amplitudes_cached(spec, spec.dim))


@lru_cache(maxsize=64)
def _moment_table(spec, order):
    # a^k c needs amplitudes up to nmax + k, which are available in closed
    # form, so extend the vector instead of letting the truncation bite.
    if spec.dim + order > MAX_DIMENSION:
        raise TruncationError(f"moment order {order} exceeds the supported dimension for {spec}")
    c = _amplitudes_cached(spec, spec.dim + order)
    dim = len(c)
    vecs = np.zeros((order + 1, dim), dtype=complex)
    vecs[0] = c
    idx = np.arange(dim)
    for k in range(1, order + 1):
        # (a v)_j = sqrt(j+1) v_{j+1}
        vecs[k, :-1] = np.sqrt(idx[1:]) * vecs[k - 1, 1:]
    table = vecs.conj() @ vecs.T
    table.setflags(write=False)
    return table


def _table_order(order):
    # round up so nearby requests share one cached table
    return max(8, 1 << max(0, int(order - 1)).bit_length())


def normally_ordered_moment(spec: StateSpec, s: int, k: int) -> complex:
    """``<a^dag^s a^k>`` on the state."""
    if s < 0 or k < 0:
        raise ValueError("moment orders must be non-negative")
    return complex(_moment_table(spec, _table_order(max(s, k)))[s, k])


def moment_matrix(spec: StateSpec, order: int) -> np.ndarray:
    """Table ``T[s, k] = <a^dag^s a^k>`` for ``s, k <= order`` (read-only)."""
    return _moment_table(spec, _table_order(order))[: order + 1, : order + 1]


def phase_integral(q: int) -> complex:
    """Exact value of ``(1/pi) * integral_0^pi exp(i q phi) dphi``."""
    if q == 0:
        return 1.0 + 0j
    if q % 2 == 0:
        return 0j
    return 2j / (math.pi * q)


@lru_cache(maxsize=None)
def _wilcox_terms(j):
    """Arrays ``(p, s, t, coefficient)`` with coefficient ``j!/(2^j 2^p p! s! t!)``, ``t = j-2p-s``."""
    ps, ss, ts, coefs = [], [], [], []
    for p in range(j // 2 + 1):
        for s in range(j - 2 * p + 1):
            t = j - 2 * p - s
            coef = Fraction(math.factorial(j), 2 ** (j + p) * math.factorial(p) * math.factorial(s) * math.factorial(t))
            ps.append(p)
            ss.append(s)
            ts.append(t)
            coefs.append(float(coef))
    return np.array(ps), np.array(ss), np.array(ts), np.array(coefs)


def quadrature_moment(spec: StateSpec, k: int, phi: float) -> float:
    """``<x_phi^k>`` from the normally ordered moments."""
    if k < 0:
        raise ValueError("k must be non-negative")
    table = moment_matrix(spec, k)
    p, s, t, coef = _wilcox_terms(k)
    total = np.sum(coef * table[s, t] * np.exp(1j * (2 * p + 2 * s - k) * phi))
    scale = max(1.0, abs(total))
    if abs(total.imag) > 1e-10 * scale:
        raise ArithmeticError(f"quadrature moment has imaginary part {total.imag:.3e}")
    return float(total.real)


def _phase_integrals(q):
    q = np.asarray(q)
    odd = (q % 2) != 0
    out = np.zeros(q.shape, dtype=complex)
    out[q == 0] = 1.0
    out[odd] = 2j / (math.pi * q[odd])
    return out


@lru_cache(maxsize=65536)
def phase_averaged_moment(spec: StateSpec, j: int, q: int) -> complex:
    """``(1/pi) integral_0^pi dphi exp(i q phi) <x_phi^j>``.

    This is the exact tomographic average of the monomial ``x^j e^{i q phi}``.
    """
    table = moment_matrix(spec, j)
    p, s, t, coef = _wilcox_terms(j)
    return complex(np.sum(coef * table[s, t] * _phase_integrals(q + 2 * p + 2 * s - j)))


def quadrature_pdf(spec: StateSpec, x, phi):
    """Homodyne outcome density ``p(x, phi) = |sum_n c_n e^{-i n phi} psi_n(x)|^2``.

    ``x`` and ``phi`` broadcast against each other.
    """
    from .kernels import oscillator_psi_table

    x, phi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(phi, dtype=float))
    c = fock_amplitudes(spec).amplitudes
    nz = np.flatnonzero(np.abs(c) > 0)
    top = int(nz[-1]) if len(nz) else 0
    psi = oscillator_psi_table(top, x.ravel())  # (top+1, N)
    phases = np.exp(-1j * np.outer(np.arange(top + 1), phi.ravel()))
    amp = np.sum(c[: top + 1, None] * phases * psi, axis=0)
    out = np.abs(amp) ** 2
    return out.reshape(x.shape) if x.shape else float(out[0])


def density_matrix_element(spec: StateSpec, n: int, m: int) -> complex:
    """``rho_nm = <n|rho|m> = c_n conj(c_m)``."""
    if not (0 <= n <= spec.nmax and 0 <= m <= spec.nmax):
        raise IndexError(f"matrix element ({n}, {m}) outside truncation nmax={spec.nmax}")
    c = fock_amplitudes(spec).amplitudes
    return complex(c[n] * np.conj(c[m]))


def intrinsic_noise(spec: StateSpec, observable: str) -> float:
    """Noise of an ideal measurement of ``observable``.

    ``intensity`` gives the photon-number variance, ``quadrature`` the variance
    of ``x_0``, and ``amplitude`` the trace-of-covariance noise
    ``(<a^dag a> + 1 - |<a>|^2) / 2`` of an ideal joint measurement of ``a``.
    """
    nbar = normally_ordered_moment(spec, 1, 1).real
    if observable == "intensity":
        return normally_ordered_moment(spec, 2, 2).real + nbar - nbar**2
    if observable == "quadrature":
        return quadrature_moment(spec, 2, 0.0) - quadrature_moment(spec, 1, 0.0) ** 2
    if observable == "amplitude":
        return 0.5 * (nbar + 1.0 - abs(normally_ordered_moment(spec, 0, 1)) ** 2)
    raise ValueError(f"unknown observable {observable!r}")
