"""Estimator kernels ``R(x, phi)`` whose tomographic average is an expectation value.

Kernels for normally ordered moments are Hermite polynomials (Richter form).
Density-matrix kernels ("pattern functions") at unit efficiency are built from
the damped one-dimensional integral

    f_nm(x) = 1/2 int_0^inf dk k <n| cos(k (x - x_0)) |m>

where the Fock matrix elements of ``exp(i k x_0)`` are displacement-operator
elements with ``|beta|^2 = k^2 / 4``.
"""
from __future__ import annotations

import csv
import math
import re
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_genlaguerre, gammaln

from .exceptions import ConvergenceError
from .nullfns import NullFamily, null_feature_matrix

__all__ = [
    "Target",
    "KernelExpr",
    "hermite",
    "oscillator_psi",
    "oscillator_psi_table",
    "richter_kernel",
    "base_kernel",
    "pattern_kernel",
    "pattern_function",
    "eval_kernel",
    "kernel_polynomial",
    "dump_pattern_table",
]

MAX_ORDER = 512


def hermite(n: int, y):
    """Physicists' Hermite polynomial ``H_n(y)`` by three-term recurrence."""
    if n < 0 or n > MAX_ORDER:
        raise ValueError(f"Hermite order must be in [0, {MAX_ORDER}]")
    y = np.asarray(y, dtype=float)
    h_prev = np.ones_like(y)
    if n == 0:
        return h_prev if y.ndim else float(h_prev)
    h = 2.0 * y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            h_prev, h = h, 2.0 * y * h - 2.0 * k * h_prev
    if not np.all(np.isfinite(h)):
        raise OverflowError(f"H_{n} overflows at the requested arguments")
    return h if y.ndim else float(h)


def oscillator_psi_table(nmax: int, x):
    """Rows ``psi_0(x) ... psi_nmax(x)`` for vacuum variance 1/4.

    Uses the normalized recurrence with a running log-scale so that large
    ``|x|`` underflows gracefully instead of producing NaNs.
    """
    if nmax < 0 or nmax > MAX_ORDER:
        raise ValueError(f"oscillator order must be in [0, {MAX_ORDER}]")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = math.sqrt(2.0) * x
    out = np.empty((nmax + 1, x.size))
    log_scale = -x * x + 0.25 * math.log(2.0 / math.pi)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    out[0] = cur
    for n in range(nmax):
        nxt = math.sqrt(2.0 / (n + 1)) * y * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e150
        if np.any(big):
            s = np.where(big, 1e-150, 1.0)
            cur = cur * s
            prev = prev * s
            out[: n + 1] *= s  # earlier rows share the same running scale
            log_scale = log_scale - np.log(s)
        out[n + 1] = cur
    with np.errstate(under="ignore"):
        out *= np.exp(log_scale)
    return out


def oscillator_psi(n: int, x):
    """``psi_n(x) = (2/pi)^(1/4) H_n(sqrt(2) x) exp(-x^2) / sqrt(2^n n!)``."""
    x_arr = np.asarray(x, dtype=float)
    vals = oscillator_psi_table(n, x_arr.ravel())[n]
    if not np.all(np.isfinite(vals)):
        raise OverflowError(f"psi_{n} is not finite at the requested arguments")
    return vals.reshape(x_arr.shape) if x_arr.ndim else float(vals[0])


def _richter_log_norm(n, m):
    big_n = n + m
    return 0.5 * big_n * math.log(2.0) + math.lgamma(big_n + 1) - math.lgamma(n + 1) - math.lgamma(m + 1)


def richter_kernel(n: int, m: int, x, phi):
    """Kernel for ``<a^dag^n a^m>``: ``e^{i(m-n)phi} H_{n+m}(sqrt2 x) / (sqrt(2^{n+m}) C(n+m, n))``."""
    if n < 0 or m < 0 or n + m > 64:
        raise ValueError("Richter kernel requires n, m >= 0 and n + m <= 64")
    x = np.asarray(x, dtype=float)
    h = hermite(n + m, math.sqrt(2.0) * x)
    return h * math.exp(-_richter_log_norm(n, m)) * np.exp(1j * (m - n) * np.asarray(phi, dtype=float))


# ---------------------------------------------------------------------------
# targets


_TARGET_RE = re.compile(r"^\s*(moment|matrix_element|rho)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")


@dataclass(frozen=True)
class Target:
    """What a base kernel estimates.

    ``moment(n, m)`` is ``<a^dag^n a^m>``; ``matrix_element(n, m)`` is
    ``rho_nm = <n|rho|m>``.
    """

    kind: str
    n: int = 0
    m: int = 0

    def __post_init__(self):
        if self.kind not in ("intensity", "quadrature", "amplitude", "moment", "matrix_element"):
            raise ValueError(f"unknown target {self.kind!r}")
        if self.n < 0 or self.m < 0:
            raise ValueError("target indices must be non-negative")

    @classmethod
    def parse(cls, text):
        if isinstance(text, Target):
            return text
        text = str(text).strip()
        if text in ("intensity", "quadrature", "amplitude"):
            return cls(text)
        match = _TARGET_RE.match(text)
        if not match:
            raise ValueError(f"cannot parse target {text!r}")
        kind = "matrix_element" if match.group(1) == "rho" else match.group(1)
        return cls(kind, int(match.group(2)), int(match.group(3)))

    @property
    def is_real(self):
        if self.kind in ("intensity", "quadrature"):
            return True
        if self.kind == "amplitude":
            return False
        return self.n == self.m

    def __str__(self):
        if self.kind in ("moment", "matrix_element"):
            return f"{self.kind}({self.n},{self.m})"
        return self.kind


# ---------------------------------------------------------------------------
# pattern functions

_PANEL = 0.5
_NODES = 16


def _k_cutoff(n, m):
    return 2.0 * math.sqrt(2.0) * (math.sqrt(max(n, m) + 1.0) + 7.0)


@lru_cache(maxsize=8)
def _gauss_panels(kmax, panel):
    nodes, weights = np.polynomial.legendre.leggauss(_NODES)
    n_panels = int(math.ceil(kmax / panel))
    edges = np.linspace(0.0, n_panels * panel, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    k = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return k, w


def _pattern_direct(n, m, x, panel=_PANEL):
    lo, hi = min(n, m), max(n, m)
    d = hi - lo
    k, w = _gauss_panels(_k_cutoff(n, m), panel)
    log_pref = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - d * math.log(2.0)
    with np.errstate(divide="ignore"):
        log_env = -k * k / 8.0 + (d + 1) * np.log(k) + log_pref
    radial = 0.5 * w * np.exp(log_env) * eval_genlaguerre(lo, d, k * k / 4.0)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.size)
    for start in range(0, x.size, 2048):
        xs = x[start : start + 2048]
        out[start : start + 2048] = np.cos(np.outer(xs, k) - 0.5 * math.pi * d) @ radial
    return out


def pattern_function(n: int, m: int, x, check=False):
    """Radial part ``f_nm(x)`` of the matrix-element kernel, computed directly.

    With ``check=True`` the result is compared against a run on panels of
    half the width and :class:`ConvergenceError` is raised on disagreement.
    """
    if not (0 <= n <= 32 and 0 <= m <= 32):
        raise ValueError("pattern functions are supported for 0 <= n, m <= 32")
    x_arr = np.asarray(x, dtype=float)
    vals = _pattern_direct(n, m, x_arr.ravel())
    if check:
        fine = _pattern_direct(n, m, x_arr.ravel(), panel=_PANEL / 2)
        err = float(np.max(np.abs(fine - vals))) if vals.size else 0.0
        if err > 1e-10:
            raise ConvergenceError(
                f"pattern function f_{n}{m} did not converge: max panel-refinement difference {err:.3e} "
                f"over x in [{x_arr.min():.3f}, {x_arr.max():.3f}]"
            )
    return vals.reshape(x_arr.shape) if x_arr.ndim else float(vals[0])


class _PatternTable:
    """Cubic-spline cache of ``f_nm`` with direct evaluation outside its range."""

    STEP = 0.002

    def __init__(self, n, m):
        self.n, self.m = n, m
        self.x_max = (math.sqrt(max(n, m)) + 6.0) / math.sqrt(2.0)
        grid = np.arange(-self.x_max, self.x_max + self.STEP / 2, self.STEP)
        self.grid = grid
        self.values = pattern_function(n, m, grid)
        probe = np.linspace(-self.x_max, self.x_max, 17)
        pattern_function(n, m, probe, check=True)
        self.spline = CubicSpline(grid, self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        inside = np.abs(x) <= self.x_max
        out[inside] = self.spline(x[inside])
        if not np.all(inside):
            out[~inside] = _pattern_direct(self.n, self.m, x[~inside])
        return out


_tables: dict = {}
_tables_lock = threading.Lock()


def _pattern_table(n, m):
    key = (min(n, m), max(n, m))
    table = _tables.get(key)
    if table is None:
        with _tables_lock:
            table = _tables.get(key)
            if table is None:
                table = _PatternTable(*key)
                _tables[key] = table
    return table


def pattern_kernel(n: int, m: int, x, phi):
    """Kernel estimating ``rho_nm = <n|rho|m>``: ``f_nm(x) exp(i (n - m) phi)``."""
    if not (0 <= n <= 32 and 0 <= m <= 32):
        raise ValueError("pattern kernels are supported for 0 <= n, m <= 32")
    x = np.asarray(x, dtype=float)
    f = _pattern_table(n, m)(x)
    return f * np.exp(1j * (n - m) * np.asarray(phi, dtype=float))


def dump_pattern_table(n: int, m: int, path, x=None):
    """Write ``x,f_nm_real`` rows for plotting."""
    if x is None:
        x = _pattern_table(n, m).grid
    vals = pattern_function(n, m, x)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "f_nm_real"])
        for xi, fi in zip(np.asarray(x).ravel(), np.asarray(vals).ravel()):
            writer.writerow([f"{xi:.17g}", f"{fi:.17g}"])


# ---------------------------------------------------------------------------
# base kernels


def base_kernel(target, x, phi):
    target = Target.parse(target)
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if target.kind == "intensity":
        return np.broadcast_to(2.0 * x * x - 0.5, np.broadcast(x, phi).shape).astype(complex)
    if target.kind == "quadrature":
        return (2.0 * x * np.cos(phi)).astype(complex)
    if target.kind == "amplitude":
        return 2.0 * x * np.exp(1j * phi)
    if target.kind == "moment":
        return richter_kernel(target.n, target.m, x, phi)
    return pattern_kernel(target.n, target.m, x, phi)


@lru_cache(maxsize=None)
def _hermite_coefficients(n):
    coeffs = [[1], [0, 2]]
    for k in range(1, n):
        prev, cur = coeffs[-2], coeffs[-1]
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= 2 * k * c
        coeffs.append(nxt)
    return tuple(coeffs[n])


def kernel_polynomial(target):
    """Expansion ``{(j, q): coeff}`` of the base kernel as ``sum coeff x^j e^{i q phi}``.

    Returns ``None`` for matrix-element targets, which are not polynomial.
    """
    target = Target.parse(target)
    if target.kind == "intensity":
        return {(2, 0): 2.0, (0, 0): -0.5}
    if target.kind == "quadrature":
        return {(1, 1): 1.0, (1, -1): 1.0}
    if target.kind == "amplitude":
        return {(1, 1): 2.0}
    if target.kind == "moment":
        big_n = target.n + target.m
        norm = math.exp(-_richter_log_norm(target.n, target.m))
        q = target.m - target.n
        out = {}
        for j, h in enumerate(_hermite_coefficients(big_n)):
            if h:
                out[(j, q)] = float(h) * 2.0 ** (j / 2) * norm
        return out
    return None


# ---------------------------------------------------------------------------
# kernel expressions


@dataclass(frozen=True)
class KernelExpr:
    """``R(x, phi) + sum_j mu_j F_j(x, phi) + sum_j nu_j conj(F_j(x, phi))``."""

    target: Target
    family: NullFamily = field(default_factory=lambda: NullFamily("I", 0))
    mu: np.ndarray = field(default=None, repr=False)
    nu: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "target", Target.parse(self.target))
        M = self.family.M
        mu = np.zeros(M, complex) if self.mu is None else np.asarray(self.mu, dtype=complex).ravel()
        nu = mu.conj() if self.nu is None else np.asarray(self.nu, dtype=complex).ravel()
        if len(mu) != M or len(nu) != M:
            raise ValueError(f"coefficient lengths ({len(mu)}, {len(nu)}) do not match family size {M}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def base(cls, target):
        return cls(Target.parse(target))

    @property
    def is_paired(self):
        return bool(np.array_equal(self.nu, self.mu.conj()))

    @property
    def is_real(self):
        return self.target.is_real and self.is_paired

    def __call__(self, x, phi):
        return eval_kernel(self, x, phi)


def eval_kernel(kexpr: KernelExpr, x, phi):
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast(x, phi).shape
    xb, pb = np.broadcast_arrays(x, phi)
    base = np.asarray(base_kernel(kexpr.target, xb, pb)).reshape(-1)
    if kexpr.family.M:
        F = null_feature_matrix(kexpr.family, xb.ravel(), pb.ravel())
        if kexpr.is_paired:
            extra = 2.0 * (F @ kexpr.mu).real
        else:
            extra = F @ kexpr.mu + F.conj() @ kexpr.nu
        base = base + extra
    if kexpr.is_real:
        base = base.real
    return base.reshape(shape) if shape else base[0]
