"""Adaptive kernel optimization with null functions as control variates.

For a base kernel ``R`` and null functions ``F_0 ... F_{M-1}`` the optimized
kernel is

    K = R + sum_k mu_k F_k + sum_k nu_k conj(F_k)

with ``A_kl = avg(F_k conj(F_l))``, ``b_k = -avg(R conj(F_k))`` and
``c_k = -avg(R F_k)``.  Minimizing the variance of a real kernel
(``nu = conj(mu)``) gives ``A^T mu = b``; the trace-of-covariance noise of a
complex kernel is minimized by ``A^T mu = b`` and ``A nu = c`` independently.
Averages come either from data (empirical mode) or from an exact state
(exact mode).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.special import eval_genlaguerre

from .exceptions import IllConditionedError
from .kernels import KernelExpr, Target, base_kernel, kernel_polynomial, pattern_function
from .nullfns import NullFamily, null_feature_matrix
from .quadrature import TomographicQuadrature
from .states import StateSpec, normally_ordered_moment, phase_averaged_moment
from .validation import check_samples

__all__ = [
    "OptimizationResult",
    "LinearSolution",
    "estimate_A",
    "estimate_b",
    "estimate_c",
    "kernel_variance",
    "solve",
    "optimize",
    "gamma_scan",
    "type_one_A_from_moments",
    "coherent_type_one_A",
    "fock_type_one_A_prefactor_form",
    "analytic_b",
]

MAX_CONDITION = 1e12
MAX_MEMBERS = 64


# ---------------------------------------------------------------------------
# exact averages of x^j e^{iq phi} expansions


def _poly_mul(a, b):
    out = {}
    for (ja, qa), ca in a.items():
        for (jb, qb), cb in b.items():
            key = (ja + jb, qa + qb)
            out[key] = out.get(key, 0) + ca * cb
    return out


def _poly_conj(a):
    return {(j, -q): np.conj(c) for (j, q), c in a.items()}


def _poly_average(spec, poly):
    return sum(c * phase_averaged_moment(spec, j, q) for (j, q), c in poly.items())


@lru_cache(maxsize=32)
def _quadrature(spec, max_phase):
    return TomographicQuadrature(spec, max_phase=max_phase)


def _quadrature_for(spec, max_phase):
    return _quadrature(spec, 64 * max(1, math.ceil(max_phase / 64)))


class _PatternAverager:
    """Exact-mode averages for matrix-element kernels via 2-D quadrature."""

    def __init__(self, spec, target, max_phase):
        self.quad = _quadrature_for(spec, max_phase + abs(target.n - target.m))
        self.q = target.n - target.m
        self.f = pattern_function(target.n, target.m, self.quad.x)

    def mean(self):
        return self.quad.average_separable(self.f, self.q)

    def second_moment(self, conjugate):
        # conjugate=True -> avg |R|^2, otherwise avg R^2
        return self.quad.average_separable(self.f * self.f, 0 if conjugate else 2 * self.q)

    def against(self, k, phase):
        return self.quad.average_separable(self.f * self.quad.x**k, self.q + phase)


def _is_state(source):
    return isinstance(source, StateSpec)


def _empirical_parts(source, family, target=None):
    x, phi = check_samples(source)
    F = null_feature_matrix(family, x, phi)
    R = None if target is None else np.asarray(base_kernel(target, x, phi), dtype=complex)
    return F, R


# ---------------------------------------------------------------------------
# A, b, c, variance


def estimate_A(source, family: NullFamily) -> np.ndarray:
    """Matrix ``A_kl = avg(F_k conj(F_l))`` from data or an exact state."""
    if family.M < 1:
        raise ValueError("estimate_A needs at least one null function")
    if _is_state(source):
        if family.kind == "II":
            return np.eye(family.M, dtype=complex)
        members = family.members()
        A = np.empty((family.M, family.M), dtype=complex)
        for k, mk in enumerate(members):
            for l in range(k, family.M):
                ml = members[l]
                A[k, l] = phase_averaged_moment(source, mk.k + ml.k, mk.phase - ml.phase)
                A[l, k] = np.conj(A[k, l])
            A[k, k] = A[k, k].real
        return A
    F, _ = _empirical_parts(source, family)
    A = F.T @ F.conj() / F.shape[0]
    return 0.5 * (A + A.conj().T)


def _exact_projection(spec, target, family, conjugate):
    # -avg(R conj(F_k)) when conjugate else -avg(R F_k)
    members = family.members()
    sign = -1 if conjugate else 1
    poly = kernel_polynomial(target)
    out = np.empty(family.M, dtype=complex)
    if poly is not None:
        for idx, m in enumerate(members):
            out[idx] = -sum(c * phase_averaged_moment(spec, j + m.k, q + sign * m.phase) for (j, q), c in poly.items())
        return out
    max_phase = max(m.phase for m in members)
    avg = _PatternAverager(spec, target, max_phase)
    for idx, m in enumerate(members):
        out[idx] = -avg.against(m.k, sign * m.phase)
    return out


def estimate_b(source, target, family: NullFamily) -> np.ndarray:
    """Vector ``b_k = -avg(R conj(F_k))``."""
    target = Target.parse(target)
    if family.M < 1:
        raise ValueError("estimate_b needs at least one null function")
    if _is_state(source):
        return _exact_projection(source, target, family, conjugate=True)
    F, R = _empirical_parts(source, family, target)
    return -(R @ F.conj()) / F.shape[0]


def estimate_c(source, target, family: NullFamily) -> np.ndarray:
    """Vector ``c_k = -avg(R F_k)``, used for complex kernels."""
    target = Target.parse(target)
    if family.M < 1:
        raise ValueError("estimate_c needs at least one null function")
    if _is_state(source):
        return _exact_projection(source, target, family, conjugate=False)
    F, R = _empirical_parts(source, family, target)
    return -(R @ F) / F.shape[0]


def kernel_variance(source, target, mode="auto") -> float:
    """Variance of the base kernel.

    Real mode uses ``avg(R^2) - avg(R)^2``; complex mode the trace-of-covariance
    noise ``(avg|R|^2 - |avg R|^2) / 2``.
    """
    target = Target.parse(target)
    mode = _resolve_mode(target, mode)
    if _is_state(source):
        poly = kernel_polynomial(target)
        if poly is not None:
            mean = _poly_average(source, poly)
            if mode == "real":
                return float((_poly_average(source, _poly_mul(poly, poly)) - mean**2).real)
            return float(0.5 * (_poly_average(source, _poly_mul(poly, _poly_conj(poly))).real - abs(mean) ** 2))
        avg = _PatternAverager(source, target, 0)
        mean = avg.mean()
        if mode == "real":
            return float((avg.second_moment(conjugate=False) - mean**2).real)
        return float(0.5 * (avg.second_moment(conjugate=True).real - abs(mean) ** 2))
    x, phi = check_samples(source)
    R = np.asarray(base_kernel(target, x, phi), dtype=complex)
    if mode == "real":
        r = R.real
        return float(np.mean(r * r) - np.mean(r) ** 2)
    return float(0.5 * (np.mean(np.abs(R) ** 2) - abs(np.mean(R)) ** 2))


def _resolve_mode(target, mode):
    if mode == "auto":
        return "real" if target.is_real else "complex"
    if mode not in ("real", "complex"):
        raise ValueError(f"mode must be 'real', 'complex' or 'auto', got {mode!r}")
    return mode


# ---------------------------------------------------------------------------
# linear algebra


class LinearSolution(NamedTuple):
    x: np.ndarray
    residual: float
    condition: float


def condition_estimate(A) -> float:
    """2-norm condition number of ``A`` after symmetric diagonal equilibration."""
    A = np.asarray(A, dtype=complex)
    d = np.real(np.diag(A))
    if np.any(d <= 0) or not np.all(np.isfinite(A)):
        return math.inf
    s = 1.0 / np.sqrt(d)
    return float(np.linalg.cond(A * s[:, None] * s[None, :]))


def _refine(Ae, rhs, y):
    """One step of iterative refinement when the first residual is not tiny."""
    r = rhs - Ae @ y
    if np.linalg.norm(r) <= 1e-12 * np.linalg.norm(rhs):
        return y
    return y + scipy.linalg.solve(Ae, r, assume_a="her")


def solve(A, rhs, max_condition=MAX_CONDITION) -> LinearSolution:
    """Solve the Hermitian system ``A x = rhs``.

    Uses LAPACK's pivoted Hermitian-indefinite factorization on the
    equilibrated matrix.  Raises :class:`IllConditionedError` when the
    condition estimate exceeds ``max_condition`` or the residual check fails.
    """
    A = np.asarray(A, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or rhs.shape != (A.shape[0],):
        raise ValueError("A must be square and match the right-hand side")
    if A.shape[0] > MAX_MEMBERS:
        raise ValueError(f"systems larger than {MAX_MEMBERS} are not supported")
    cond = condition_estimate(A)
    if not cond <= max_condition:
        raise IllConditionedError(f"condition estimate {cond:.3e} exceeds {max_condition:.1e}", cond)
    s = 1.0 / np.sqrt(np.real(np.diag(A)))
    Ae = A * s[:, None] * s[None, :]
    Ae = 0.5 * (Ae + Ae.conj().T)
    rhs_e = rhs * s
    with warnings.catch_warnings():
        # conditioning is judged above and by the residual check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        y = scipy.linalg.solve(Ae, rhs_e, assume_a="her")
        y = _refine(Ae, rhs_e, y)
    # residual of the equilibrated system; the unscaled one is dominated by
    # rounding in entries of very different magnitude
    residual = float(np.linalg.norm(Ae @ y - rhs_e))
    rhs_norm = float(np.linalg.norm(rhs_e))
    if residual > 1e-9 * rhs_norm:
        raise IllConditionedError(f"residual {residual:.3e} exceeds 1e-9 * |rhs| = {1e-9 * rhs_norm:.3e}", cond)
    x = y * s
    return LinearSolution(x, residual, cond)


# ---------------------------------------------------------------------------
# optimization


def _interleave(arr):
    arr = np.asarray(arr, dtype=complex).ravel()
    out = np.empty(2 * arr.size)
    out[0::2] = arr.real
    out[1::2] = arr.imag
    return out.tolist()


def _deinterleave(values, shape=None):
    values = np.asarray(values, dtype=float)
    arr = values[0::2] + 1j * values[1::2]
    return arr.reshape(shape) if shape is not None else arr


@dataclass
class OptimizationResult:
    """Outcome of one adaptive optimization."""

    target: Target
    family: NullFamily
    mode: str
    mu: np.ndarray
    nu: np.ndarray
    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray | None = field(default=None, repr=False)
    delta2: float = 0.0
    gamma: float = 0.0
    variance_base: float = 0.0
    residual: float = 0.0
    condition_estimate: float = 1.0
    dropped_members: int = 0
    source: str = "exact"
    n_samples: int | None = None

    @property
    def variance_opt(self):
        return self.variance_base - self.delta2

    @property
    def kernel(self) -> KernelExpr:
        return KernelExpr(self.target, self.family, self.mu, self.nu)

    def to_dict(self):
        M = self.family.M
        return {
            "target": str(self.target),
            "family": self.family.kind,
            "M": M,
            "mode": self.mode,
            "source": self.source,
            "n_samples": self.n_samples,
            "A": _interleave(self.A),
            "A_shape": [M, M],
            "b": _interleave(self.b),
            "c": None if self.c is None else _interleave(self.c),
            "mu": _interleave(self.mu),
            "nu": _interleave(self.nu),
            "delta2": self.delta2,
            "gamma": self.gamma,
            "variance_base": self.variance_base,
            "residual": self.residual,
            "condition_estimate": self.condition_estimate,
            "dropped_members": self.dropped_members,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        M = d["M"]
        return cls(
            target=Target.parse(d["target"]),
            family=NullFamily(d["family"], M),
            mode=d["mode"],
            mu=_deinterleave(d["mu"]),
            nu=_deinterleave(d["nu"]),
            A=_deinterleave(d["A"], (M, M)),
            b=_deinterleave(d["b"]),
            c=None if d.get("c") is None else _deinterleave(d["c"]),
            delta2=d["delta2"],
            gamma=d["gamma"],
            variance_base=d["variance_base"],
            residual=d["residual"],
            condition_estimate=d["condition_estimate"],
            dropped_members=d["dropped_members"],
            source=d["source"],
            n_samples=d.get("n_samples"),
        )


def _solve_parts(A, b, c, variance, mode, max_condition):
    """Solve on the largest acceptable leading block of ``A``; pad with zeros.

    Highest-index members are dropped one at a time while the condition
    estimate is too large or the solve is rejected.
    """
    M = len(b)
    if M == 0:
        return np.zeros(0, complex), np.zeros(0, complex), 0.0, 0.0, 1.0, 0
    for m in range(M, 0, -1):
        sub = A[:m, :m]
        if condition_estimate(sub) > max_condition:
            continue
        try:
            # real-kernel stationarity condition reads sum_k A_kj mu_k = b_j
            sol_mu = solve(sub.T, b[:m], max_condition)
            sol_nu = solve(sub, c[:m], max_condition) if mode == "complex" else None
        except IllConditionedError:
            continue
        break
    else:
        raise IllConditionedError("no leading block of A is acceptably conditioned")
    mu = np.zeros(M, complex)
    mu[:m] = sol_mu.x
    residual = sol_mu.residual
    if mode == "real":
        nu = mu.conj()
        delta2 = 2.0 * float(np.real(np.dot(b[:m], sol_mu.x.conj())))
    else:
        nu = np.zeros(M, complex)
        nu[:m] = sol_nu.x
        residual = max(residual, sol_nu.residual)
        delta2 = 0.5 * float(np.real(np.dot(b[:m], sol_mu.x.conj()) + np.dot(c[:m].conj(), sol_nu.x)))
    return mu, nu, delta2, residual, sol_mu.condition, M - m


def optimize(target, family: NullFamily, source, mode="auto", max_condition=MAX_CONDITION) -> OptimizationResult:
    """Fit null-function coefficients that minimize the kernel noise.

    Parameters
    ----------
    target : str or Target
        Base kernel, e.g. ``"intensity"``, ``"quadrature"``, ``"amplitude"``,
        ``"moment(n,m)"`` or ``"rho(n,m)"``.
    family : NullFamily
    source : StateSpec or array-like
        An exact state, or homodyne data (``(N, 2)`` array or dataset).
    mode : {"auto", "real", "complex"}
        ``auto`` picks real mode for real-valued targets.
    max_condition : float
        Highest-index members are dropped until the equilibrated condition
        estimate of ``A`` is below this.
    """
    target = Target.parse(target)
    mode = _resolve_mode(target, mode)
    if family.M > MAX_MEMBERS:
        raise ValueError(f"at most {MAX_MEMBERS} null functions are supported")
    exact = _is_state(source)
    n_samples = None
    if exact:
        variance = kernel_variance(source, target, mode)
        if family.M:
            A = estimate_A(source, family)
            b = estimate_b(source, target, family)
            c = estimate_c(source, target, family) if mode == "complex" else None
        else:
            A, b, c = np.zeros((0, 0), complex), np.zeros(0, complex), None
    else:
        x, phi = check_samples(source)
        n_samples = x.size
        R = np.asarray(base_kernel(target, x, phi), dtype=complex)
        if mode == "real":
            r = R.real
            variance = float(np.mean(r * r) - np.mean(r) ** 2)
        else:
            variance = float(0.5 * (np.mean(np.abs(R) ** 2) - abs(np.mean(R)) ** 2))
        F = null_feature_matrix(family, x, phi)
        A = F.T @ F.conj() / n_samples
        A = 0.5 * (A + A.conj().T)
        b = -(R @ F.conj()) / n_samples
        c = -(R @ F) / n_samples if mode == "complex" else None
    mu, nu, delta2, residual, cond, dropped = _solve_parts(A, b, c, variance, mode, max_condition)
    gamma = delta2 / variance if variance > 0 else 0.0
    return OptimizationResult(
        target=target,
        family=family,
        mode=mode,
        mu=mu,
        nu=nu,
        A=A,
        b=b,
        c=c,
        delta2=delta2,
        gamma=gamma,
        variance_base=variance,
        residual=residual,
        condition_estimate=cond,
        dropped_members=dropped,
        source="exact" if exact else "empirical",
        n_samples=n_samples,
    )


def gamma_scan(target, kind, state: StateSpec, M_values, mode="auto", max_condition=MAX_CONDITION):
    """Relative noise reduction ``gamma`` for each ``M`` in ``M_values`` (exact mode).

    ``A``, ``b`` and ``c`` are computed once for the largest ``M``; smaller
    optimizations use their leading blocks, so the results are nested.
    """
    target = Target.parse(target)
    mode = _resolve_mode(target, mode)
    M_values = [int(M) for M in M_values]
    variance = kernel_variance(state, target, mode)
    top = max(M_values, default=0)
    if top:
        fam = NullFamily(kind, top)
        A = estimate_A(state, fam)
        b = estimate_b(state, target, fam)
        c = estimate_c(state, target, fam) if mode == "complex" else None
    out = []
    for M in M_values:
        if M == 0 or variance <= 0:
            out.append((M, 0.0))
            continue
        _, _, delta2, _, _, _ = _solve_parts(
            A[:M, :M], b[:M], None if c is None else c[:M], variance, mode, max_condition
        )
        out.append((M, delta2 / variance))
    return out


# ---------------------------------------------------------------------------
# closed forms, used as cross-checks


def type_one_A_from_moments(spec: StateSpec, M: int) -> np.ndarray:
    """Type-I ``A`` from the normal-ordered-moment sum over ``p <= min(k, l)``."""
    A = np.empty((M, M), dtype=complex)
    for k in range(M):
        for l in range(M):
            total = 0j
            for p in range(min(k, l) + 1):
                total += normally_ordered_moment(spec, l - p, k - p) / (
                    2**p * math.factorial(p) * math.factorial(l - p) * math.factorial(k - p)
                )
            A[k, l] = math.factorial(k + l) / 2 ** (k + l) * total
    return A


def coherent_type_one_A(alpha, M: int) -> np.ndarray:
    """Closed-form type-I ``A`` for a coherent state (Laguerre form)."""
    alpha = complex(alpha)
    A = np.empty((M, M), dtype=complex)
    for k in range(M):
        for l in range(k + 1):
            val = (
                alpha ** (k - l)
                * math.factorial(k + l)
                / math.factorial(k)
                * 2.0 ** (-k - 2 * l)
                * eval_genlaguerre(l, k - l, -2 * abs(alpha) ** 2)
            )
            A[k, l] = val
            A[l, k] = np.conj(val)
    return A


def fock_type_one_A_prefactor_form(n: int, M: int, exponent_sign=+1) -> np.ndarray:
    """Diagonal type-I ``A`` for ``|n>`` with prefactor ``2^(s*k - n + 1)``.

    ``exponent_sign=+1`` gives the prefactor ``2^(k-n+1)``,
    which disagrees with the vacuum quadrature variance at ``k = 1``;
    ``exponent_sign=-1`` gives ``2^(-k-n+1)``, which agrees with the moments.
    """
    y, w = np.polynomial.hermite.hermgauss(n + M + 2)
    hn = np.polynomial.hermite.hermval(y, [0] * n + [1])
    diag = []
    for k in range(M):
        integral = 0.5 * np.sum(w * y ** (2 * k) * hn**2)  # half line, even integrand
        diag.append(2.0 ** (exponent_sign * k - n + 1) / (math.factorial(n) * math.sqrt(math.pi)) * integral)
    return np.diag(np.array(diag, dtype=complex))


def analytic_b(target, family: NullFamily, spec: StateSpec) -> np.ndarray:
    """Closed forms for ``b`` (intensity, quadrature, amplitude, diagonal moments).

    Diagonal moments only have a closed form for the first entry
    (``F_0 = exp(2 i phi)``), so the family must have ``M == 1`` there.
    """
    target = Target.parse(target)
    M = family.M
    out = np.zeros(M, dtype=complex)
    if target.kind == "intensity":
        if family.kind == "I":
            for k in range(M):
                out[k] = -normally_ordered_moment(spec, k + 2, 0) / 2 ** (1 + k)
        elif M:
            out[0] = -normally_ordered_moment(spec, 2, 0) / 2
        return out
    if target.kind in ("quadrature", "amplitude") and family.kind == "I":
        shift = 1 if target.kind == "quadrature" else 0
        for k in range(M):
            out[k] = -normally_ordered_moment(spec, k + 1, 0) / 2 ** (k + shift)
        return out
    if target.kind == "moment" and target.n == target.m and M == 1:
        n = target.n
        if n == 0:
            return out
        out[0] = -n / (n + 1) * normally_ordered_moment(spec, n + 1, n - 1)
        return out
    raise NotImplementedError(f"no closed form for {target} with type-{family.kind} null functions")
