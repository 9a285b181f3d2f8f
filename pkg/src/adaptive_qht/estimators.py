"""Estimator-style front end: fit null-function coefficients, then average."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .adapt import MAX_CONDITION, OptimizationResult, optimize
from .exceptions import IllConditionedError
from .kernels import KernelExpr, Target, eval_kernel
from .nullfns import NullFamily, null_feature_matrix
from .states import StateSpec, density_matrix_element, normally_ordered_moment
from .stats import EstimateReport, summarize
from .validation import check_blocks, check_samples

__all__ = ["NullFeatures", "AdaptiveKernelEstimator", "ElementEstimate", "reconstruct_elements", "exact_value"]


def exact_value(spec: StateSpec, target) -> complex:
    """Exact expectation of ``target`` in ``spec``."""
    target = Target.parse(target)
    if target.kind == "intensity":
        return complex(normally_ordered_moment(spec, 1, 1).real)
    if target.kind == "quadrature":
        return complex(normally_ordered_moment(spec, 0, 1).real)
    if target.kind == "amplitude":
        return complex(normally_ordered_moment(spec, 0, 1))
    if target.kind == "moment":
        return complex(normally_ordered_moment(spec, target.n, target.m))
    return complex(density_matrix_element(spec, target.n, target.m))


class NullFeatures(TransformerMixin, BaseEstimator):
    """Map ``(x, phi)`` samples to the ``(N, M)`` complex null-function matrix."""

    def __init__(self, family="I", n_null=10):
        self.family = family
        self.n_null = n_null

    def fit(self, X, y=None):
        check_samples(X)
        self.family_ = NullFamily(self.family, self.n_null)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "family_")
        x, phi = check_samples(X)
        return null_feature_matrix(self.family_, x, phi)


class AdaptiveKernelEstimator(TransformerMixin, BaseEstimator):
    """Variance-reduced tomographic estimator for one target.

    ``fit`` solves for the null-function coefficients on homodyne data
    ``X`` (``(N, 2)`` array of ``(x, phi)`` or a dataset).  ``transform``
    returns the optimized kernel evaluated at each sample, and ``estimate``
    averages it with block error bars.

    Parameters
    ----------
    target : str
        ``"intensity"``, ``"quadrature"``, ``"amplitude"``, ``"moment(n,m)"``
        or ``"rho(n,m)"``.
    family : {"I", "II", "III"}
    n_null : int
        Number of null functions ``M``; ``0`` gives the plain kernel.
    mode : {"auto", "real", "complex"}
    max_condition : float
    split : bool
        Fit on even-numbered blocks and estimate on odd-numbered ones, which
        removes the small bias of reusing the same data for both.
    """

    def __init__(self, target="intensity", family="I", n_null=10, mode="auto", max_condition=MAX_CONDITION, split=False):
        self.target = target
        self.family = family
        self.n_null = n_null
        self.mode = mode
        self.max_condition = max_condition
        self.split = split

    def fit(self, X, y=None):
        check_samples(X, min_samples=2)
        family = NullFamily(self.family, self.n_null)
        self.result_: OptimizationResult = optimize(self.target, family, X, self.mode, self.max_condition)
        self.kernel_: KernelExpr = self.result_.kernel
        self.mu_ = self.result_.mu
        self.nu_ = self.result_.nu
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        """Optimized kernel values, shape ``(N,)``."""
        check_is_fitted(self, "kernel_")
        x, phi = check_samples(X)
        return np.asarray(eval_kernel(self.kernel_, x, phi))

    def base_values(self, X):
        x, phi = check_samples(X)
        return np.asarray(eval_kernel(KernelExpr.base(self.target), x, phi))

    def estimate(self, X, n_blocks=None):
        """Fit (per ``split``) and return ``(base_report, optimized_report)``."""
        x, phi = check_samples(X, min_samples=2)
        B = check_blocks(x.size, n_blocks if n_blocks is not None else getattr(X, "n_blocks", 1))
        samples = np.column_stack([x, phi])
        if self.split:
            if B < 2:
                raise ValueError("split mode needs at least two blocks")
            per = x.size // B
            blocks = samples.reshape(B, per, 2)
            self.fit(blocks[0::2].reshape(-1, 2))
            samples = blocks[1::2].reshape(-1, 2)
            B = blocks[1::2].shape[0]
        else:
            self.fit(samples)
        return summarize(self.base_values(samples), B), summarize(self.transform(samples), B)


@dataclass
class ElementEstimate:
    n: int
    m: int
    base: EstimateReport
    optimized: EstimateReport
    gamma: float
    dropped_members: int = 0
    note: str = ""

    def row(self):
        b, o = self.base, self.optimized
        return {
            "n": self.n,
            "m": self.m,
            "re_base": float(np.real(b.mean)),
            "im_base": float(np.imag(b.mean)),
            "err_base": float(b.std_error),
            "re_opt": float(np.real(o.mean)),
            "im_opt": float(np.imag(o.mean)),
            "err_opt": float(o.std_error),
            "gamma": float(self.gamma),
        }


def reconstruct_elements(data, elements, family="I", n_null=6, n_blocks=None, max_condition=MAX_CONDITION, split=False):
    """Base and adaptive estimates of density-matrix elements ``rho(n, m)``.

    If no leading block of ``A`` can be solved, the element falls back to the
    base kernel and the reason is recorded in ``note``.
    """
    out = []
    for n, m in elements:
        est = AdaptiveKernelEstimator(Target("matrix_element", n, m), family, n_null, "auto", max_condition, split)
        try:
            base, opt = est.estimate(data, n_blocks)
            res = est.result_
            out.append(ElementEstimate(n, m, base, opt, res.gamma, res.dropped_members))
        except IllConditionedError as exc:
            fallback = AdaptiveKernelEstimator(Target("matrix_element", n, m), family, 0, "auto", max_condition, split)
            base, _ = fallback.estimate(data, n_blocks)
            out.append(ElementEstimate(n, m, base, base, 0.0, n_null, f"base kernel used: {exc}"))
    return out
