"""Sample averages, block error bars, noise ratios and kernel histograms."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import KernelExpr, eval_kernel
from .validation import check_blocks, check_samples

__all__ = ["EstimateReport", "Histogram", "tomo_average", "noise_ratio", "kernel_histogram", "block_error"]


def block_error(block_means):
    """Population r.m.s. spread of block means about their average, over sqrt(B)."""
    bm = np.asarray(block_means)
    B = bm.size
    if B < 2:
        return math.nan
    dev = np.abs(bm - bm.mean()) ** 2
    return math.sqrt(dev.mean() / B)


@dataclass
class EstimateReport:
    """Result of averaging a kernel over homodyne data.

    ``std_error`` is NaN (and ``error_available`` False) with fewer than two
    blocks.  For complex kernels ``std_error`` uses the modulus of the block
    deviations, ``re_error``/``im_error`` hold the component errors and
    ``variance`` is the mean of the real- and imaginary-part variances.
    """

    mean: complex
    std_error: float
    block_means: np.ndarray
    variance: float
    n_samples: int
    re_error: float = math.nan
    im_error: float = math.nan
    is_complex: bool = False

    @property
    def error_available(self):
        return not math.isnan(self.std_error)

    @property
    def n_blocks(self):
        return len(self.block_means)

    def to_dict(self):
        def num(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        bm = np.asarray(self.block_means)
        return {
            "mean": [float(np.real(self.mean)), float(np.imag(self.mean))],
            "std_error": num(float(self.std_error)),
            "re_error": num(float(self.re_error)),
            "im_error": num(float(self.im_error)),
            "error_available": self.error_available,
            "block_means": [[float(v.real), float(v.imag)] for v in bm.astype(complex)],
            "variance": float(self.variance),
            "n_samples": int(self.n_samples),
            "is_complex": self.is_complex,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def _blocks_of(data, n_blocks):
    if n_blocks is None:
        n_blocks = getattr(data, "n_blocks", 1)
    return n_blocks


def tomo_average(data, kexpr, n_blocks=None) -> EstimateReport:
    """Average ``kexpr`` over ``data`` with block error bars.

    ``data`` is a ``HomodyneDataset`` or an ``(N, 2)`` array of ``(x, phi)``;
    ``kexpr`` is a :class:`KernelExpr`, a target name, or any callable
    ``f(x, phi)``.  Blocks are contiguous, equal-size ranges.
    """
    x, phi = check_samples(data)
    B = check_blocks(x.size, _blocks_of(data, n_blocks))
    if isinstance(kexpr, str):
        kexpr = KernelExpr.base(kexpr)
    values = eval_kernel(kexpr, x, phi) if isinstance(kexpr, KernelExpr) else np.asarray(kexpr(x, phi))
    values = np.broadcast_to(values, x.shape)
    return summarize(values, B)


def summarize(values, n_blocks) -> EstimateReport:
    """Block statistics of precomputed kernel values."""
    values = np.asarray(values)
    is_complex = np.iscomplexobj(values) and bool(np.any(values.imag != 0))
    if not is_complex:
        values = values.real
    B = check_blocks(values.size, n_blocks)
    block_means = values.reshape(B, -1).mean(axis=1)
    mean = values.mean()
    if is_complex:
        variance = 0.5 * (np.mean(np.abs(values) ** 2) - abs(mean) ** 2)
        re_err, im_err = block_error(block_means.real), block_error(block_means.imag)
    else:
        variance = np.mean(values**2) - mean**2
        re_err, im_err = block_error(block_means), 0.0 if B >= 2 else math.nan
    return EstimateReport(
        mean=complex(mean) if is_complex else float(mean),
        std_error=block_error(block_means),
        block_means=block_means,
        variance=float(variance),
        n_samples=values.size,
        re_error=re_err,
        im_error=im_err,
        is_complex=is_complex,
    )


def noise_ratio(variance, intrinsic):
    """``sqrt(variance / intrinsic)``: tomographic noise relative to the intrinsic one."""
    if not intrinsic > 0:
        raise ValueError(f"intrinsic noise must be positive, got {intrinsic}")
    if variance < 0:
        raise ValueError(f"variance must be nonnegative, got {variance}")
    return math.sqrt(variance / intrinsic)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def peak(self):
        """Center of the most populated bin."""
        return float(self.centers[int(np.argmax(self.counts))])

    def rows(self):
        return [(float(a), float(b), int(c)) for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)]

    def to_csv(self, path):
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_left", "bin_right", "count"])
            for a, b, c in self.rows():
                writer.writerow([f"{a:.17g}", f"{b:.17g}", c])
        return path


def kernel_histogram(data, kexpr, bins=50, range=None, part="real") -> Histogram:
    """Histogram of kernel values over the data (``part`` picks real/imag for complex kernels)."""
    if int(bins) < 1:
        raise ValueError("bins must be >= 1")
    if range is not None and not range[0] < range[1]:
        raise ValueError(f"empty histogram range {range}")
    x, phi = check_samples(data)
    if isinstance(kexpr, str):
        kexpr = KernelExpr.base(kexpr)
    values = np.asarray(eval_kernel(kexpr, x, phi))
    values = values.imag if part == "imag" else values.real
    counts, edges = np.histogram(values, bins=int(bins), range=range)
    return Histogram(edges, counts)
