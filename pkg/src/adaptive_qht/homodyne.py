"""Seeded Monte Carlo homodyne data.

Quadrature outcomes are drawn by inverse-CDF sampling.  For a pure state the
outcome distribution decomposes into phase harmonics,

    p(x, phi) = S_0(x) + 2 Re sum_{d>0} exp(-i d phi) S_d(x),
    S_d(x) = sum_a c_a conj(c_{a-d}) psi_a(x) psi_{a-d}(x),

so one table of cumulative integrals ``C_d(x)`` per state gives the exact CDF
at any phase.  Each draw locates its cell by bisection on the tabulated CDF
and is refined inside the cell with a cubic Hermite model that uses the
density as the slope.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson

from .exceptions import GridError
from .kernels import oscillator_psi_table
from .states import StateSpec, fock_amplitudes

__all__ = [
    "PhaseStrategy",
    "HomodyneDataset",
    "QuadratureSampler",
    "sample_quadrature",
    "generate_dataset",
    "load_dataset",
]

GENERATOR_NAME = "numpy.random.PCG64 (SeedSequence spawn_key=(block,))"
MASS_TOLERANCE = 1e-9
_CHUNK = 4096


@dataclass(frozen=True)
class PhaseStrategy:
    """How reference phases are chosen.

    ``random``: uniform on [0, pi).  ``grid``: ``j pi / P`` cycled in order.
    ``stratified``: one uniform draw inside each of ``P`` equal bins, cycled.
    """

    kind: str = "random"
    P: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("random", "grid", "stratified"):
            raise ValueError(f"unknown phase strategy {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "random":
            object.__setattr__(self, "P", None)
        elif self.P is None or int(self.P) < 1:
            raise ValueError(f"{kind} phase strategy needs P >= 1")
        else:
            object.__setattr__(self, "P", int(self.P))

    @classmethod
    def random(cls):
        return cls("random")

    @classmethod
    def grid(cls, P):
        return cls("grid", P)

    @classmethod
    def stratified(cls, P):
        return cls("stratified", P)

    @classmethod
    def parse(cls, value):
        if isinstance(value, PhaseStrategy):
            return value
        if isinstance(value, dict):
            return cls(value["kind"], value.get("P"))
        text = str(value)
        if ":" in text:
            kind, P = text.split(":", 1)
            return cls(kind, int(P))
        return cls(text)

    def to_dict(self):
        return {"kind": self.kind, "P": self.P}

    def phases(self, start, count, rng):
        """Phases for global sample indices ``start ... start+count-1``."""
        if self.kind == "random":
            phi = rng.random(count) * math.pi
        else:
            bins = (start + np.arange(count)) % self.P
            offset = 0.0 if self.kind == "grid" else rng.random(count)
            phi = (bins + offset) * (math.pi / self.P)
        return np.minimum(phi, np.nextafter(math.pi, 0.0))


class QuadratureSampler:
    """Inverse-CDF sampler for the homodyne outcomes of one state."""

    def __init__(self, spec: StateSpec, step=0.005):
        self.spec = spec
        c = np.asarray(fock_amplitudes(spec).amplitudes)
        nz = np.flatnonzero(np.abs(c) > 0)
        top = int(nz[-1]) if len(nz) else 0
        c = c[: top + 1]
        half_width = 0.5 * math.sqrt(2 * top + 1) + 6.0
        for _ in range(4):
            if self._build(c, half_width, step):
                return
            half_width *= 1.5
        raise GridError(f"sampling grid of half-width {half_width:.1f} still misses more than {MASS_TOLERANCE:g} of the mass for {spec}")

    def _build(self, c, half_width, step):
        x = np.arange(-half_width, half_width + step / 2, step)
        psi = oscillator_psi_table(len(c) - 1, x)
        amp = c[:, None] * psi  # c_a psi_a(x)
        peak = float(np.max(np.sum(np.abs(amp) ** 2, axis=0)))
        harmonics, orders = [], []
        for d in range(len(c)):
            s_d = np.sum(amp[d:] * amp[: len(c) - d].conj(), axis=0)
            if d == 0 or np.max(np.abs(s_d)) > 1e-15 * peak:
                harmonics.append(s_d)
                orders.append(d)
        S = np.array(harmonics).T  # (n_x, D)
        # cumulative_simpson drops imaginary parts, so integrate them separately
        C = cumulative_simpson(S.real, x=x, axis=0, initial=0.0) + 1j * cumulative_simpson(S.imag, x=x, axis=0, initial=0.0)
        total = C[-1]
        leak = abs(1.0 - total[0].real) + 2.0 * np.sum(np.abs(total[1:]))
        if leak > MASS_TOLERANCE:
            return False
        self.x = x
        self.step = step
        self.orders = np.array(orders)
        self.density = S
        self.cdf = C
        return True

    # -- evaluation helpers -------------------------------------------
    def _rotations(self, phi):
        return np.exp(-1j * np.outer(phi, self.orders))

    @staticmethod
    def _combine(table_rows, rot):
        vals = np.sum(table_rows * rot, axis=1)
        return table_rows[:, 0].real + 2.0 * (vals.real - (table_rows[:, 0] * rot[:, 0]).real)

    def cdf_at(self, idx, rot):
        return self._combine(self.cdf[idx], rot)

    def pdf_at(self, idx, rot):
        return self._combine(self.density[idx], rot)

    def pdf(self, x, phi):
        """Density from the harmonic table (linear interpolation; for checks)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rot = self._rotations(np.broadcast_to(np.asarray(phi, dtype=float), x.shape))
        pos = np.clip((x - self.x[0]) / self.step, 0, len(self.x) - 1.000001)
        j = pos.astype(int)
        t = pos - j
        return (1 - t) * self.pdf_at(j, rot) + t * self.pdf_at(j + 1, rot)

    def quantile(self, u, phi):
        """Outcomes ``x`` with ``CDF(x | phi) = u``; ``u`` and ``phi`` are 1-D arrays."""
        u = np.asarray(u, dtype=float)
        phi = np.asarray(phi, dtype=float)
        out = np.empty(u.size)
        last = len(self.x) - 1
        for start in range(0, u.size, _CHUNK):
            sl = slice(start, start + _CHUNK)
            rot = self._rotations(phi[sl])
            total = self.cdf_at(np.full(rot.shape[0], last), rot)
            target = u[sl] * total
            lo = np.zeros(rot.shape[0], dtype=int)
            hi = np.full(rot.shape[0], last)
            while np.any(hi - lo > 1):
                mid = (lo + hi) // 2
                below = self.cdf_at(mid, rot) <= target
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            f0, f1 = self.cdf_at(lo, rot), self.cdf_at(hi, rot)
            p0, p1 = self.pdf_at(lo, rot) * self.step, self.pdf_at(hi, rot) * self.step
            span = np.maximum(f1 - f0, 1e-300)
            tau = np.clip((target - f0) / span, 0.0, 1.0)
            for _ in range(4):
                t2, t3 = tau * tau, tau * tau * tau
                h = (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + tau) * p0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * p1
                dh = (6 * t2 - 6 * tau) * f0 + (3 * t2 - 4 * tau + 1) * p0 + (-6 * t2 + 6 * tau) * f1 + (3 * t2 - 2 * tau) * p1
                ok = dh > 1e-3 * span
                tau = np.where(ok, np.clip(tau - (h - target) / np.where(ok, dh, 1.0), 0.0, 1.0), tau)
            out[sl] = self.x[lo] + tau * self.step
        return out


@lru_cache(maxsize=16)
def _sampler(spec):
    return QuadratureSampler(spec)


def sample_quadrature(spec: StateSpec, phi, rng, size=None):
    """Draw homodyne outcomes at phase(s) ``phi`` using generator ``rng``."""
    phi_arr = np.asarray(phi, dtype=float)
    if size is not None:
        phi_arr = np.broadcast_to(phi_arr, (size,) if np.isscalar(size) else size)
    flat = np.ascontiguousarray(phi_arr).ravel()
    u = rng.random(flat.size)
    x = _sampler(spec).quantile(u, flat)
    if phi_arr.ndim == 0:
        return float(x[0])
    return x.reshape(phi_arr.shape)


def _block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass
class HomodyneDataset:
    """Homodyne samples ``(x_i, phi_i)`` in ``n_blocks`` contiguous blocks."""

    x: np.ndarray
    phi: np.ndarray
    n_blocks: int
    n_per_block: int
    seed: int | None = None
    spec: StateSpec | None = None
    strategy: PhaseStrategy | None = None
    generator: str = GENERATOR_NAME
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.x.shape != self.phi.shape or self.x.ndim != 1:
            raise ValueError("x and phi must be 1-D arrays of equal length")
        if self.x.size != self.n_blocks * self.n_per_block:
            raise ValueError(f"{self.x.size} samples do not form {self.n_blocks} blocks of {self.n_per_block}")

    def __len__(self):
        return self.x.size

    @property
    def block(self):
        return np.repeat(np.arange(self.n_blocks), self.n_per_block)

    def samples(self):
        """``(N, 2)`` array of ``(x, phi)`` for estimator-style APIs."""
        return np.column_stack([self.x, self.phi])

    def block_slices(self):
        return [slice(b * self.n_per_block, (b + 1) * self.n_per_block) for b in range(self.n_blocks)]

    def subset(self, blocks):
        """Dataset restricted to the given block indices (kept in order)."""
        blocks = list(blocks)
        idx = np.concatenate([np.arange(b * self.n_per_block, (b + 1) * self.n_per_block) for b in blocks])
        return HomodyneDataset(
            self.x[idx], self.phi[idx], len(blocks), self.n_per_block, self.seed, self.spec, self.strategy, self.generator
        )

    def provenance(self):
        return {
            "spec": None if self.spec is None else self.spec.to_dict(),
            "strategy": None if self.strategy is None else self.strategy.to_dict(),
            "seed": self.seed,
            "n_blocks": self.n_blocks,
            "n_per_block": self.n_per_block,
            "generator": self.generator,
            **self.extra,
        }

    def to_csv(self, path):
        """Write ``x,phi,block`` rows and a JSON provenance sidecar."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "phi", "block"])
            for xi, pi, bi in zip(self.x, self.phi, self.block):
                writer.writerow([f"{xi:.17g}", f"{pi:.17g}", int(bi)])
        with open(sidecar_path(path), "w") as fh:
            json.dump(self.provenance(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json") if path.suffix != ".csv" else path.with_suffix(".json")


def load_dataset(path):
    """Read a dataset written by :meth:`HomodyneDataset.to_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "phi", "block"]:
            raise ValueError(f"{path}: expected header x,phi,block, got {header}")
        rows = [(float(a), float(b), int(c)) for a, b, c in reader]
    x = np.array([r[0] for r in rows])
    phi = np.array([r[1] for r in rows])
    block = np.array([r[2] for r in rows], dtype=int)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        with open(side) as fh:
            meta = json.load(fh)
    n_blocks = int(meta.get("n_blocks", block.max() + 1 if block.size else 1))
    n_per_block = int(meta.get("n_per_block", x.size // max(n_blocks, 1)))
    expected = np.repeat(np.arange(n_blocks), n_per_block)
    if block.shape != expected.shape or np.any(block != expected):
        raise ValueError(f"{path}: blocks are not contiguous equal-size ranges")
    spec = StateSpec.from_dict(meta["spec"]) if meta.get("spec") else None
    strategy = PhaseStrategy.parse(meta["strategy"]) if meta.get("strategy") else None
    known = {"spec", "strategy", "seed", "n_blocks", "n_per_block", "generator"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return HomodyneDataset(
        x, phi, n_blocks, n_per_block, meta.get("seed"), spec, strategy, meta.get("generator", GENERATOR_NAME), extra
    )


def generate_dataset(spec: StateSpec, strategy, n_blocks: int, n_per_block: int, seed: int, threads=1) -> HomodyneDataset:
    """Simulate ``n_blocks * n_per_block`` homodyne samples.

    Block ``b`` draws from its own generator seeded by ``(seed, b)``, so the
    result does not depend on ``threads``.
    """
    strategy = PhaseStrategy.parse(strategy)
    if n_blocks < 1 or n_per_block < 1:
        raise ValueError("n_blocks and n_per_block must be positive")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    sampler = _sampler(spec)

    def run_block(b):
        rng = _block_rng(seed, b)
        phi = strategy.phases(b * n_per_block, n_per_block, rng)
        u = rng.random(n_per_block)
        return sampler.quantile(u, phi), phi

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, range(n_blocks)))
    else:
        parts = [run_block(b) for b in range(n_blocks)]
    x = np.concatenate([p[0] for p in parts])
    phi = np.concatenate([p[1] for p in parts])
    return HomodyneDataset(x, phi, n_blocks, n_per_block, seed, spec, strategy)
