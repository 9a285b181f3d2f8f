"""Tomographic averages by direct two-dimensional quadrature.

``avg[f] = (1/pi) int_0^pi dphi int dx p(x, phi) f(x, phi)`` is evaluated with
Gauss-Legendre nodes in ``phi`` and the trapezoidal rule on a uniform ``x``
grid (spectrally accurate for the Gaussian-decaying integrands involved).
Nothing here uses the normally ordered moments, so it serves as an
independent check on the moment-based formulas.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .kernels import oscillator_psi_table
from .states import StateSpec, fock_amplitudes

__all__ = ["TomographicQuadrature", "tomographic_average", "quadrature_for"]


class TomographicQuadrature:
    """Precomputed ``p(x, phi)`` on a product grid for one state.

    Parameters
    ----------
    spec : StateSpec
    x_step : float
        Spacing of the uniform ``x`` grid.
    x_max : float, optional
        Half-width of the ``x`` grid.  Defaults to a bound derived from the
        highest populated Fock level plus ``extra_degree`` (the polynomial
        degree of the integrands, which pushes mass outwards).
    max_phase : int
        Largest ``|q|`` of ``exp(i q phi)`` factors that will be averaged.
    """

    def __init__(self, spec: StateSpec, x_step=0.01, x_max=None, max_phase=64, extra_degree=64):
        self.spec = spec
        c = fock_amplitudes(spec).amplitudes
        nz = np.flatnonzero(np.abs(c) > 1e-300)
        top = int(nz[-1]) if len(nz) else 0
        if x_max is None:
            x_max = 0.5 * math.sqrt(2 * top + 1) + 6.0 + 0.5 * math.sqrt(extra_degree)
        self.x = np.arange(-x_max, x_max + x_step / 2, x_step)
        self.wx = np.full(self.x.size, x_step)
        self.wx[[0, -1]] *= 0.5

        omega = top + max_phase
        n_phi = int(math.ceil((omega * math.pi / 2 + 60) / 2))
        nodes, weights = np.polynomial.legendre.leggauss(n_phi)
        self.phi = 0.5 * math.pi * (nodes + 1.0)
        self.wphi = 0.5 * weights  # includes the 1/pi normalization

        psi = oscillator_psi_table(top, self.x)
        phases = np.exp(-1j * np.outer(self.phi, np.arange(top + 1)))
        amp = (phases * c[None, : top + 1]) @ psi
        self.pdf = np.abs(amp) ** 2  # (n_phi, n_x)
        self._harmonics = {}

    @property
    def mesh(self):
        return np.meshgrid(self.x, self.phi)

    def average(self, func):
        """Average of ``func(x, phi)``, called on ``(1, n_x)`` / ``(n_phi, 1)`` arrays."""
        vals = func(self.x[None, :], self.phi[:, None])
        vals = np.broadcast_to(vals, self.pdf.shape)
        return np.einsum("i,ij,ij,j->", self.wphi, self.pdf, vals, self.wx)

    def harmonic(self, q):
        """``P_q(x) = (1/pi) int dphi p(x, phi) exp(i q phi)`` on the grid."""
        out = self._harmonics.get(q)
        if out is None:
            out = (self.wphi * np.exp(1j * q * self.phi)) @ self.pdf
            self._harmonics[q] = out
        return out

    def average_separable(self, g, q):
        """Average of ``g(x) exp(i q phi)`` for ``g`` sampled on :attr:`x`."""
        return np.dot(self.harmonic(q), np.asarray(g) * self.wx)


@lru_cache(maxsize=16)
def quadrature_for(spec: StateSpec) -> TomographicQuadrature:
    return TomographicQuadrature(spec)


def tomographic_average(spec: StateSpec, func):
    """Exact tomographic average of ``func`` by 2-D quadrature."""
    return quadrature_for(spec).average(func)
