"""Quadrature machinery for Sommerfeld-type integrals.

Everything here works in units where ``k0 = 1``: spectral variables are
``q = k_rho/k0`` and radial distances are ``k0*rho``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class QuadratureConfig:
    """Numerical settings for the reflected Green's function integrals.

    Attributes:
        detour_height: depth of the elliptical contour below the real
            ``k_rho`` axis, in units of ``k0``.
        k_max: end of the real-axis segment, in units of ``k0``.
        rel_tol: target accuracy, relative to the bulk self term ``n*k0/(6*pi)``.
        tail_terms: half-periods summed before the first tail extrapolation.
        nodes_per_panel: Gauss-Legendre order of every panel.
        detour_margin: the contour ends at ``(n + detour_margin)*k0``.
    """

    detour_height: float = 0.05
    k_max: float = 20.0
    rel_tol: float = 1e-8
    tail_terms: int = 8
    nodes_per_panel: int = 16
    detour_margin: float = 0.5
    max_tail_terms: int = 1024

    def __post_init__(self):
        if self.detour_height <= 0:
            raise DomainError("detour_height must be positive")
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")
        if self.tail_terms < 4:
            raise DomainError("tail_terms must be at least 4")
        if self.detour_margin <= 0:
            raise DomainError("detour_margin must be positive")

    def validate_for(self, n_max: float) -> None:
        if self.k_max <= n_max + self.detour_margin:
            raise DomainError(
                f"k_max={self.k_max} must exceed the contour end {n_max + self.detour_margin}"
            )


@lru_cache(maxsize=8)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(a: float, b: float, panel_length: float, order: int):
    """Composite Gauss-Legendre nodes/weights on ``[a, b]``."""
    npan = max(1, int(np.ceil((b - a) / panel_length)))
    edges = np.linspace(a, b, npan + 1)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def ellipse_contour(end: float, depth: float, panel_length: float, order: int):
    """Nodes on the lower half of the ellipse joining ``0`` and ``end``.

    The path is ``q(t) = end/2*(1 - cos t) - 1j*depth*sin t``, ``t in [0, pi]``,
    split into panels of (nearly) equal arc length.  Returns complex nodes
    and the complex weights ``w*dq/dt`` so that ``sum(f(q)*w)`` approximates
    the contour integral.
    """
    c = 0.5 * end

    def speed(t):
        return np.hypot(c * np.sin(t), depth * np.cos(t))

    fine = np.linspace(0.0, np.pi, 4097)
    sp = speed(fine)
    arclen = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(fine))])
    npan = max(4, int(np.ceil(arclen[-1] / panel_length)))
    edges = np.interp(np.linspace(0.0, arclen[-1], npan + 1), arclen, fine)

    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    q = c * (1.0 - np.cos(t)) - 1j * depth * np.sin(t)
    dq = c * np.sin(t) - 1j * depth * np.cos(t)
    return q, wt * dq


def wynn_epsilon(partial_sums: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wynn epsilon (iterated Shanks) acceleration of partial sums.

    ``partial_sums`` has the sequence along axis 0; any trailing axes are
    accelerated independently.  Returns ``(estimate, error)`` where the error
    is the difference between the two highest-order even-column estimates.
    """
    s = np.asarray(partial_sums)
    n = s.shape[0]
    eps_prev = np.zeros((n + 1,) + s.shape[1:], dtype=s.dtype)
    eps_curr = s.copy()
    estimates = [s[-1]]
    tiny = 1e-300
    for k in range(1, n):
        diff = eps_curr[1:] - eps_curr[:-1]
        safe = np.where(np.abs(diff) < tiny, tiny, diff)
        eps_next = eps_prev[1 : n - k + 1] + 1.0 / safe
        eps_prev, eps_curr = eps_curr, eps_next
        if k % 2 == 0:
            estimates.append(eps_curr[-1])
    if len(estimates) < 2:
        return s[-1], np.abs(s[-1] - s[-2]) if n > 1 else np.full_like(np.abs(s[-1]), np.inf)
    est = np.where(np.isfinite(estimates[-1]), estimates[-1], s[-1])
    prev = np.where(np.isfinite(estimates[-2]), estimates[-2], s[-1])
    return est, np.abs(est - prev)
