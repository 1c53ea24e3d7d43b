"""Disorder-averaged directional superradiance curves."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SlabradError
from .geometry import DisorderSpec, LatticeSpec, apply_disorder, generate_lattice
from .quadrature import QuadratureConfig
from .spin import EmitterArray, Homogeneous, Slab, coupling_matrices, guided_wavenumber
from .superradiance import gamma_dot_directional_curve, ordered_map

log = logging.getLogger(__name__)


@dataclass
class DisorderCurve:
    """Mean and standard error of ``dgamma/dt(0, phi)`` (units Gamma0^2)."""

    phi: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    realizations_used: int
    sigma: float
    failures: list[tuple[int, str]] = field(default_factory=list)
    redraws: int = 0


def _column_stats(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and standard error, independent of row order.

    ``math.fsum`` is correctly rounded, so shuffling the realizations cannot
    change a single bit of the result.
    """
    r = samples.shape[0]
    mean = np.array([math.fsum(col) / r for col in samples.T])
    if r < 2:
        return mean, np.full_like(mean, np.nan)
    var = np.array([math.fsum((col - m) ** 2) / (r - 1) for col, m in zip(samples.T, mean)])
    return mean, np.sqrt(var / r)


def disorder_average(
    lattice: LatticeSpec,
    disorder: DisorderSpec,
    phi,
    environment: Homogeneous | Slab,
    dipole,
    vacuum_wavelength: float,
    gamma0: float = 1.0,
    quad: QuadratureConfig | None = None,
    workers: int | None = None,
) -> DisorderCurve:
    """Average the directional criterion over seeded XY position disorder.

    ``lattice.spacing`` is in meters.  For ``sigma = 0`` the ordered lattice
    is evaluated once and returned with zero standard error.  Realizations
    whose Green's functions fail are dropped and listed in ``failures``.
    Slab integrals use the spline table when ``sigma > 0``.
    """
    phis = np.atleast_1d(np.asarray(phi, float))
    base_pos = generate_lattice(lattice)
    base = EmitterArray(base_pos, dipole, vacuum_wavelength, environment, gamma0)
    k_used = guided_wavenumber(base)

    def curve(array: EmitterArray, table: bool) -> np.ndarray:
        c = coupling_matrices(array, quad, table=table)
        return gamma_dot_directional_curve(c, array.positions, k_used, phis) / gamma0**2

    if disorder.sigma == 0.0:
        vals = curve(base, table=False)
        return DisorderCurve(phis, vals, np.zeros_like(vals), disorder.realizations, 0.0)

    def run(idx):
        moved = apply_disorder(base_pos, disorder, idx, lattice.spacing)
        try:
            return curve(base.with_positions(moved.positions), table=True), moved.redraws, None
        except SlabradError as exc:
            return None, moved.redraws, f"{type(exc).__name__}: {exc}"

    results = ordered_map(run, range(disorder.realizations), workers)
    good = [r[0] for r in results if r[0] is not None]
    failures = [(i, r[2]) for i, r in enumerate(results) if r[0] is None]
    for i, msg in failures:
        log.warning("realization %d excluded: %s", i, msg)
    redraws = sum(r[1] for r in results)
    if good:
        mean, stderr = _column_stats(np.stack(good))
    else:
        mean = stderr = np.full(phis.size, np.nan)
    return DisorderCurve(phis, mean, stderr, len(good), disorder.sigma, failures, redraws)
