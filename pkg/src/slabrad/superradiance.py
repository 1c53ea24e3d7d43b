"""Early-time superradiance criteria for fully inverted emitter arrays.

Starting from full inversion, the moment equations of the collective master
equation give ``d<s_ee^n>/dt = -Gamma_nn`` and ``d<s_eg^m s_ge^n>/dt =
Gamma_mn`` (m != n) at t = 0.  Differentiating the emission rates then gives

    total:        dgamma/dt(0)      = sum_{m!=n} Gamma_mn^2 - sum_n Gamma_nn^2
    directional:  dgamma/dt(0, phi) = Gamma0*[sum_{m!=n} cos(theta_nm)*Gamma_mn - sum_n Gamma_nn]

with ``theta_nm = k*((x_n - x_m)*cos(phi) + (y_n - y_m)*sin(phi))``.  A burst
(superradiance) occurs where the derivative is non-negative.
"""
from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SlabradError
from .geometry import LatticeKind, LatticeSpec, generate_lattice
from .quadrature import QuadratureConfig
from .spin import CouplingMatrices, EmitterArray, coupling_matrices, guided_wavenumber

log = logging.getLogger(__name__)


def gamma_dot_total(c: CouplingMatrices) -> float:
    """``sum_{m!=n} Gamma_mn^2 - sum_n Gamma_nn^2`` (rate^2)."""
    g = np.asarray(c.Gamma, float)
    sq = g * g
    diag = float(np.trace(sq))
    return float(sq.sum() - diag) - diag


@dataclass(frozen=True)
class DirectionalPhaseMatrix:
    theta: np.ndarray
    phi: float
    k_used: float


def phase_matrix(positions, k_used: float, phi: float) -> np.ndarray:
    pos = np.asarray(positions, float)
    proj = pos[:, 0] * math.cos(phi) + pos[:, 1] * math.sin(phi)
    return k_used * (proj[:, None] - proj[None, :])


def directional_phases(array: EmitterArray, phi: float, k_used: float | None = None) -> DirectionalPhaseMatrix:
    """Pairwise phases of a photon leaving in-plane along ``phi``.

    ``k_used`` defaults to ``n*k0`` in bulk and to the fundamental guided
    mode (TE0 for in-plane dipoles, TM0 for z dipoles) in a slab.
    """
    if not 0.0 <= phi < 2 * math.pi:
        raise DomainError("phi must lie in [0, 2*pi)")
    k = guided_wavenumber(array) if k_used is None else float(k_used)
    return DirectionalPhaseMatrix(phase_matrix(array.positions, k, phi), float(phi), k)


def gamma_dot_directional(c: CouplingMatrices, theta: DirectionalPhaseMatrix) -> float:
    """``Gamma0*[sum_{m!=n} cos(theta_nm)*Gamma_mn - sum_n Gamma_nn]`` (rate^2)."""
    g = np.asarray(c.Gamma, float)
    w = np.cos(theta.theta) * g
    diag = float(np.trace(g))
    return c.gamma0 * (float(w.sum() - np.trace(w)) - diag)


def gamma_dot_directional_curve(c: CouplingMatrices, positions, k_used: float, phis) -> np.ndarray:
    """Vectorised :func:`gamma_dot_directional` over an array of angles."""
    pos = np.asarray(positions, float)
    phis = np.atleast_1d(np.asarray(phis, float))
    g = np.asarray(c.Gamma, float)
    dx = pos[:, 0][:, None] - pos[:, 0][None, :]
    dy = pos[:, 1][:, None] - pos[:, 1][None, :]
    off = ~np.eye(len(pos), dtype=bool)
    dx, dy, gw = dx[off], dy[off], g[off]
    theta = k_used * (np.cos(phis)[:, None] * dx[None, :] + np.sin(phis)[:, None] * dy[None, :])
    return c.gamma0 * (np.cos(theta) @ gw - np.trace(g))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SuperradianceMap:
    """Values of a criterion on a rectangular grid (units Gamma0^2).

    ``axes`` maps axis names to 1D grids in the order of the value array's
    dimensions.  ``failures`` lists ``(grid index, message)`` for points that
    could not be evaluated; those hold NaN.
    """

    axes: dict[str, np.ndarray]
    values: np.ndarray
    quantity: str
    failures: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def mask(self) -> np.ndarray:
        return self.values >= 0

    def rows(self):
        """Flattened ``(axis values..., value, sign)`` tuples in C order."""
        names = list(self.axes)
        for idx in np.ndindex(self.values.shape):
            v = float(self.values[idx])
            sign = "" if math.isnan(v) else int(v >= 0)
            yield tuple(self.axes[n][i] for n, i in zip(names, idx)) + (v, sign)


def worker_count(workers: int | None = None) -> int:
    """Explicit count, else ``SLABRAD_THREADS`` (0 or unset = CPU count)."""
    if workers is None:
        raw = os.environ.get("SLABRAD_THREADS", "0")
        try:
            workers = int(raw)
        except ValueError:
            raise DomainError(f"SLABRAD_THREADS must be an integer, got {raw!r}") from None
    if workers < 0:
        raise DomainError("worker count must be non-negative")
    return workers or (os.cpu_count() or 1)


def ordered_map(fn, items: Sequence, workers: int | None = None) -> list:
    """``[fn(x) for x in items]`` on a thread pool; result order is input order."""
    n = worker_count(workers)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _nearest_distance(pos: np.ndarray) -> float:
    d = np.linalg.norm(pos[:, None, :2] - pos[None, :, :2], axis=2)
    d[np.diag_indices(len(pos))] = np.inf
    return float(d.min())


def _check_axis(name: str, grid) -> np.ndarray:
    g = np.atleast_1d(np.asarray(grid, float))
    if g.size == 0:
        raise DomainError(f"empty sweep axis {name!r}")
    if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
        raise DomainError(f"sweep axis {name!r} must be strictly monotone")
    return g


def chain_layout(n: int) -> np.ndarray:
    """Unit-spacing chain along x, the default layout for size sweeps."""
    return generate_lattice(LatticeSpec(LatticeKind.CHAIN, 1.0, sites=n))


def sweep_map(
    base: EmitterArray,
    d_over_lambda,
    phi=None,
    n_list=None,
    phi_fixed: float | None = None,
    layout: Callable[[int], np.ndarray] | None = None,
    quantity: str = "directional",
    quad: QuadratureConfig | None = None,
    workers: int | None = None,
) -> SuperradianceMap:
    """Superradiance criterion over spacing and angle, or spacing and size.

    The geometry of ``base`` fixes the shape; it is rescaled so that the
    nearest-neighbour distance equals ``d`` for every ``d/lambda`` (lambda
    the wavelength in the core material).  With ``n_list`` the array is
    rebuilt from ``layout(N)`` (unit spacing, default a chain along x) for
    each size.

    Axes of the result:
      * ``quantity="directional"`` with ``phi``: (d_over_lambda, phi)
      * ``quantity="directional"`` with ``n_list``: (n, d_over_lambda) at ``phi_fixed``
      * ``quantity="total"``: (d_over_lambda,) or (n, d_over_lambda)
    """
    if quantity not in ("directional", "total"):
        raise DomainError(f"unknown quantity {quantity!r}")
    d_grid = _check_axis("d_over_lambda", d_over_lambda)
    if np.any(d_grid <= 0):
        raise DomainError("d_over_lambda must be positive")
    if quantity == "directional":
        if n_list is None:
            if phi is None:
                raise DomainError("directional map over d needs a phi grid")
            phi_grid = _check_axis("phi", phi)
        else:
            if phi_fixed is None:
                raise DomainError("directional size sweep needs phi_fixed")
            phi_grid = np.array([float(phi_fixed)])
    else:
        phi_grid = None

    z0 = base.positions[:, 2].mean()
    if n_list is None:
        unit = base.positions.copy()
        unit[:, :2] = (unit[:, :2] - unit[:, :2].mean(axis=0)) / (
            _nearest_distance(unit) if base.n_emitters > 1 else 1.0
        )
        shapes = [(base.n_emitters, unit)]
    else:
        ns = [int(n) for n in _check_axis("n", n_list)]
        if min(ns) < 1:
            raise DomainError("array sizes must be >= 1")
        lay = layout or chain_layout
        shapes = []
        for n in ns:
            u = np.asarray(lay(n), float).copy()
            u[:, 2] = z0
            shapes.append((n, u))

    lam = base.medium_wavelength
    k_used = guided_wavenumber(base) if quantity == "directional" else 0.0
    tasks = [(i, j, n, u, d) for i, (n, u) in enumerate(shapes) for j, d in enumerate(d_grid)]

    def run(task):
        i, j, n, unit, d = task
        pos = unit.copy()
        pos[:, :2] *= d * lam
        try:
            c = coupling_matrices(base.with_positions(pos), quad)
            if quantity == "total":
                return np.array([gamma_dot_total(c) / c.gamma0**2]), None
            return gamma_dot_directional_curve(c, pos, k_used, phi_grid) / c.gamma0**2, None
        except SlabradError as exc:
            width = 1 if phi_grid is None else phi_grid.size
            return np.full(width, np.nan), f"{type(exc).__name__}: {exc}"

    results = ordered_map(run, tasks, workers)
    failures = []
    if n_list is None:
        if quantity == "total":
            values = np.array([r[0][0] for r in results])
            axes = {"d_over_lambda": d_grid}
        else:
            values = np.stack([r[0] for r in results])
            axes = {"d_over_lambda": d_grid, "phi": phi_grid}
        for (i, j, *_), (_, err) in zip(tasks, results):
            if err:
                failures.append(((j,), err))
    else:
        values = np.array([r[0][0] for r in results]).reshape(len(shapes), d_grid.size)
        axes = {"n": np.array([n for n, _ in shapes], float), "d_over_lambda": d_grid}
        for (i, j, *_), (_, err) in zip(tasks, results):
            if err:
                failures.append(((i, j), err))
    for idx, msg in failures:
        log.warning("grid point %s failed: %s", idx, msg)
    return SuperradianceMap(axes=axes, values=values, quantity=quantity, failures=failures)


# ---------------------------------------------------------------------------
# d_min scaling with a synthetic power-law kernel


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    d_min: float


def pair_distance_multiplicities(dimensionality: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct unit-spacing pair offsets and how many unordered pairs share each.

    A chain of ``n`` sites has ``n - k`` pairs at offset ``k``; an ``L x L``
    square lattice has ``(L - |i|)(L - |j|)`` ordered pairs at offset
    ``(i, j)``.  Summing over offsets instead of pairs makes lattices of
    ``10^5`` sites cheap.
    """
    if dimensionality == "1D":
        k = np.arange(1, n, dtype=float)
        return k, n - k
    if dimensionality == "2D":
        side = int(round(math.sqrt(n)))
        if side * side != n:
            raise DomainError(f"2D scaling needs a square site count, got {n}")
        i, j = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        i, j = i.ravel(), j.ravel()
        keep = (i + j) > 0
        i, j = i[keep], j[keep]
        # offsets (i, j) with i, j >= 0 stand for (+-i, +-j); count the sign
        # copies that are distinct, then halve for unordered pairs
        copies = np.where((i > 0) & (j > 0), 4.0, 2.0)
        weight = copies * (side - i) * (side - j) / 2.0
        return np.hypot(i, j).astype(float), weight
    raise DomainError(f"dimensionality must be '1D' or '2D', got {dimensionality!r}")


def dmin_scaling_check(
    alpha: float,
    dimensionality: str,
    n_list,
    gamma1: float = 1.0,
    k0: float = 1.0,
    bisection_steps: int = 200,
) -> list[ScalingPoint]:
    """Largest spacing with ``sum_{m!=n} Gamma_mn^2 >= N*Gamma1^2``.

    Uses ``Gamma_mn = Gamma1*(R_mn*k0)^(-alpha)`` on a chain (1D) or a
    square lattice (2D; N must be a perfect square).  The crossing is
    bracketed and bisected in ``log d``.  Sizes with no superradiant spacing
    record ``d_min = 0``.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if gamma1 <= 0 or k0 <= 0:
        raise DomainError("gamma1 and k0 must be positive")
    out = []
    for n in n_list:
        n = int(n)
        if n < 2:
            out.append(ScalingPoint(n, 0.0))
            continue
        r_unit, weight = pair_distance_multiplicities(dimensionality, n)

        def excess(log_d):
            g = gamma1 * (r_unit * math.exp(log_d) * k0) ** (-alpha)
            return 2.0 * math.fsum(weight * g * g) - n * gamma1**2

        lo, hi = math.log(1e-12 / k0), math.log(1e12 / k0)
        if excess(lo) < 0:
            out.append(ScalingPoint(n, 0.0))
            continue
        if excess(hi) >= 0:
            raise DomainError("superradiant at every spacing; kernel does not decay")
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            if excess(mid) >= 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        out.append(ScalingPoint(n, math.exp(lo)))
    return out


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def linear_fit(x, y) -> LinearFit:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def fit_scaling(points: Sequence[ScalingPoint], law: str) -> LinearFit:
    """Fit ``d_min`` against a candidate law.

    ``law`` is ``"log"`` (d vs ln N), ``"sqrt_log"`` (d vs sqrt(ln N)) or
    ``"power"`` (ln d vs ln N; the slope is the exponent).
    """
    n = np.array([p.n for p in points], float)
    d = np.array([p.d_min for p in points], float)
    if law == "log":
        return linear_fit(np.log(n), d)
    if law == "sqrt_log":
        return linear_fit(np.sqrt(np.log(n)), d)
    if law == "power":
        return linear_fit(np.log(n), np.log(d))
    raise DomainError(f"unknown scaling law {law!r}")
