"""Dyadic Green's functions in a homogeneous dielectric and inside a slab.

Conventions: time dependence ``exp(-i*omega*t)``, outgoing ``exp(+ikR)``,
``(curl curl - k^2) G = delta*I``, so that ``Im G(r, r) = k/(6*pi) * I`` in
bulk.  The slab occupies ``z1 < z < z2`` with index ``n`` between claddings
``n_below`` (``z < z1``) and ``n_above`` (``z > z2``).

The reflected parts are written in the plane-wave basis ``s = z x k_rho_hat``
and ``p(k) = s x k_hat`` with p-wave amplitudes measured along ``p(k)``.  In
this basis a p-wave reflects with ``(eps_out*kz_in - eps_in*kz_out) /
(eps_out*kz_in + eps_in*kz_out)`` at either interface.  The azimuthal
integral is done analytically, which leaves seven Bessel-kernel integrals
over ``k_rho`` (orders 0, 1, 2).  Those run along an ellipse below the real
axis, which passes below the guided-mode poles and the branch points, then
along the real axis up to ``k_max``.  The remainder is summed by half-periods
and extrapolated with the Wynn epsilon algorithm.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import constants, special
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, DomainError, PoleProximityError
from .modes import Polarization
from .quadrature import QuadratureConfig, composite_nodes, ellipse_contour, wynn_epsilon

POLE_GUARD = 1e-12

# radial component order used throughout: s-part (A, B), p-part (A, B, C, D, E)
N_RADIAL = 7


@dataclass(frozen=True)
class LayerStack:
    """Three-layer stack: lower cladding | core slab | upper cladding.

    The slab spans ``[-width/2, width/2]`` in z unless ``z1`` is given.
    """

    core_index: float
    width: float
    vacuum_wavelength: float
    n_below: float = 1.0
    n_above: float = 1.0
    z1: float | None = None

    def __post_init__(self):
        if self.width <= 0 or self.vacuum_wavelength <= 0:
            raise DomainError("width and vacuum_wavelength must be positive")
        if min(self.core_index, self.n_below, self.n_above) < 1.0:
            raise DomainError("refractive indices must be >= 1")
        if self.z1 is None:
            object.__setattr__(self, "z1", -0.5 * self.width)

    @classmethod
    def symmetric(cls, core_index, width, vacuum_wavelength, cladding_index=1.0):
        return cls(core_index, width, vacuum_wavelength, cladding_index, cladding_index)

    @property
    def z2(self) -> float:
        return self.z1 + self.width

    @property
    def mid_plane(self) -> float:
        return self.z1 + 0.5 * self.width

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.vacuum_wavelength

    @property
    def omega(self) -> float:
        return self.k0 * constants.c

    @property
    def k2(self) -> float:
        """Wavenumber in the core."""
        return self.core_index * self.k0

    @property
    def n_max(self) -> float:
        return max(self.core_index, self.n_below, self.n_above)

    def interface_distances(self, z: float) -> tuple[float, float]:
        """``(l1, l2) = (z - z1, z2 - z)`` for a point inside the slab."""
        return z - self.z1, self.z2 - z

    def contains(self, z) -> bool:
        z = np.asarray(z)
        return bool(np.all((z > self.z1) & (z < self.z2)))


@dataclass(frozen=True)
class GreensTensor:
    value: np.ndarray
    homogeneous: np.ndarray
    reflected_s: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    reflected_p: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    r: np.ndarray | None = None
    rp: np.ndarray | None = None

    def project(self, d1, d2=None) -> complex:
        d1 = np.asarray(d1, float)
        d2 = d1 if d2 is None else np.asarray(d2, float)
        return complex(d1 @ self.value @ d2)


def kz(n, q):
    """Normal wavenumber ``sqrt(n^2 - q^2)`` on the branch ``Im >= 0``."""
    out = np.sqrt(np.asarray(n * n - q * q, dtype=complex))
    return np.where(out.imag < 0, -out, out)


# ---------------------------------------------------------------------------
# spectral building blocks (k0 = 1 units)


def _fresnel(n_in, n_out, kz_in, kz_out):
    rs = (kz_in - kz_out) / (kz_in + kz_out)
    e_in, e_out = n_in * n_in, n_out * n_out
    rp = (e_out * kz_in - e_in * kz_out) / (e_out * kz_in + e_in * kz_out)
    return rs, rp


def _fresnel_all(stack: LayerStack, q):
    n = stack.core_index
    k2z = kz(n, q)
    rs1, rp1 = _fresnel(n, stack.n_below, k2z, kz(stack.n_below, q))
    rs2, rp2 = _fresnel(n, stack.n_above, k2z, kz(stack.n_above, q))
    return k2z, rs1, rs2, rp1, rp2


def fresnel_coefficients(stack: LayerStack, k_rho):
    """Fresnel amplitude reflection coefficients seen from inside the slab.

    Args:
        stack: layer geometry.
        k_rho: in-plane wavenumber [rad/m]; real or complex, scalar or array.

    Returns:
        ``(rs1, rs2, rp1, rp2)`` at the lower (1) and upper (2) interfaces.
    """
    q = np.asarray(k_rho, dtype=complex) / stack.k0
    _, rs1, rs2, rp1, rp2 = _fresnel_all(stack, q)
    out = (rs1, rs2, rp1, rp2)
    if q.ndim == 0:
        return tuple(complex(x) for x in out)
    return out


def resummation_denominator(stack: LayerStack, k_rho, polarization):
    """``1 - exp(2i kz2 W) r1 r2``; vanishes at guided-mode poles."""
    pol = Polarization(polarization)
    q = np.asarray(k_rho, dtype=complex) / stack.k0
    k2z, rs1, rs2, rp1, rp2 = _fresnel_all(stack, q)
    r1, r2 = (rs1, rs2) if pol is Polarization.TE else (rp1, rp2)
    den = 1.0 - np.exp(2j * k2z * stack.k0 * stack.width) * r1 * r2
    return complex(den) if den.ndim == 0 else den


def resummation_factor(stack: LayerStack, k_rho, polarization):
    """Geometric sum of slab round trips, ``1/(1 - exp(2i kz2 W) r1 r2)``.

    ``polarization`` is ``"TE"`` (s) or ``"TM"`` (p).  Raises
    :class:`PoleProximityError` when the denominator magnitude drops below
    1e-12, i.e. when ``k_rho`` sits on a guided-mode pole.
    """
    den = resummation_denominator(stack, k_rho, polarization)
    if np.any(np.abs(den) < POLE_GUARD):
        raise PoleProximityError(f"|1 - r1 r2 exp(2i kz W)| < {POLE_GUARD} at k_rho={k_rho}")
    return 1.0 / den


def _reflected_kernels(stack: LayerStack, z: float, zp: float, q):
    """Spectral factors of the reflected fields in k0 = 1 units.

    Returns ``(k2z, Rs, Prr, Prz, Pzr, Pzz)``.  Each ``C[sigma, tau]`` is the
    amplitude of a wave leaving the source in direction ``tau`` and arriving
    at the observer travelling in direction ``sigma`` (+ = towards +z).
    """
    k0 = stack.k0
    a, b = (z - stack.z1) * k0, (stack.z2 - z) * k0
    l1s, l2s = (zp - stack.z1) * k0, (stack.z2 - zp) * k0
    lw = stack.width * k0
    k2z, rs1, rs2, rp1, rp2 = _fresnel_all(stack, q)
    e_pm = np.exp(1j * k2z * (a + l1s))
    e_pp = np.exp(1j * k2z * (a + lw + l2s))
    e_mp = np.exp(1j * k2z * (b + l2s))
    e_mm = np.exp(1j * k2z * (b + lw + l1s))
    round_trip = np.exp(2j * k2z * lw)

    gs = 1.0 / (1.0 - round_trip * rs1 * rs2)
    rs = gs * (rs1 * e_pm + rs1 * rs2 * (e_pp + e_mm) + rs2 * e_mp)

    gp = 1.0 / (1.0 - round_trip * rp1 * rp2)
    c_pm = gp * rp1 * e_pm
    c_pp = gp * rp1 * rp2 * e_pp
    c_mp = gp * rp2 * e_mp
    c_mm = gp * rp1 * rp2 * e_mm
    prr = -c_pm + c_pp - c_mp + c_mm
    prz = c_pm + c_pp - c_mp - c_mm
    pzr = -c_pm + c_pp + c_mp - c_mm
    pzz = c_pm + c_pp + c_mp + c_mm
    return k2z, rs, prr, prz, pzr, pzz


def _direct_kernels(n: float, dz: float, q):
    """Plane-wave factors of the bulk field for ``dz = k0*(z - z')``."""
    k2z = kz(n, q)
    e = np.exp(1j * k2z * abs(dz))
    sgn = 1.0 if dz >= 0 else -1.0
    return k2z, e, e, sgn * e, sgn * e, e


def _integrand_weights(n: float, q, kernels):
    """Stack the seven radial integrand prefactors (everything except Bessels).

    Row order: (As, Bs, Ap, Bp, C, D, E) paired with Bessel orders
    (0, 2, 0, 2, 1, 1, 0).
    """
    k2z, rs, prr, prz, pzr, pzz = kernels
    kk = n * n
    f = np.empty((N_RADIAL,) + np.shape(q), dtype=complex)
    f[0] = 1j / (8 * np.pi) * q / k2z * rs
    f[1] = f[0]
    f[2] = 1j / (8 * np.pi) * q * k2z / kk * prr
    f[3] = -f[2]
    f[4] = 1.0 / (4 * np.pi) * q * q / kk * prz
    f[5] = 1.0 / (4 * np.pi) * q * q / kk * pzr
    f[6] = 1j / (4 * np.pi) * q**3 / (k2z * kk) * pzz
    return f


_BESSEL_ORDER = np.array([0, 2, 0, 2, 1, 1, 0])


def _bessels(x):
    """J0, J1, J2 of (possibly complex) ``x``."""
    if np.iscomplexobj(x):
        j0 = special.jv(0, x)
        j1 = special.jv(1, x)
    else:
        j0 = special.j0(x)
        j1 = special.j1(x)
    small = np.abs(x) < 0.5
    safe = np.where(small, 1.0, x)
    j2 = np.where(small, special.jv(2, np.where(small, x, 0.0)), 2.0 * j1 / safe - j0)
    return j0, j1, j2


def _apply_bessels(f, x):
    """``f[c] * J_{order(c)}(x)`` with ``f`` of shape (7, M) and ``x`` (P, M)."""
    j0, j1, j2 = _bessels(x)
    js = (j0, j1, j2)
    return [f[c][None, :] * js[_BESSEL_ORDER[c]] for c in range(N_RADIAL)]


class _SpectralIntegrator:
    """Evaluates the seven radial integrals for a batch of ``k0*rho`` values."""

    chunk = 128

    def __init__(self, n_medium: float, n_max: float, kernel_fn, quad: QuadratureConfig):
        quad.validate_for(n_max)
        self.n = n_medium
        self.kernel_fn = kernel_fn
        self.quad = quad
        self.n_max = n_max
        self.scale = n_medium / (6 * np.pi)
        self._node_cache = {}

    def _nodes(self, rho_max: float):
        quad = self.quad
        # bucket by powers of two so nearby batches share nodes
        key = 0 if rho_max <= 1.0 else int(np.ceil(np.log2(rho_max)))
        if key in self._node_cache:
            return self._node_cache[key]
        rho_ref = 2.0**key if key > 0 else 1.0
        end = self.n_max + quad.detour_margin
        h = quad.detour_height
        lc = min(h, 8.0 / rho_ref, 0.25)
        qc, wc = ellipse_contour(end, h, lc, quad.nodes_per_panel)
        lr = min(0.5, 8.0 / rho_ref)
        qr, wr = composite_nodes(end, quad.k_max, lr, quad.nodes_per_panel)
        fc = _integrand_weights(self.n, qc, self.kernel_fn(qc)) * wc
        fr = _integrand_weights(self.n, qr + 0j, self.kernel_fn(qr + 0j)) * wr
        entry = (qc, fc, qr, fr)
        self._node_cache[key] = entry
        return entry

    def _tail(self, rho: np.ndarray) -> np.ndarray:
        """Integral over ``[k_max, inf)`` per rho, by half-periods + Wynn."""
        quad = self.quad
        x, w = composite_nodes(0.0, 1.0, 1.0, quad.nodes_per_panel)
        step = np.where(rho > 0, np.pi / np.maximum(rho, 1e-300), 1.0)
        out = np.zeros((N_RADIAL, rho.size), complex)
        nterms = quad.tail_terms
        done = 0
        partial = np.zeros((0, N_RADIAL, rho.size), complex)
        while True:
            j = np.arange(done, nterms)
            # q grid: (P, terms, nodes)
            qg = quad.k_max + (j[None, :, None] + x[None, None, :]) * step[:, None, None]
            wg = (w[None, None, :] * step[:, None, None]) * np.ones_like(qg)
            qf = qg.reshape(-1) + 0j
            f = _integrand_weights(self.n, qf, self.kernel_fn(qf)) * wg.reshape(-1)
            rr = np.repeat(rho, qg.shape[1] * qg.shape[2])
            j0, j1, j2 = _bessels((qf.real * rr))
            js = (j0, j1, j2)
            vals = np.stack([f[c] * js[_BESSEL_ORDER[c]] for c in range(N_RADIAL)])
            vals = vals.reshape(N_RADIAL, rho.size, len(j), len(x)).sum(axis=3)
            last = partial[-1] if partial.shape[0] else np.zeros((N_RADIAL, rho.size), complex)
            new = last[:, :, None] + np.cumsum(vals, axis=2)
            partial = np.concatenate([partial, np.moveaxis(new, 2, 0)], axis=0)
            done = nterms

            raw_step = np.abs(partial[-1] - partial[-2]).max(axis=0)
            est, err = wynn_epsilon(partial)
            err = err.max(axis=0)
            converged_raw = raw_step <= 1e-3 * quad.rel_tol * self.scale
            out = np.where(converged_raw[None, :], partial[-1], est)
            resid = np.where(converged_raw, raw_step, err)
            if np.all(resid <= quad.rel_tol * self.scale):
                return out
            if nterms >= quad.max_tail_terms:
                worst = float(resid.max() / self.scale)
                raise ConvergenceError("Sommerfeld tail extrapolation did not converge", worst)
            nterms = min(2 * nterms, quad.max_tail_terms)

    def radial(self, rho) -> np.ndarray:
        """Seven radial integrals, shape (7, len(rho)), k0 = 1 units."""
        rho = np.atleast_1d(np.asarray(rho, float))
        out = np.empty((N_RADIAL, rho.size), complex)
        order = np.argsort(rho, kind="stable")
        for start in range(0, rho.size, self.chunk):
            idx = order[start : start + self.chunk]
            r = rho[idx]
            qc, fc, qr, fr = self._nodes(float(r.max()))
            acc = np.zeros((N_RADIAL, r.size), complex)
            for q, f in ((qc, fc), (qr, fr)):
                terms = _apply_bessels(f, r[:, None] * q[None, :])
                acc += np.stack([t.sum(axis=1) for t in terms])
            acc += self._tail(r)
            out[:, idx] = acc
        return out


# ---------------------------------------------------------------------------
# tensor assembly


def _assemble(radial: np.ndarray, dx, dy) -> tuple[np.ndarray, np.ndarray]:
    """Build (s, p) tensors, shape (P, 3, 3), from radial comps and in-plane offsets."""
    dx = np.atleast_1d(np.asarray(dx, float))
    dy = np.atleast_1d(np.asarray(dy, float))
    psi = np.arctan2(dy, dx)
    c, s = np.cos(psi), np.sin(psi)
    c2, s2 = np.cos(2 * psi), np.sin(2 * psi)
    a_s, b_s, a_p, b_p, cc, dd, ee = radial
    gs = np.zeros((dx.size, 3, 3), complex)
    gp = np.zeros((dx.size, 3, 3), complex)
    gs[:, 0, 0] = a_s + b_s * c2
    gs[:, 1, 1] = a_s - b_s * c2
    gs[:, 0, 1] = gs[:, 1, 0] = b_s * s2
    gp[:, 0, 0] = a_p + b_p * c2
    gp[:, 1, 1] = a_p - b_p * c2
    gp[:, 0, 1] = gp[:, 1, 0] = b_p * s2
    gp[:, 0, 2] = cc * c
    gp[:, 1, 2] = cc * s
    gp[:, 2, 0] = dd * c
    gp[:, 2, 1] = dd * s
    gp[:, 2, 2] = ee
    return gs, gp


def _homogeneous_closed(sep: np.ndarray, k: float) -> np.ndarray:
    """Closed-form bulk dyadic for separations ``sep`` (P, 3), all nonzero."""
    R = np.linalg.norm(sep, axis=1)
    x = k * R
    rr = sep[:, :, None] * sep[:, None, :] / (R * R)[:, None, None]
    pref = np.exp(1j * x) / (4 * np.pi * R)
    a = 1.0 + (1j * x - 1.0) / x**2
    b = (3.0 - 3j * x - x * x) / x**2
    eye = np.eye(3)[None]
    g = pref[:, None, None] * (a[:, None, None] * eye + b[:, None, None] * rr)
    # stable imaginary part from spherical Bessels: avoids cancellation at small kR
    j0 = special.spherical_jn(0, x)
    j1x = np.where(x < 1e-3, 1.0 / 3.0 - x * x / 30.0 + x**4 / 840.0, special.spherical_jn(1, x) / np.where(x < 1e-3, 1.0, x))
    im = (k / (4 * np.pi)) * ((j0 - j1x)[:, None, None] * (eye - rr) + (2 * j1x)[:, None, None] * rr)
    return g.real + 1j * im


def green_homogeneous(r, rp, omega: float, n: float, imag_only: bool = False) -> GreensTensor:
    """Bulk dyadic Green's function of a medium with index ``n``.

    Near-field (R^-3, R^-2) and far-field (R^-1) terms in closed form,
    normalised so that ``Im[d.G(r,r).d] = n*k0/(6*pi)``.  At coincidence only
    the imaginary part exists; asking for the full tensor there raises
    :class:`DomainError`.
    """
    r = np.asarray(r, float)
    rp = np.asarray(rp, float)
    k = n * omega / constants.c
    sep = r - rp
    if not np.any(sep):
        if not imag_only:
            raise DomainError("homogeneous Green's function is divergent at coincidence")
        g = 1j * k / (6 * np.pi) * np.eye(3)
    else:
        g = _homogeneous_closed(sep[None, :], k)[0]
        if imag_only:
            g = 1j * g.imag
    return GreensTensor(value=g, homogeneous=g.copy(), r=r, rp=rp)


def homogeneous_batch(sep: np.ndarray, k: float, self_term_imag: bool = True) -> np.ndarray:
    """Bulk tensors for many separations; zero separation gives ``1j*k/(6*pi)*I``."""
    sep = np.atleast_2d(np.asarray(sep, float))
    out = np.empty((sep.shape[0], 3, 3), complex)
    zero = ~np.any(sep, axis=1)
    if np.any(~zero):
        out[~zero] = _homogeneous_closed(sep[~zero], k)
    if np.any(zero):
        if not self_term_imag:
            raise DomainError("homogeneous Green's function is divergent at coincidence")
        out[zero] = 1j * k / (6 * np.pi) * np.eye(3)
    return out


def green_homogeneous_spectral(r, rp, stack: LayerStack, quad: QuadratureConfig | None = None) -> GreensTensor:
    """Bulk dyadic of the core medium evaluated through the plane-wave integral.

    Uses the same contour and tail machinery as :func:`green_slab`, with the
    direct (unreflected) plane-wave factors.  Requires ``z != z'``.
    """
    quad = quad or QuadratureConfig()
    r = np.asarray(r, float)
    rp = np.asarray(rp, float)
    k0 = stack.k0
    dz = (r[2] - rp[2]) * k0
    if dz == 0:
        raise DomainError("spectral bulk integral needs z != z' for convergence")
    n = stack.core_index
    integ = _SpectralIntegrator(n, n, lambda q: _direct_kernels(n, dz, q), quad)
    rho = np.hypot(r[0] - rp[0], r[1] - rp[1]) * k0
    rad = integ.radial([rho])
    gs, gp = _assemble(rad, [r[0] - rp[0]], [r[1] - rp[1]])
    g = (gs[0] + gp[0]) * k0
    return GreensTensor(value=g, homogeneous=g.copy(), r=r, rp=rp)


class SlabGreens:
    """Reflected Green's function evaluator for one stack and emitter depth pair.

    Holds the spectral kernel on its quadrature nodes so that many in-plane
    separations at the same ``(z, z')`` cost only Bessel evaluations.  An
    optional cubic-spline table over ``rho`` (``radial(..., table=True)``) serves
    large disordered ensembles where every pair distance is distinct.
    """

    # table spacing in units of 1/k0; spline error ~ (n*k0*h)^4/384
    table_spacing = 0.01

    def __init__(self, stack: LayerStack, z: float, zp: float, quad: QuadratureConfig | None = None):
        if not (stack.contains(z) and stack.contains(zp)):
            raise DomainError(
                f"emitter depths {z}, {zp} must lie strictly inside ({stack.z1}, {stack.z2})"
            )
        self.stack = stack
        self.z, self.zp = float(z), float(zp)
        self.quad = quad or QuadratureConfig()
        self._integ = _SpectralIntegrator(
            stack.core_index,
            stack.n_max,
            lambda q: _reflected_kernels(stack, self.z, self.zp, q),
            self.quad,
        )
        self._tables = {}
        self._lock = threading.Lock()

    def _spline(self, rho_max_k0: float) -> CubicSpline:
        # extents are bucketed by powers of two so a lookup depends only on
        # its own request, never on which tables were built earlier
        key = max(6, int(np.ceil(np.log2(rho_max_k0 * 1.05 + 10 * self.table_spacing))))
        with self._lock:
            spline = self._tables.get(key)
            if spline is None:
                grid = np.arange(0.0, 2.0**key + 0.5 * self.table_spacing, self.table_spacing)
                spline = CubicSpline(grid, self._integ.radial(grid), axis=1)
                self._tables[key] = spline
        return spline

    def radial(self, rho, table: bool = False) -> np.ndarray:
        """Seven radial integrals for in-plane distances ``rho`` [m], units 1/m.

        With ``table=True`` values come from a cubic spline over a fixed grid
        (relative error ~1e-8), which pays off once many distinct distances
        are needed at the same depth pair.
        """
        rho = np.atleast_1d(np.asarray(rho, float))
        if np.any(rho < 0):
            raise DomainError("in-plane separation must be non-negative")
        k0 = self.stack.k0
        if table and rho.size:
            return self._spline(float(rho.max()) * k0)(rho * k0) * k0
        return self._integ.radial(rho * k0) * k0

    def reflected(self, dx, dy, table: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Reflected (s, p) tensors for in-plane offsets ``r - r'`` [m]."""
        dx = np.atleast_1d(np.asarray(dx, float))
        dy = np.atleast_1d(np.asarray(dy, float))
        return _assemble(self.radial(np.hypot(dx, dy), table=table), dx, dy)


@lru_cache(maxsize=64)
def slab_greens(stack: LayerStack, z: float, zp: float, quad: QuadratureConfig | None = None) -> SlabGreens:
    """Shared :class:`SlabGreens` per ``(stack, z, z', quad)``; reuses node caches."""
    return SlabGreens(stack, z, zp, quad)


def green_slab(r, rp, stack: LayerStack, quad: QuadratureConfig | None = None,
               self_term: bool = False) -> GreensTensor:
    """Full dyadic Green's function for two points inside the slab.

    ``G = G0 + G_ref^s + G_ref^p`` with ``G0`` in closed form.  At
    coincidence the real part of ``G0`` diverges; pass ``self_term=True`` to
    get ``Im G0 = k/(6*pi)`` there (the reflected parts stay complete).
    """
    r = np.asarray(r, float)
    rp = np.asarray(rp, float)
    ev = slab_greens(stack, float(r[2]), float(rp[2]), quad)
    gs, gp = ev.reflected([r[0] - rp[0]], [r[1] - rp[1]])
    if np.any(r != rp):
        g0 = _homogeneous_closed((r - rp)[None, :], stack.k2)[0]
    elif self_term:
        g0 = 1j * stack.k2 / (6 * np.pi) * np.eye(3)
    else:
        raise DomainError("slab Green's function is divergent at coincidence; use self_term=True")
    return GreensTensor(
        value=g0 + gs[0] + gp[0], homogeneous=g0, reflected_s=gs[0], reflected_p=gp[0], r=r, rp=rp
    )


def pair_radiated_power(d, orientation, environment: str, stack: LayerStack,
                        quad: QuadratureConfig | None = None, z: float | None = None):
    """Total power of two in-phase identical dipoles, normalised to ``2*P1``.

    ``P/(2 P1) = 1 + Im[d.G(r1, r2).d] / Im[d.G(r1, r1).d]`` with the pair
    separated by ``d`` [m] along x.  ``environment`` is ``"homogeneous"``
    (bulk core material) or ``"slab"``.  Accepts scalar or array ``d``.
    """
    dvec = np.asarray(orientation, float)
    dvec = dvec / np.linalg.norm(dvec)
    d_arr = np.atleast_1d(np.asarray(d, float))
    if np.any(d_arr < 0):
        raise DomainError("separation must be non-negative")
    z = stack.mid_plane if z is None else z
    if environment == "homogeneous":
        sep = np.zeros((d_arr.size, 3))
        sep[:, 0] = d_arr
        g = homogeneous_batch(sep, stack.k2)
        cross = np.einsum("i,pij,j->p", dvec, g, dvec).imag
        self_im = stack.k2 / (6 * np.pi)
    elif environment == "slab":
        ev = slab_greens(stack, float(z), float(z), quad)
        gs, gp = ev.reflected(np.concatenate([[0.0], d_arr]), np.zeros(d_arr.size + 1))
        sep = np.zeros((d_arr.size + 1, 3))
        sep[1:, 0] = d_arr
        g = homogeneous_batch(sep, stack.k2) + gs + gp
        proj = np.einsum("i,pij,j->p", dvec, g, dvec).imag
        self_im, cross = proj[0], proj[1:]
    else:
        raise DomainError(f"unknown environment {environment!r}")
    out = 1.0 + cross / self_im
    return float(out[0]) if np.ndim(d) == 0 else out
