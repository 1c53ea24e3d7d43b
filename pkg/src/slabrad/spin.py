"""Emitter arrays, photon-mediated coupling matrices and collective decay.

For identical two-level emitters with dipole direction ``d`` the couplings are

    J_mn     = -3*pi*Gamma0 * Re[d.G(r_m, r_n).d] / k0,   J_nn = 0
    Gamma_mn =  6*pi*Gamma0 * Im[d.G(r_m, r_n).d] / k0

so a bulk emitter decays at ``Gamma_nn = n*Gamma0``.  The diagonal of J
(divergent Lamb shift) is absorbed into the transition frequency.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, QuadratureError, SlabradError
from .greens import LayerStack, _assemble, homogeneous_batch, slab_greens
from .modes import Polarization, SlabSpec, find_modes
from .quadrature import QuadratureConfig

# pair offsets closer than this (in units of the vacuum wavelength) share one
# Green's function evaluation
CACHE_QUANTUM = 1e-12


@dataclass(frozen=True)
class Homogeneous:
    index: float

    kind = "homogeneous"


@dataclass(frozen=True)
class Slab:
    stack: LayerStack

    kind = "slab"

    @property
    def index(self) -> float:
        return self.stack.core_index


@dataclass(frozen=True)
class EmitterArray:
    """Identical emitters sharing a transition wavelength and environment.

    ``dipole_orientation`` is a unit 3-vector shared by all emitters, or an
    ``(N, 3)`` array of per-emitter unit vectors.
    """

    positions: np.ndarray
    dipole_orientation: np.ndarray
    vacuum_wavelength: float
    environment: Homogeneous | Slab
    gamma0: float = 1.0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, float))
        if pos.shape[1] != 3:
            raise DomainError("positions must have shape (N, 3)")
        dip = np.asarray(self.dipole_orientation, float)
        if dip.ndim == 1:
            dip = np.broadcast_to(dip, pos.shape)
        if dip.shape != pos.shape:
            raise DomainError("dipole_orientation must be a 3-vector or (N, 3)")
        if not np.allclose(np.linalg.norm(dip, axis=1), 1.0, rtol=0, atol=1e-12):
            raise DomainError("dipole orientations must be unit vectors")
        if len(pos) > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=2) + np.eye(len(pos))
            if np.any(dist == 0.0):
                raise DomainError("emitter positions must be distinct")
        if isinstance(self.environment, Slab):
            st = self.environment.stack
            if not st.contains(pos[:, 2]):
                raise DomainError("all emitters must lie strictly inside the slab")
            if not np.isclose(st.vacuum_wavelength, self.vacuum_wavelength, rtol=1e-12):
                raise DomainError("stack and array wavelengths differ")
        if self.gamma0 <= 0:
            raise DomainError("gamma0 must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dipole_orientation", np.array(dip))

    @property
    def n_emitters(self) -> int:
        return self.positions.shape[0]

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.vacuum_wavelength

    @property
    def medium_wavelength(self) -> float:
        """``lambda = lambda0/n``, the length unit of ``d/lambda``."""
        return self.vacuum_wavelength / self.environment.index

    def with_positions(self, positions) -> "EmitterArray":
        dip = self.dipole_orientation
        if np.allclose(dip, dip[0]):
            dip = dip[0]
        return EmitterArray(positions, dip, self.vacuum_wavelength, self.environment, self.gamma0)


@dataclass(frozen=True)
class CouplingMatrices:
    J: np.ndarray
    Gamma: np.ndarray
    gamma_eps: float
    gamma0: float = 1.0

    @property
    def n_emitters(self) -> int:
        return self.Gamma.shape[0]


@dataclass(frozen=True)
class CollectiveSpectrum:
    """Eigen-decomposition of Gamma; ``eigenvectors[:, nu]`` weights jump operator ``nu``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def jump_weights(self, nu: int) -> np.ndarray:
        """Coefficients ``c_m`` of ``L_nu = sum_m c_m sigma_ge^(m)``."""
        return self.eigenvectors[:, nu]


def _pair_tensors(array: EmitterArray, quad: QuadratureConfig | None, table: bool = False):
    """Green's tensors for all unordered pairs (m <= n), with diagonal self terms."""
    pos = array.positions
    N = len(pos)
    iu, ju = np.triu_indices(N)
    sep = pos[iu] - pos[ju]
    env = array.environment
    if isinstance(env, Homogeneous):
        k = env.index * array.k0
        return iu, ju, homogeneous_batch(sep, k)

    stack = env.stack
    quad = quad or QuadratureConfig()
    g = homogeneous_batch(sep, stack.k2)
    rho = np.hypot(sep[:, 0], sep[:, 1])
    quantum = CACHE_QUANTUM * array.vacuum_wavelength
    zpairs = np.stack([pos[iu, 2], pos[ju, 2]], axis=1)
    for zkey in np.unique(np.round(zpairs / quantum), axis=0):
        sel = np.nonzero(np.all(np.round(zpairs / quantum) == zkey, axis=1))[0]
        z, zp = zpairs[sel[0]]
        ev = slab_greens(stack, float(z), float(zp), quad)
        rkey, first, inverse = np.unique(
            np.round(rho[sel] / quantum), return_index=True, return_inverse=True
        )
        try:
            radial = ev.radial(rho[sel][first], table=table)
        except SlabradError as exc:
            for local in first:
                try:
                    ev.radial(rho[sel][local : local + 1])
                except SlabradError as inner:
                    m = int(sel[local])
                    raise QuadratureError((int(iu[m]), int(ju[m])), inner) from inner
            raise QuadratureError((-1, -1), exc) from exc
        gs, gp = _assemble(radial[:, inverse.ravel()], sep[sel, 0], sep[sel, 1])
        g[sel] += gs + gp
    return iu, ju, g


def coupling_matrices(
    array: EmitterArray, quad: QuadratureConfig | None = None, table: bool = False
) -> CouplingMatrices:
    """Coherent (J) and dissipative (Gamma) coupling matrices of the array.

    Green's functions are evaluated once per unique pair geometry; in the slab
    all pairs at the same depth pair share one spectral kernel.  ``table``
    switches the slab integrals to spline lookup (for large ensembles).
    """
    iu, ju, g = _pair_tensors(array, quad, table)
    dip = array.dipole_orientation
    ge = np.einsum("pi,pij,pj->p", dip[iu], g, dip[ju]) / array.k0
    N = array.n_emitters
    gam = np.zeros((N, N))
    jmat = np.zeros((N, N))
    gam[iu, ju] = 6 * np.pi * array.gamma0 * ge.imag
    gam[ju, iu] = gam[iu, ju]
    off = iu != ju
    jmat[iu[off], ju[off]] = -3 * np.pi * array.gamma0 * ge.real[off]
    jmat[ju[off], iu[off]] = jmat[iu[off], ju[off]]
    return CouplingMatrices(J=jmat, Gamma=gam, gamma_eps=float(gam[0, 0]), gamma0=array.gamma0)


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return vecs


def collective_spectrum(c: CouplingMatrices) -> CollectiveSpectrum:
    """Collective decay rates (descending) and orthonormal jump-operator weights."""
    gam = np.asarray(c.Gamma, float)
    if not np.allclose(gam, gam.T, rtol=0, atol=1e-14 * max(np.abs(gam).max(), 1e-300)):
        raise DomainError("Gamma must be symmetric")
    w, v = np.linalg.eigh(0.5 * (gam + gam.T))
    order = np.argsort(w)[::-1]
    return CollectiveSpectrum(eigenvalues=w[order], eigenvectors=_sign_fix(v[:, order]))


def guided_wavenumber(array: EmitterArray) -> float:
    """Propagation constant of the photon exchanged in-plane [rad/m].

    Bulk: ``n*k0``.  Slab: the fundamental guided mode, TE0 for in-plane
    dipoles and TM0 for out-of-plane ones.
    """
    env = array.environment
    if isinstance(env, Homogeneous):
        return env.index * array.k0
    st = env.stack
    if not (st.n_below == st.n_above):
        raise DomainError("guided-mode phases need a symmetric slab")
    dip = array.dipole_orientation[0]
    pol = Polarization.TM if abs(dip[2]) > np.hypot(dip[0], dip[1]) else Polarization.TE
    spec = SlabSpec(st.core_index, st.width, st.vacuum_wavelength, st.n_below)
    return find_modes(spec, pol)[0].k_g
