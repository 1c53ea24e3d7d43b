"""Exact small-N propagation of the collective master equation.

    drho/dt = -i[H, rho] + sum_mn Gamma_mn/2 (2 s_m rho s_n^+ - {s_n^+ s_m, rho})
    H       = sum_{m!=n} J_mn s_m^+ s_n

with ``s_n`` the lowering operator of emitter ``n``.  The density matrix is
stored densely in the product basis with emitter 0 as the most significant
qubit and ``|e> = 1``; N is capped at 6.  Used to check the closed-form
early-time derivatives of :mod:`slabrad.superradiance` by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import DOP853

from .errors import DomainError, IntegrationError
from .spin import CouplingMatrices

MAX_EMITTERS = 6
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-9


@lru_cache(maxsize=8)
def lowering_operators(n: int) -> tuple[np.ndarray, ...]:
    """``s_0 .. s_{n-1}`` as dense real ``2^n x 2^n`` matrices."""
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for k in range(n):
        op = np.ones((1, 1))
        for j in range(n):
            op = np.kron(op, sigma if j == k else np.eye(2))
        op.setflags(write=False)
        ops.append(op)
    return tuple(ops)


def _check_n(n: int) -> None:
    if n < 1:
        raise DomainError("need at least one emitter")
    if n > MAX_EMITTERS:
        raise DomainError(
            f"dense master equation limited to N <= {MAX_EMITTERS} emitters, got N = {n}"
        )


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray
    n_emitters: int

    def __post_init__(self):
        _check_n(self.n_emitters)
        dim = 2**self.n_emitters
        rho = np.asarray(self.rho, complex)
        if rho.shape != (dim, dim):
            raise DomainError(f"rho must be {dim}x{dim} for N = {self.n_emitters}")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise DomainError(f"trace(rho) = {np.trace(rho):.12g}, expected 1")
        if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
            raise DomainError("rho is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -POSITIVITY_TOL:
            raise DomainError("rho has a negative eigenvalue")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def fully_inverted(cls, n: int) -> "DensityState":
        _check_n(n)
        rho = np.zeros((2**n, 2**n), complex)
        rho[-1, -1] = 1.0
        return cls(rho, n)

    @classmethod
    def ground(cls, n: int) -> "DensityState":
        _check_n(n)
        rho = np.zeros((2**n, 2**n), complex)
        rho[0, 0] = 1.0
        return cls(rho, n)

    def excited_populations(self) -> np.ndarray:
        """``<s_n^+ s_n>`` for every emitter."""
        ops = lowering_operators(self.n_emitters)
        return np.array([np.real(np.trace(self.rho @ s.T @ s)) for s in ops])


class Generator:
    """Right-hand side of the master equation acting on dense ``rho``."""

    def __init__(self, c: CouplingMatrices):
        J = np.asarray(c.J, float)
        G = np.asarray(c.Gamma, float)
        n = G.shape[0]
        _check_n(n)
        self.n = n
        self.dim = 2**n
        ops = lowering_operators(n)
        S = np.stack(ops)
        # sum_mn A_mn s_m^+ s_n for the Hamiltonian and anticommutator parts
        Jz = J - np.diag(np.diag(J))
        hopping = np.einsum("mn,mji,njk->ik", Jz, S, S)
        decay = np.einsum("mn,mji,njk->ik", G, S, S)
        self.h_eff = hopping - 0.5j * decay
        self.h_eff_dag = self.h_eff.conj().T
        # jump part through the eigenbasis of Gamma: N products instead of N^2
        w, v = np.linalg.eigh(0.5 * (G + G.T))
        self.rates = w
        self.jumps = np.einsum("mv,mij->vij", v, S)
        self.jumps_dag = np.transpose(self.jumps, (0, 2, 1)).copy()

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h_eff @ rho - rho @ self.h_eff_dag)
        for g, L, Ld in zip(self.rates, self.jumps, self.jumps_dag):
            if g != 0.0:
                out += g * (L @ rho @ Ld)
        return 0.5 * (out + out.conj().T)


def build_generator(c: CouplingMatrices) -> Generator:
    """Superoperator applier for couplings ``c`` (N <= 6)."""
    return Generator(c)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, dim, dim)
    n_emitters: int

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> DensityState:
        return DensityState(self.states[i], self.n_emitters)


def _hermitize(y: np.ndarray, dim: int) -> None:
    m = y.reshape(dim, dim)
    m[:] = 0.5 * (m + m.conj().T)


def propagate(
    state: DensityState,
    generator: Generator,
    times,
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> Trajectory:
    """Integrate from ``times[0]`` and sample at every entry of ``times``.

    Explicit adaptive 8th-order Runge-Kutta (Dormand-Prince) run segment by
    segment so that every sample is hit exactly; the state is re-symmetrized
    after each accepted step.  ``times`` must be non-decreasing.
    """
    t = np.asarray(times, float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("times must be a non-empty 1D grid")
    if np.any(np.diff(t) < 0):
        raise DomainError("times must be non-decreasing")
    if state.n_emitters != generator.n:
        raise DomainError("state and generator sizes differ")
    dim = generator.dim

    def rhs(_t, y):
        return generator(y.reshape(dim, dim)).ravel()

    y = state.rho.ravel().copy()
    out = np.empty((t.size, dim, dim), complex)
    out[0] = y.reshape(dim, dim)
    for i in range(1, t.size):
        if t[i] > t[i - 1]:
            solver = DOP853(rhs, t[i - 1], y, t[i], rtol=rtol, atol=atol)
            while solver.status == "running":
                msg = solver.step()
                if solver.status == "failed":
                    raise IntegrationError(f"integration failed: {msg}", float(solver.t))
                _hermitize(solver.y, dim)
            y = solver.y.copy()
        out[i] = y.reshape(dim, dim)
    return Trajectory(t.copy(), out, state.n_emitters)


def correlations(states: np.ndarray, n: int) -> np.ndarray:
    """``C[t, m, n] = <s_m^+ s_n>`` for a stack of density matrices."""
    S = np.stack(lowering_operators(n))
    # Tr(rho s_m^+ s_n) = sum_ij rho_ij (s_m^+ s_n)_ji
    pair = np.einsum("mki,nkj->mnij", S, S)
    return np.einsum("tij,mnji->tmn", states, pair)


def emission_rate_trace(traj: Trajectory, c: CouplingMatrices, theta=None) -> np.ndarray:
    """Emission rate at every sample.

    Total: ``sum_mn Gamma_mn <s_m^+ s_n>``.  With a phase matrix ``theta``
    (an array or anything with a ``.theta`` attribute) the directional rate
    ``Gamma0 * Re sum_mn exp(i theta_nm) <s_m^+ s_n>``.
    """
    C = correlations(traj.states, traj.n_emitters)
    if theta is None:
        return np.real(np.einsum("mn,tmn->t", np.asarray(c.Gamma, float), C))
    th = np.asarray(getattr(theta, "theta", theta), float)
    weights = np.exp(1j * th.T)
    return c.gamma0 * np.real(np.einsum("mn,tmn->t", weights, C))


# one-sided 4-point first-derivative stencil on (0, h, 2h, 3h)
_STENCIL = np.array([-11.0, 18.0, -9.0, 2.0]) / 6.0


def rate_derivative_fd(c: CouplingMatrices, theta=None, h: float | None = None) -> float:
    """Finite-difference ``dgamma/dt`` at t = 0 from full inversion.

    One-sided 4-point stencil at steps ``h`` and ``h/2`` combined by
    Richardson extrapolation (``O(h^3)`` error cancelled).  Default
    ``h = 1e-4/Gamma_eps``.
    """
    n = c.n_emitters
    gen = build_generator(c)
    h = 1e-4 / abs(c.gamma_eps) if h is None else float(h)
    times = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0]) * h
    traj = propagate(DensityState.fully_inverted(n), gen, times, rtol=1e-13, atol=1e-16)
    g = emission_rate_trace(traj, c, theta)
    coarse = _STENCIL @ g[[0, 2, 4, 5]] / h
    fine = _STENCIL @ g[[0, 1, 2, 3]] / (0.5 * h)
    return float((8.0 * fine - coarse) / 7.0)


# ---------------------------------------------------------------------------
# closed form vs finite difference


@dataclass(frozen=True)
class OracleRow:
    quantity: str
    phi: float | None
    closed_form: float
    finite_difference: float
    rel_error: float


def relative_error(closed: float, fd: float, floor: float) -> float:
    """``|fd - closed| / max(|closed|, floor)``; the floor guards marginal points."""
    return abs(fd - closed) / max(abs(closed), floor)


def compare_closed_form(array, c: CouplingMatrices, phis=()) -> list[OracleRow]:
    """Closed-form early-time derivatives against oracle finite differences.

    Relative errors are taken against ``max(|value|, 1e-3*scale)`` with
    ``scale = N*Gamma_eps^2`` (total) or ``N*Gamma0*Gamma_eps`` (directional),
    the size of either sum, so that a closed form that happens to sit near
    zero does not turn round-off into a failure.
    """
    from .superradiance import directional_phases, gamma_dot_directional, gamma_dot_total

    n = c.n_emitters
    rows = []
    cf = gamma_dot_total(c)
    fd = rate_derivative_fd(c)
    rows.append(OracleRow("total", None, cf, fd, relative_error(cf, fd, 1e-3 * n * c.gamma_eps**2)))
    for phi in phis:
        th = directional_phases(array, float(phi))
        cf = gamma_dot_directional(c, th)
        fd = rate_derivative_fd(c, th)
        floor = 1e-3 * n * c.gamma0 * c.gamma_eps
        rows.append(OracleRow("directional", float(phi), cf, fd, relative_error(cf, fd, floor)))
    return rows


@dataclass(frozen=True)
class OracleCase:
    n: int
    environment: str
    orientation: str
    spacing_over_lambda: float
    positions: np.ndarray
    phis: np.ndarray


def random_case(seed: int, index: int, n: int | None = None, phi_points: int = 8,
                vacuum_wavelength: float = 980e-9, index_n: float = 3.5) -> OracleCase:
    """Reproducible random geometry for oracle comparisons.

    Environment and orientation cycle through (homogeneous, slab) x (y, z)
    with the case index; emitters form a random in-plane walk whose first
    step is ``d`` in [0.1, 3] lambda and later steps vary within 30 %.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    if n is None:
        n = int(rng.choice([2, 3, 4]))
    _check_n(n)
    env = ("homogeneous", "slab")[index % 2]
    orient = ("y", "z")[(index // 2) % 2]
    lam = vacuum_wavelength / index_n
    d = rng.uniform(0.1, 3.0)
    pos = np.zeros((n, 3))
    for k in range(1, n):
        step = d * lam * (1.0 + 0.3 * rng.uniform(-1.0, 1.0))
        ang = rng.uniform(0.0, 2 * np.pi)
        pos[k, :2] = pos[k - 1, :2] + step * np.array([np.cos(ang), np.sin(ang)])
    pos[:, :2] -= pos[:, :2].mean(axis=0)
    phis = np.sort(rng.uniform(0.0, 2 * np.pi, phi_points))
    return OracleCase(n, env, orient, float(d), pos, phis)
