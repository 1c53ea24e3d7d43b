import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.linalg import expm

from slabrad.errors import DomainError
from slabrad.oracle import (
    DensityState,
    build_generator,
    compare_closed_form,
    correlations,
    emission_rate_trace,
    lowering_operators,
    propagate,
    random_case,
    rate_derivative_fd,
)
from slabrad.spin import CouplingMatrices, EmitterArray, Homogeneous, coupling_matrices
from slabrad.superradiance import directional_phases, gamma_dot_directional, gamma_dot_total

from conftest import LAMBDA, LAMBDA0, N_CORE


def couplings(J, G, gamma0=1.0):
    J = np.asarray(J, float)
    G = np.asarray(G, float)
    return CouplingMatrices(J, G, float(G[0, 0]), gamma0)


def random_couplings(rng, n):
    a = rng.normal(size=(n, n))
    G = a @ a.T / n
    J = rng.normal(size=(n, n))
    J = 0.5 * (J + J.T)
    np.fill_diagonal(J, 0.0)
    return couplings(J, G)


def random_density(rng, n):
    dim = 2**n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def liouvillian(c):
    """Row-major vectorised master equation, written term by term."""
    n = c.n_emitters
    S = lowering_operators(n)
    dim = 2**n
    eye = np.eye(dim)
    H = sum((c.J[m, k] * S[m].T @ S[k] for m in range(n) for k in range(n) if m != k), np.zeros((dim, dim)))
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for m in range(n):
        for k in range(n):
            g = c.Gamma[m, k]
            if g == 0:
                continue
            A, B = S[m], S[k].T
            BA = B @ A
            L += 0.5 * g * (2 * np.kron(A, B.T) - np.kron(BA, eye) - np.kron(eye, BA.T))
    return L


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generator_matches_term_by_term_liouvillian(n, rng):
    c = random_couplings(rng, n)
    gen = build_generator(c)
    L = liouvillian(c)
    for _ in range(3):
        rho = random_density(rng, n)
        np.testing.assert_allclose(gen(rho).ravel(), L @ rho.ravel(), atol=1e-12)


def test_generator_preserves_trace_and_hermiticity(rng):
    for _ in range(50):
        n = 3
        c = random_couplings(rng, n)
        out = build_generator(c)(random_density(rng, n))
        assert abs(np.trace(out)) < 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-14)


def test_propagation_matches_matrix_exponential(rng):
    c = random_couplings(rng, 3)
    rho0 = DensityState.fully_inverted(3)
    times = np.linspace(0, 2.0, 5)
    traj = propagate(rho0, build_generator(c), times)
    L = liouvillian(c)
    for t, rho in zip(times, traj.states):
        ref = (expm(L * t) @ rho0.rho.ravel()).reshape(8, 8)
        np.testing.assert_allclose(rho, ref, atol=1e-9)


def test_decoupled_emitters_decay_independently():
    rates = np.array([1.0, 0.4, 2.5])
    c = couplings(np.zeros((3, 3)), np.diag(rates))
    times = np.linspace(0, 3, 7)
    traj = propagate(DensityState.fully_inverted(3), build_generator(c), times)
    for i, t in enumerate(times):
        np.testing.assert_allclose(traj.state(i).excited_populations(), np.exp(-rates * t), atol=1e-9)
        # product state: the full density matrix factorises
        prod = np.ones((1, 1))
        for p in np.exp(-rates * t):
            prod = np.kron(prod, np.diag([1 - p, p]))
        np.testing.assert_allclose(traj.states[i], prod, atol=1e-9)


def test_single_emitter_decay():
    c = couplings([[0.0]], [[1.7]])
    times = np.linspace(0, 4, 9)
    traj = propagate(DensityState.fully_inverted(1), build_generator(c), times)
    np.testing.assert_allclose(traj.states[:, 1, 1].real, np.exp(-1.7 * times), atol=1e-8)


def test_dicke_pair_cascade():
    c = couplings(np.zeros((2, 2)), np.ones((2, 2)))
    times = np.linspace(0, 3, 13)
    traj = propagate(DensityState.fully_inverted(2), build_generator(c), times)
    p_ee = traj.states[:, 3, 3].real
    sym = np.array([0, 1, 1, 0]) / math.sqrt(2)
    p_s = np.einsum("i,tij,j->t", sym, traj.states, sym).real
    np.testing.assert_allclose(p_ee, np.exp(-2 * times), atol=1e-6)
    np.testing.assert_allclose(p_s, 2 * times * np.exp(-2 * times), atol=1e-6)


def test_zero_generator_is_identity(rng):
    c = couplings(np.zeros((2, 2)), np.zeros((2, 2)))
    rho = DensityState(random_density(rng, 2), 2)
    traj = propagate(rho, build_generator(c), [0, 1, 5])
    for s in traj.states:
        np.testing.assert_allclose(s, rho.rho, atol=1e-15)


def test_trajectory_stays_physical(rng):
    c = random_couplings(rng, 4)
    traj = propagate(DensityState.fully_inverted(4), build_generator(c), np.linspace(0, 3, 11))
    for i in range(len(traj)):
        s = traj.state(i)
        assert abs(np.trace(s.rho) - 1) < 1e-10
        assert np.linalg.eigvalsh(s.rho).min() > -1e-9


def test_excitation_loss_equals_emission_rate(rng):
    n = 3
    c = random_couplings(rng, n)
    gen = build_generator(c)
    S = lowering_operators(n)
    number = sum(s.T @ s for s in S)
    for _ in range(5):
        rho = random_density(rng, n)
        c_mn = correlations(rho[None], n)[0]
        rate = np.real(np.sum(c.Gamma * c_mn))
        assert np.real(np.trace(number @ gen(rho))) == pytest.approx(-rate, abs=1e-12)


def test_initial_rates():
    arr = EmitterArray(
        np.array([[0, 0, 0], [0.4 * LAMBDA, 0, 0], [0.1 * LAMBDA, 0.5 * LAMBDA, 0]]),
        [0, 1, 0], LAMBDA0, Homogeneous(N_CORE),
    )
    c = coupling_matrices(arr)
    inverted = propagate(DensityState.fully_inverted(3), build_generator(c), [0.0])
    ground = propagate(DensityState.ground(3), build_generator(c), [0.0, 1.0])
    assert emission_rate_trace(inverted, c)[0] == pytest.approx(3 * c.gamma_eps, rel=1e-14)
    assert np.all(emission_rate_trace(ground, c) == 0)
    th = directional_phases(arr, 0.3)
    assert emission_rate_trace(inverted, c, th)[0] == pytest.approx(3 * c.gamma0, rel=1e-14)


def test_finite_difference_matches_closed_form_n3():
    arr = EmitterArray(
        np.array([[0, 0, 0], [0.3 * LAMBDA, 0, 0], [0.15 * LAMBDA, 0.25 * LAMBDA, 0]]),
        [0, 1, 0], LAMBDA0, Homogeneous(N_CORE),
    )
    c = coupling_matrices(arr)
    assert rate_derivative_fd(c) == pytest.approx(gamma_dot_total(c), rel=1e-6)
    for phi in (0.0, 1.1, 4.0):
        th = directional_phases(arr, phi)
        assert rate_derivative_fd(c, th) == pytest.approx(gamma_dot_directional(c, th), rel=1e-6)


def test_compare_rows_and_random_cases():
    case = random_case(7, 0, n=3, phi_points=3)
    assert case.n == 3 and case.environment == "homogeneous" and case.orientation == "y"
    assert np.all(np.diff(case.phis) >= 0)
    again = random_case(7, 0, n=3, phi_points=3)
    np.testing.assert_array_equal(case.positions, again.positions)
    arr = EmitterArray(case.positions, [0, 1, 0], LAMBDA0, Homogeneous(N_CORE))
    rows = compare_closed_form(arr, coupling_matrices(arr), case.phis)
    assert [r.quantity for r in rows] == ["total"] + ["directional"] * 3
    assert max(r.rel_error for r in rows) < 1e-6
    assert random_case(7, 3).environment == "slab" and random_case(7, 3).orientation == "z"


def test_size_cap():
    with pytest.raises(DomainError, match="N <= 6"):
        build_generator(couplings(np.zeros((7, 7)), np.eye(7)))
    with pytest.raises(DomainError):
        DensityState.fully_inverted(7)


def test_density_state_validation():
    with pytest.raises(DomainError):
        DensityState(np.eye(4), 2)
    with pytest.raises(DomainError):
        DensityState(np.diag([1.0, 0, 0]), 2)
    with pytest.raises(DomainError):
        propagate(DensityState.ground(1), build_generator(couplings([[0.0]], [[1.0]])), [1.0, 0.0])


@pytest.mark.parametrize("orientation", [[0, 1, 0], [0, 0, 1]])
def test_emission_rates_along_trajectory(orientation):
    pos = np.array([[0, 0, 0], [0.35 * LAMBDA, 0.1 * LAMBDA, 0], [0.7 * LAMBDA, -0.2 * LAMBDA, 0]])
    arr = EmitterArray(pos, orientation, LAMBDA0, Homogeneous(N_CORE))
    c = coupling_matrices(arr)
    times = np.linspace(0, 10 / c.gamma_eps, 801)
    traj = propagate(DensityState.fully_inverted(3), build_generator(c), times)
    total = emission_rate_trace(traj, c)
    assert total.min() >= -1e-9 * 3 * c.gamma_eps
    for phi in (0.0, 1.0, 2.5):
        directional = emission_rate_trace(traj, c, directional_phases(arr, phi))
        assert trapezoid(directional, times) >= -1e-6
