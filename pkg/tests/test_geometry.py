import math

import numpy as np
import pytest

from slabrad.ensemble import _column_stats, disorder_average
from slabrad.errors import DomainError
from slabrad.geometry import (
    DisorderSpec,
    LatticeKind,
    LatticeSpec,
    apply_disorder,
    generate_lattice,
    site_displacements,
)
from slabrad.spin import EmitterArray, Homogeneous, coupling_matrices
from slabrad.superradiance import gamma_dot_directional_curve

from conftest import LAMBDA, LAMBDA0, N_CORE

BULK = Homogeneous(N_CORE)


def pair_distances(pos):
    d = np.linalg.norm(pos[:, None] - pos[None], axis=2)
    return d[np.triu_indices(len(pos), 1)]


def test_chain_of_two():
    pos = generate_lattice(LatticeSpec("chain", 2.0, sites=2))
    np.testing.assert_array_equal(pos, [[-1, 0, 0], [1, 0, 0]])


def test_square_distance_histogram():
    pos = generate_lattice(LatticeSpec("square", 1.0, sites=25))
    assert pos.shape == (25, 3)
    d = np.round(pair_distances(pos), 9)
    vals, counts = np.unique(d, return_counts=True)
    hist = dict(zip(vals, counts))
    assert hist[1.0] == 2 * 5 * 4
    assert hist[round(math.sqrt(2), 9)] == 2 * 4 * 4
    assert hist[2.0] == 2 * 5 * 3
    np.testing.assert_allclose(pos.mean(axis=0), 0, atol=1e-15)


def test_rectangular_square_lattice_indexing():
    pos = generate_lattice(LatticeSpec(LatticeKind.SQUARE, 1.0, rows=2, cols=3))
    np.testing.assert_array_equal(pos[:3, 1], -0.5)
    np.testing.assert_array_equal(pos[:3, 0], [-1, 0, 1])


def test_hexagonal_patch():
    pos = generate_lattice(LatticeSpec("hexagonal", 1.0, z=5.0))
    assert pos.shape == (24, 3)
    np.testing.assert_array_equal(pos[:, 2], 5.0)
    d = np.linalg.norm(pos[:, None] - pos[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() == pytest.approx(1.0, abs=1e-12)
    neighbours = np.sum(np.abs(d - 1.0) < 1e-9, axis=1)
    assert neighbours.max() == 6
    assert np.sum(neighbours == 6) == 3 + 4 + 3  # interior of the 5-6-5 middle rows
    np.testing.assert_allclose(pos[:, :2].mean(axis=0), 0, atol=1e-14)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="chain", spacing=1.0),
        dict(kind="chain", spacing=0.0, sites=3),
        dict(kind="square", spacing=1.0, sites=10),
        dict(kind="hexagonal", spacing=1.0, sites=19),
    ],
)
def test_lattice_validation(kwargs):
    with pytest.raises(DomainError):
        LatticeSpec(**kwargs)


def test_zero_disorder_is_identity():
    pos = generate_lattice(LatticeSpec("square", 2.0, sites=9))
    out = apply_disorder(pos, DisorderSpec(0.0, 10, 3), 4, 2.0)
    np.testing.assert_array_equal(out.positions, pos)
    assert out.redraws == 0


def test_displacement_statistics():
    spec = DisorderSpec(1.0, realizations=1, seed=11)
    draws = np.concatenate([site_displacements(spec, r, 100) for r in range(500)])
    assert draws.shape == (50000, 2)
    assert np.abs(draws.mean(axis=0)).max() < 4 / math.sqrt(50000)
    assert np.abs(draws.std(axis=0) - 1).max() < 0.02


def test_disorder_is_deterministic_and_xy_only():
    pos = generate_lattice(LatticeSpec("chain", 1.0, sites=6, z=0.3))
    spec = DisorderSpec(0.1, 20, seed=99)
    a = apply_disorder(pos, spec, 7, 1.0).positions
    b = apply_disorder(pos, spec, 7, 1.0).positions
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[:, 2], 0.3)
    assert not np.array_equal(a, apply_disorder(pos, spec, 8, 1.0).positions)
    assert not np.array_equal(a, apply_disorder(pos, DisorderSpec(0.1, 20, seed=100), 7, 1.0).positions)
    with pytest.raises(DomainError):
        apply_disorder(pos, spec, 20, 1.0)


def test_disorder_spec_validation():
    with pytest.raises(DomainError):
        DisorderSpec(-0.1)
    with pytest.raises(DomainError):
        DisorderSpec(0.1, realizations=0)
    with pytest.raises(DomainError):
        DisorderSpec(0.1, seed=2**64)


def test_column_stats_order_independent(rng):
    samples = rng.normal(size=(300, 4)) * 1e3 + rng.normal(size=(300, 4)) * 1e-9
    m1, s1 = _column_stats(samples)
    m2, s2 = _column_stats(samples[rng.permutation(300)])
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_allclose(s1, samples.std(axis=0, ddof=1) / math.sqrt(300), rtol=1e-12)


def test_ensemble_zero_sigma_equals_ordered_curve():
    lat = LatticeSpec("chain", 0.6 * LAMBDA, sites=5)
    phis = np.linspace(0, math.pi, 7)
    curve = disorder_average(lat, DisorderSpec(0.0, 50), phis, BULK, [0, 1, 0], LAMBDA0)
    arr = EmitterArray(generate_lattice(lat), [0, 1, 0], LAMBDA0, BULK)
    ref = gamma_dot_directional_curve(coupling_matrices(arr), arr.positions, N_CORE * arr.k0, phis)
    np.testing.assert_array_equal(curve.mean, ref)
    np.testing.assert_array_equal(curve.stderr, 0.0)
    assert curve.realizations_used == 50


def test_ensemble_reproducible_and_thread_independent():
    lat = LatticeSpec("square", 0.5 * LAMBDA, sites=9)
    spec = DisorderSpec(0.1, 40, seed=5)
    phis = np.linspace(0, math.pi, 5)
    a = disorder_average(lat, spec, phis, BULK, [0, 1, 0], LAMBDA0, workers=1)
    b = disorder_average(lat, spec, phis, BULK, [0, 1, 0], LAMBDA0, workers=4)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.stderr, b.stderr)
    assert a.realizations_used == 40 and not a.failures


def test_stderr_shrinks_as_inverse_sqrt():
    lat = LatticeSpec("chain", 0.5 * LAMBDA, sites=6)
    phis = np.array([0.0, 0.7, 1.5])
    errs = [
        disorder_average(lat, DisorderSpec(0.2, r, seed=3), phis, BULK, [0, 1, 0], LAMBDA0).stderr
        for r in (250, 1000)
    ]
    ratio = errs[0] / errs[1]
    np.testing.assert_allclose(ratio, 2.0, rtol=0.2)
