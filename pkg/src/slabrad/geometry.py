"""Planar emitter lattices and seeded positional disorder.

Positions are returned in units of the spacing ``d`` unless a spacing is
given; every lattice lies in a plane ``z = const`` with its centroid on the
z axis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

HEX_ROWS = (4, 5, 6, 5, 4)
# a displaced configuration with two sites closer than this (units of d) is redrawn
MIN_SEPARATION = 1e-6
MAX_REDRAWS = 1000


class LatticeKind(str, enum.Enum):
    CHAIN = "chain"
    SQUARE = "square"
    HEXAGONAL = "hexagonal"


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice shape plus spacing.

    ``sites`` is the site count for a chain; ``rows`` x ``cols`` for a square
    lattice (``cols`` defaults to ``rows``); the hexagon always has 24 sites.
    ``spacing`` is the nearest-neighbour distance in whatever length unit the
    caller uses; ``z`` is the common out-of-plane coordinate.
    """

    kind: LatticeKind
    spacing: float
    sites: int | None = None
    rows: int | None = None
    cols: int | None = None
    z: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        if not self.spacing > 0:
            raise DomainError("lattice spacing must be positive")
        if self.kind is LatticeKind.CHAIN:
            if self.sites is None or self.sites < 1:
                raise DomainError("a chain needs sites >= 1")
        elif self.kind is LatticeKind.SQUARE:
            if self.rows is None and self.sites is not None:
                side = int(round(np.sqrt(self.sites)))
                if side * side != self.sites:
                    raise DomainError(f"square lattice needs a square site count, got {self.sites}")
                object.__setattr__(self, "rows", side)
            if self.rows is None or self.rows < 1:
                raise DomainError("a square lattice needs rows >= 1")
            if self.cols is None:
                object.__setattr__(self, "cols", self.rows)
            if self.cols < 1:
                raise DomainError("a square lattice needs cols >= 1")
            object.__setattr__(self, "sites", self.rows * self.cols)
        else:
            if self.sites not in (None, sum(HEX_ROWS)):
                raise DomainError(f"the hexagonal lattice has {sum(HEX_ROWS)} sites, got {self.sites}")
            object.__setattr__(self, "sites", sum(HEX_ROWS))

    def with_spacing(self, spacing: float) -> "LatticeSpec":
        return LatticeSpec(self.kind, spacing, self.sites, self.rows, self.cols, self.z)


def _unit_sites(spec: LatticeSpec) -> np.ndarray:
    if spec.kind is LatticeKind.CHAIN:
        x = np.arange(spec.sites) - 0.5 * (spec.sites - 1)
        return np.column_stack([x, np.zeros_like(x)])
    if spec.kind is LatticeKind.SQUARE:
        iy, ix = np.divmod(np.arange(spec.sites), spec.cols)
        return np.column_stack([ix - 0.5 * (spec.cols - 1), iy - 0.5 * (spec.rows - 1)])
    rows = []
    mid = len(HEX_ROWS) // 2
    for r, count in enumerate(HEX_ROWS):
        x = np.arange(count) - 0.5 * (count - 1)
        y = np.full(count, (r - mid) * np.sqrt(3) / 2)
        rows.append(np.column_stack([x, y]))
    return np.vstack(rows)


def generate_lattice(spec: LatticeSpec) -> np.ndarray:
    """Site positions ``(N, 3)`` with nearest-neighbour distance ``spec.spacing``.

    Chains run along x, square lattices are axis aligned, and the hexagon is
    the 4-5-6-5-4 patch of a triangular lattice.  The in-plane centroid is
    at the origin.
    """
    xy = _unit_sites(spec) * spec.spacing
    xy = xy - xy.mean(axis=0)
    # exact symmetric construction leaves round-off of order eps*spacing
    xy[np.abs(xy) < 1e-14 * spec.spacing] = 0.0
    return np.column_stack([xy, np.full(len(xy), spec.z)])


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian XY displacement with standard deviation ``sigma`` (units of d)."""

    sigma: float
    realizations: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError("sigma must be non-negative")
        if self.realizations < 1:
            raise DomainError("realizations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class DisorderedPositions:
    positions: np.ndarray
    redraws: int


def site_displacements(spec: DisorderSpec, realization: int, n_sites: int, redraw: int = 0) -> np.ndarray:
    """Unit-variance XY draws ``(n_sites, 2)``; site ``i`` uses its own stream.

    Each stream is keyed by ``(seed, realization, site, redraw)`` so any
    realization is reproducible without generating the others.
    """
    out = np.empty((n_sites, 2))
    for i in range(n_sites):
        ss = np.random.SeedSequence([spec.seed, realization, i, redraw])
        out[i] = np.random.default_rng(ss).standard_normal(2)
    return out


def apply_disorder(positions, spec: DisorderSpec, realization: int, spacing: float) -> DisorderedPositions:
    """Displace every site in x and y by ``N(0, (sigma*spacing)^2)``.

    z is left untouched.  Configurations with two sites closer than
    ``1e-6*spacing`` are redrawn; the number of redraws is reported.
    """
    pos = np.asarray(positions, float)
    if not 0 <= realization < spec.realizations:
        raise DomainError(f"realization index {realization} outside [0, {spec.realizations})")
    if spec.sigma == 0.0:
        return DisorderedPositions(pos.copy(), 0)
    for redraw in range(MAX_REDRAWS):
        out = pos.copy()
        out[:, :2] += spec.sigma * spacing * site_displacements(spec, realization, len(pos), redraw)
        diff = out[:, None, :] - out[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= MIN_SEPARATION * spacing:
            return DisorderedPositions(out, redraw)
    raise DomainError(f"realization {realization}: no admissible configuration in {MAX_REDRAWS} draws")
