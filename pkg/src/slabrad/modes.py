"""Guided modes of a symmetric free-standing dielectric slab.

The TE and TM modes of a core of index ``n`` and width ``W`` between two
identical claddings satisfy

    kappa*W - 2*atan(eta*gamma/kappa) = m*pi,   m = 0, 1, 2, ...

with ``kappa = k0*sqrt(n^2 - n_eff^2)``, ``gamma = k0*sqrt(n_eff^2 - n_c^2)``,
``eta = 1`` for TE and ``eta = (n/n_c)^2`` for TM.  Even and odd modes
alternate in ``m``.  These are the real-axis poles of the round-trip
resummation factors used by :mod:`slabrad.greens`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ModeSolverError

SCAN_POINTS = 4096
BRACKET_MARGIN = 1e-9


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class SlabSpec:
    """Symmetric slab: core index, cladding index, width [m], vacuum wavelength [m]."""

    core_index: float
    width: float
    vacuum_wavelength: float
    cladding_index: float = 1.0

    def __post_init__(self):
        if not self.core_index > self.cladding_index >= 1.0:
            raise DomainError(
                f"need core_index > cladding_index >= 1, got "
                f"{self.core_index} and {self.cladding_index}"
            )
        if not (self.width > 0 and self.vacuum_wavelength > 0):
            raise DomainError("width and vacuum_wavelength must be positive")

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.vacuum_wavelength

    @property
    def v_number(self) -> float:
        """Total transverse phase ``k0*W*sqrt(n^2 - n_c^2)``."""
        return self.k0 * self.width * math.sqrt(self.core_index**2 - self.cladding_index**2)


@dataclass(frozen=True)
class GuidedMode:
    polarization: Polarization
    order: int
    n_eff: float
    k_g: float

    @property
    def guided_wavelength(self) -> float:
        return 2.0 * math.pi / self.k_g


def _phase(spec: SlabSpec, pol: Polarization, n_eff):
    n, nc = spec.core_index, spec.cladding_index
    kappa = spec.k0 * np.sqrt(n**2 - n_eff**2)
    gamma = spec.k0 * np.sqrt(n_eff**2 - nc**2)
    eta = 1.0 if pol is Polarization.TE else (n / nc) ** 2
    return kappa * spec.width - 2.0 * np.arctan2(eta * gamma, kappa)


def _residual_sign(spec: SlabSpec) -> float:
    # makes the residual non-negative in the cladding limit for every width
    return -1.0 if math.floor(spec.v_number / math.pi) % 2 else 1.0


def dispersion_residual(spec: SlabSpec, polarization, n_eff_trial):
    """Signed characteristic function of the slab; zero exactly at a guided mode.

    Returns ``s*sin(Phi)`` where ``Phi`` is the transverse round-trip phase
    defect (left-hand side of the module-level equation) and ``s = +-1`` is
    fixed per slab so that the residual tends to ``|sin V| >= 0`` as
    ``n_eff -> n_c`` from above.  Every guided mode is a simple zero, so the
    residual changes sign across each mode.  Accepts scalars or arrays.
    """
    pol = Polarization(polarization)
    x = np.asarray(n_eff_trial, dtype=float)
    if np.any(x <= spec.cladding_index) or np.any(x >= spec.core_index):
        raise DomainError(
            f"n_eff must lie in the open interval ({spec.cladding_index}, {spec.core_index})"
        )
    out = _residual_sign(spec) * np.sin(_phase(spec, pol, x))
    return float(out) if out.ndim == 0 else out


def _polish(f, a: float, b: float) -> float:
    root = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # secant polish; brentq already stops near machine precision so this
    # only ever shaves the last ulps
    x0, x1 = root, np.nextafter(root, b)
    f0, f1 = f(x0), f(x1)
    for _ in range(3):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not a < x2 < b:
            break
        f2 = f(x2)
        if abs(f2) >= abs(f1):
            break
        x0, f0, x1, f1 = x1, f1, x2, f2
    return x1 if abs(f1) < abs(f(root)) else root


def find_modes(spec: SlabSpec, polarization) -> list[GuidedMode]:
    """All guided modes of one polarization, sorted by descending ``n_eff``.

    Brackets are located on a uniform ``n_eff`` scan and refined to near
    machine precision.  Raises :class:`ModeSolverError` if no mode is found,
    since both TE0 and TM0 of a symmetric slab have no cutoff.
    """
    pol = Polarization(polarization)
    lo = spec.cladding_index + BRACKET_MARGIN
    hi = spec.core_index - BRACKET_MARGIN
    grid = np.linspace(lo, hi, SCAN_POINTS)
    vals = dispersion_residual(spec, pol, grid)
    f = lambda x: dispersion_residual(spec, pol, x)  # noqa: E731

    roots = []
    for i in np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]:
        a, b = grid[i], grid[i + 1]
        if vals[i] == 0.0:
            roots.append(a)
            continue
        if vals[i + 1] == 0.0:
            continue  # picked up as the left end of the next bracket
        roots.append(_polish(f, a, b))

    roots = sorted((r for r in roots if r - spec.cladding_index > BRACKET_MARGIN), reverse=True)
    if not roots:
        raise ModeSolverError(
            f"no {pol.value} mode resolved for W={spec.width:.3e} m; the fundamental "
            "mode lies closer to cutoff than the scan resolution"
        )
    return [
        GuidedMode(pol, order, float(r), float(r) * 2.0 * math.pi / spec.vacuum_wavelength)
        for order, r in enumerate(roots)
    ]


def fundamental_mode(spec: SlabSpec, polarization) -> GuidedMode:
    return find_modes(spec, polarization)[0]
