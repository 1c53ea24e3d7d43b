"""Photon-mediated interactions and Dicke superradiance of emitters in a dielectric slab."""
from .errors import (
    ConvergenceError,
    DomainError,
    IntegrationError,
    ModeSolverError,
    PoleProximityError,
    QuadratureError,
    SlabradError,
)
from .greens import LayerStack, green_homogeneous, green_slab, pair_radiated_power
from .modes import GuidedMode, Polarization, SlabSpec, dispersion_residual, find_modes
from .quadrature import QuadratureConfig
from .spin import (
    CouplingMatrices,
    EmitterArray,
    Homogeneous,
    Slab,
    collective_spectrum,
    coupling_matrices,
)

__version__ = "0.1.0"
