"""Stability certificates for relative equilibria of symmetric Hamiltonian
systems, with randomized trajectory experiments to corroborate them."""

from .dynamics import Trajectory, conservation_drift, integrate, integrate_batch
from .emc import (
    EmcCertificate,
    EmcProblem,
    EmcTolerances,
    certify,
    liapunov_eval,
    patrick_velocity,
    select_sigma,
)
from .errors import (
    BlowUpError,
    EmcStabError,
    OutOfNeighborhoodError,
    ParameterError,
    SigmaCapError,
    StructuralError,
    UnknownSystemError,
)
from .lie import AlgebraElement, DualElement, GroupElement, LieGroupSpec
from .phase import PhaseSpaceSystem, check_structure
from .releq import RelativeEquilibrium, find_relative_equilibrium, make_relative_equilibrium
from .systems import catalog, instantiate_system, known_equilibria
from .verify import StabilityExperimentReport, ls3_bound, orbit_distance, stability_experiment

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement",
    "BlowUpError",
    "DualElement",
    "EmcCertificate",
    "EmcProblem",
    "EmcStabError",
    "EmcTolerances",
    "GroupElement",
    "LieGroupSpec",
    "OutOfNeighborhoodError",
    "ParameterError",
    "PhaseSpaceSystem",
    "RelativeEquilibrium",
    "SigmaCapError",
    "StabilityExperimentReport",
    "StructuralError",
    "Trajectory",
    "UnknownSystemError",
    "catalog",
    "certify",
    "check_structure",
    "conservation_drift",
    "find_relative_equilibrium",
    "instantiate_system",
    "integrate",
    "integrate_batch",
    "known_equilibria",
    "liapunov_eval",
    "ls3_bound",
    "make_relative_equilibrium",
    "orbit_distance",
    "patrick_velocity",
    "select_sigma",
    "stability_experiment",
]
