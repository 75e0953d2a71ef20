"""Desk-scale numerical laboratory for a nonlinear plate model.

Energy evaluation and minimization, rigidity decisions, Korn-type
constants, and numerical verification of the constructive identities and
counterexamples of the underlying theory, on structured quadrilateral
meshes with conforming H1/H2 elements.
"""

__version__ = "0.1.0"

from .bcs import BoundaryConditionSet, Constraints, apply_bcs
from .energy import (EnergyBreakdown, MaterialParams, ReducedLoads,
                     VolumetricLoads, energy_gradient, reduce_loads,
                     total_energy)
from .geometry import (DomainError, Mesh, MeshError, PlanarDomain,
                       build_mesh, rectangle, unit_square)
from .spaces import (DisplacementField, ScalarField, SpaceH1, SpaceH2,
                     interpolate_displacement)

__all__ = [
    "__version__",
    "BoundaryConditionSet", "Constraints", "apply_bcs",
    "EnergyBreakdown", "MaterialParams", "ReducedLoads", "VolumetricLoads",
    "energy_gradient", "reduce_loads", "total_energy",
    "DomainError", "Mesh", "MeshError", "PlanarDomain", "build_mesh",
    "rectangle", "unit_square",
    "DisplacementField", "ScalarField", "SpaceH1", "SpaceH2",
    "interpolate_displacement",
]
