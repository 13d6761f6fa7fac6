"""Stability experiments for polyhedral conductivity inclusions.

Modules: :mod:`geometry` (polyhedra, admissibility, distances),
:mod:`deformation` (collar fields and flows), :mod:`fem` (meshes and P1
solvers), :mod:`dtn` (local DtN maps and singular solutions),
:mod:`shape_calculus` (shape derivatives) and :mod:`harness` (experiments).
"""

from .errors import NumericalError, PolystabError, ValidationError
from .geometry import AprioriData, Polyhedron, build_polyhedron, cube_polyhedron
from .fem import DomainSpec, mesh_domain
from .dtn import BoundaryBasis, dtn_matrix, dtn_norm_diff

__version__ = "0.1.0"

__all__ = [
    "AprioriData",
    "BoundaryBasis",
    "DomainSpec",
    "NumericalError",
    "Polyhedron",
    "PolystabError",
    "ValidationError",
    "build_polyhedron",
    "cube_polyhedron",
    "dtn_matrix",
    "dtn_norm_diff",
    "mesh_domain",
]
