"""Mixed RT0, two-point and Petrov-Galerkin finite volume solvers for the 2D Poisson problem."""

__version__ = "0.1.0"

from .errors import PGFVError
from .fv_solver import assemble_fv, solve_pgfv
from .mesh import Mesh, build_structured_mesh, edge_vicinity, read_mesh, shape_regularity, write_mesh
from .mixed_fem import DiscreteSolution, recover_flux_from_means, solve_mixed, solve_two_point_fv
from .pg_stencil import build_all_stencils, build_constraints, reconstruct_flux, solve_weights
from .verify import affine_exactness_suite, convergence_study, error_norms, manufactured

__all__ = [
    "DiscreteSolution",
    "Mesh",
    "PGFVError",
    "affine_exactness_suite",
    "assemble_fv",
    "build_all_stencils",
    "build_constraints",
    "build_structured_mesh",
    "convergence_study",
    "edge_vicinity",
    "error_norms",
    "manufactured",
    "read_mesh",
    "reconstruct_flux",
    "recover_flux_from_means",
    "shape_regularity",
    "solve_mixed",
    "solve_pgfv",
    "solve_two_point_fv",
    "solve_weights",
    "write_mesh",
]
