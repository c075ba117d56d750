"""Taylor-Hood surface finite elements for the surface Stokes problem."""

from .assembly import (SaddleSystem, StokesData, assemble_norm_matrices,
                       assemble_system, gauss_lobatto_1d, triangle_quadrature)
from .geometry import SurfaceOracle, TubePoint, surface_from_config
from .manufactured import (ExactSolution, build_exact_solution,
                           manufactured_data, surface_operators)
from .meshing import (BaseMesh, HighOrderMesh, build_high_order_mesh,
                      build_icosphere_base, element_map_eval, mesh_statistics,
                      read_off, write_off)
from .postprocess import (ConvergenceRecord, eoc, error_norms, rates,
                          write_outputs)
from .quadrature import QuadratureRule
from .solver import SaddleSolution, estimate_infsup, solve_saddle
from .spaces import (DofHandler, NodeSet, assign_master_elements,
                     build_dof_handler, enumerate_nodes, evaluate_pressure,
                     evaluate_velocity, interpolate_velocity,
                     velocity_coupling)
from .transforms import (GammaPiolaAtPoint, PiolaAtPoint, edge_transfer_factor,
                         gamma_piola_forward, gamma_piola_inverse, mu_h,
                         node_transfer_matrix, reference_piola)

__version__ = "0.1.0"

__all__ = [
    "SurfaceOracle", "TubePoint", "surface_from_config",
    "BaseMesh", "HighOrderMesh", "build_icosphere_base",
    "build_high_order_mesh", "element_map_eval", "mesh_statistics",
    "read_off", "write_off",
    "PiolaAtPoint", "GammaPiolaAtPoint", "reference_piola", "mu_h",
    "gamma_piola_forward", "gamma_piola_inverse", "node_transfer_matrix",
    "edge_transfer_factor",
    "NodeSet", "DofHandler", "enumerate_nodes", "assign_master_elements",
    "build_dof_handler", "velocity_coupling", "evaluate_velocity",
    "interpolate_velocity", "evaluate_pressure",
    "QuadratureRule", "StokesData", "SaddleSystem", "triangle_quadrature",
    "gauss_lobatto_1d", "assemble_system", "assemble_norm_matrices",
    "SaddleSolution", "solve_saddle", "estimate_infsup",
    "ExactSolution", "build_exact_solution", "manufactured_data",
    "surface_operators",
    "ConvergenceRecord", "error_norms", "rates", "eoc", "write_outputs",
]
