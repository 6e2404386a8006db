"""Galerkin boundary elements for relaxed local multi-trace formulations of
2D Helmholtz transmission problems."""

__version__ = "0.1.0"

from .assembly import (  # noqa: E402
    GalerkinMatrix,
    MultiTraceDofMap,
    assemble_calderon,
    assemble_duality,
    discretize,
    eval_potential,
)
from .geometry import (  # noqa: E402
    GeometryError,
    build_adjacency_tree,
    build_partition,
    induce_boundary_meshes,
    mesh_skeleton,
)
from .mtf import (  # noqa: E402
    NumericalError,
    assemble_mtf,
    assemble_rhs,
    build_transmission,
    solve,
    split_diag,
)
from .specfun import BACKEND, bessel_j0j1y0y1, green_kernel_2d, log_split  # noqa: E402
from .spectrum import cluster_report, eig_dense, predicted_eigenvalues  # noqa: E402

__all__ = [
    "BACKEND",
    "GalerkinMatrix",
    "GeometryError",
    "MultiTraceDofMap",
    "NumericalError",
    "assemble_calderon",
    "assemble_duality",
    "assemble_mtf",
    "assemble_rhs",
    "bessel_j0j1y0y1",
    "build_adjacency_tree",
    "build_partition",
    "build_transmission",
    "cluster_report",
    "discretize",
    "eig_dense",
    "eval_potential",
    "green_kernel_2d",
    "induce_boundary_meshes",
    "log_split",
    "mesh_skeleton",
    "predicted_eigenvalues",
    "solve",
    "split_diag",
]
