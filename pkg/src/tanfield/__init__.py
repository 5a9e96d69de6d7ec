"""Energy bounds and field analysis for tangent unit-vector fields on
convex polyhedra.

The package computes the topological lower bound on the Dirichlet energy
of a homotopy class of tangent unit-vector fields (via per-vertex trapped
areas and a Lipschitz-potential linear program, certified against its
transportation dual), analyzes sampled discrete fields, and produces upper
bounds by projected-gradient relaxation on boxes.
"""

__version__ = "0.1.0"

from .bound import (
    BoundInstance,
    BoundResult,
    lipschitz_extension,
    lower_bound,
    solve_dual,
    solve_primal,
)
from .errors import TanfieldError
from .field import (
    AnalysisReport,
    DiscreteField,
    Grid,
    SeparatingSurface,
    analyze,
    box_grid,
    corner_cut,
    energy,
    extract_edge_orientation,
    extract_kink_number,
    field_from_function,
    load_field,
    make_grid,
    pointwise_inequality_check,
    save_field,
    tangency_report,
    trapped_area_integrate,
    triangle_surface,
)
from .invariants import (
    HomotopyInvariants,
    TrappedAreas,
    choose_s,
    count_q,
    invariants_from_json,
    invariants_to_json,
    random_invariants,
    trapped_area,
    trapped_areas_all,
    validate,
    wrapping_from_trapped,
)
from .polytope import (
    Polytope,
    VertexStar,
    build_polytope,
    builtin_shape,
    load_polytope,
    vertex_distance_matrix,
    vertex_star,
)
from .relax import RelaxConfig, SeedSpec, el_residual, project_tangent, relax, seed_field
from .sphergeo import contains, oriented_area, sigma, winding_angle

__all__ = [name for name in dir() if not name.startswith("_")]
