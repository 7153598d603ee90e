"""Discrete exterior calculus solvers for wave, heat, Laplace and Poisson
equations on triangulated surfaces."""

from .dec import (
    DualMetrics,
    HodgeStar,
    LaplaceOperator,
    apply_laplacian,
    assemble_laplacian,
    build_dual_metrics,
    build_hodge_star,
    build_incidence,
    circumcenter,
    cotan_crosscheck,
    laplacian_from_forms,
)
from .mesh import (
    MeshQualityReport,
    SurfaceMesh,
    build_mesh,
    generate_flat_grid,
    generate_icosphere,
    generate_tetrahedron,
    load_mesh,
    validate,
    write_mesh,
)
from .solvers import (
    DirichletCondition,
    HeatState,
    SourceSignal,
    StabilityBound,
    WaveState,
    cfl_bound,
    heat_dt_bound,
    heat_step,
    solve_laplace,
    solve_poisson,
    wave_energy,
    wave_init,
    wave_step,
)

__version__ = "0.1.0"
