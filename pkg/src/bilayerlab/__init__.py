"""Numerical laboratory for mesoscale bilayer band energies.

The package builds the recovery band around a closed surface, evaluates
its rescaled excess energy exactly by quadrature, compares it with the
curvature limit and with the general lower estimate, and cross-checks the
per-ray transport cost against an independent discrete solver.
"""

from .analysis import DecayFit, fit_decay_exponent, richardson_limit
from .construction import (
    BilayerProfile,
    DensityPair,
    NodeProfile,
    build_construction,
    project_points,
    pushforward_check,
    shells_at,
    solve_outer,
    solve_thickness,
    transport_phi,
    transport_potential,
    voxelize,
)
from .energies import (
    CSV_COLUMNS,
    EnergyReport,
    d1_asymptotic,
    d1_construction_cost,
    d1_mass_lower_estimate,
    energy,
    jump_area,
    limit_energy,
    lower_bound_rhs,
    weakstar_error,
)
from .errors import (
    BilayerError,
    DescriptorError,
    LowerBoundViolation,
    QuadratureError,
    ReachError,
    RootSolveError,
    SandwichViolation,
    VoxelizationError,
)
from .rays import (
    GapBound,
    MassCoordinate,
    Q_eigen,
    Q_eigen_split,
    Q_matrix,
    RayModel,
    admissible_interval,
    length_of_mass,
    mass_of_length,
    mass_range,
    quintic_identity,
    ray_gap_lower_bound,
    t_derivatives,
    taylor_t,
)
from .surfaces import (
    ParametricSurface,
    QuadratureGrid,
    ReachReport,
    SurfaceSample,
    build_grid,
    evaluate_frame,
    make_surface,
    normalize_to_unit_mass,
    parallel_area,
    parse_surface,
    reach_check,
    surface_integral,
)
from .transport import (
    DiscreteMeasure,
    DualBound,
    TransportPlan,
    dual_certificate,
    emd,
    monotone_1d,
)

__version__ = "0.1.0"
