"""Wave simulation on unbounded spacetime domains.

Compactly supported initial data confine the wave to a causality cone; a
conformal inversion maps that cone to a bounded set where a standard leapfrog
FDTD march runs, and the physical solution is reconstructed at arbitrary
spacetime points by weighting interpolated values with an analytic factor.
"""

from .errors import (
    CFLViolation,
    ConfigError,
    InvalidSpec,
    KelvinWaveError,
    LightConeSingular,
    NumericBlowUp,
    OutOfGrid,
)
from .kelvin import (
    CallableField,
    DiskObstacle,
    GaussianPulse,
    GridSpec,
    NoObstacle,
    PolygonObstacle,
    ProblemSpec,
    g_factor,
    g_factor_dtau,
    init_surface_tau,
    kelvin_transform_field,
    size_grid,
    transform_initial_data,
)
from .minkowski import (
    Boost,
    CausalityCone,
    IntervalClass,
    Inversion,
    MobiusMap,
    Scaling,
    SpacetimePoint,
    Translation,
    apply_map,
    cone_contains,
    inversion_conformal_factor,
    inversion_jacobian,
    invert,
    map_conformal_factor,
    minkowski_inner,
)
from .oracle import (
    ComparisonReport,
    ConvergenceReport,
    compare,
    convergence_study,
    dalembert_exact,
    run_reference,
)
from .query import QueryResult, Region, interpolate, query_frame, query_point, query_points
from .solver import (
    BoundedGrid,
    FrameSet,
    NodeState,
    build_grid,
    discrete_energy,
    run,
    seed_initial,
    step,
)
from .stencil import HAS_COMPILED, backend_name

__version__ = "0.1.0"
