"""Numerical laboratory for periodic polyhedral sweeping processes."""

from .errors import (
    ConfigError,
    DegenerateGaitError,
    EnumerationCapError,
    GridAlignmentError,
    InadmissibleStateError,
    InfeasibleSetError,
    LicqError,
    MembershipError,
    NormalConeError,
    PatternSearchError,
    SweepLabError,
)
from .signals import PeriodicSignal, combine, eval_signal, lipschitz_constant, triangle_wave
from .polyhedra import (
    DEFAULT_TOL,
    FrozenPolyhedron,
    MovingPolyhedron,
    active_set,
    check_licq,
    contains,
    decompose_normal,
    enumerate_faces,
    freeze,
    gamma_constant,
    project,
    vertices,
)
from .sweeping import (
    Classification,
    ConvergenceReport,
    SweepingProblem,
    Trajectory,
    classify_convergence,
    convergence_report,
    estimate_limit_cycle,
    hypomonotone_check,
    lambda_convergence,
    lambda_series,
    period_distance_sup,
    period_distance_w12,
    period_distances_sup,
    period_distances_w12,
    poincare_samples,
    read_trajectory_csv,
    simulate,
    step,
    validate_trajectory,
    write_trajectory_csv,
)
from .crawler import (
    Gait,
    Motion,
    admissible,
    assemble_positions,
    build_force_polyhedron,
    build_moving_set,
    check_gait_uniqueness,
    dissipation,
    energy,
    energy_gradient,
    estimate_velocity,
    incremental_oracle,
    pi_y,
    pi_z,
    recover_translation,
    running_periodic_decomposition,
    simulate_reduced,
)
from .scenarios import (
    Scenario,
    acute_corner_note,
    catalog,
    edge_map,
    ncell_scenario,
    reference_gaits,
    triangle_scenario,
    wedge_poincare,
    wedge_scenario,
)

__version__ = "0.1.0"
