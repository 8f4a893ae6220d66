"""Particle solver for diffusing populations coupled by multi-marginal transport."""

from .errors import (
    CapacityError,
    DomainError,
    InvalidInputError,
    NumericalFailureError,
)
from .geometry import (
    Domain,
    GridDensity,
    ParticleDensity,
    from_grid,
    grid_from_csv,
    l1_distance_to_profile,
    l1_grid_distance,
    normalized_grid,
    particle_step_density,
    product_w2,
    quantile,
    to_grid,
    w2_distance,
)
from .energy import (
    InternalEnergy,
    McCannReport,
    custom_energy,
    energy_gradient,
    energy_value,
    entropy_energy,
    mccann_check,
    power_law_energy,
    pressure,
    zero_energy,
)
from .transport import (
    ComonotoneReport,
    ConvexityReport,
    CostFunction,
    MultiMarginalPlan,
    barycenter_cost,
    convexity_probe,
    displacement_interpolate,
    kantorovich_potentials,
    lp_solve_mm,
    monotone_plan,
    plan_cost,
    probe_comonotone,
    quadratic_pairwise_cost,
    semi_coupling_value,
    velocity_field,
    zero_cost,
)
from .jko import (
    StepProblem,
    StepSolution,
    euler_lagrange_residual,
    objective,
    objective_gradient,
    project_ordered_box,
    solve_step,
)
from .flow import (
    ContractionReport,
    Coupling,
    EstimateReport,
    FlowConfig,
    FlowTrajectory,
    PopulationSpec,
    StepDiagnostics,
    TestFunction,
    WeakFormReport,
    bump_test_function,
    contraction_probe,
    diagnostics_csv,
    estimate_report,
    run_flow,
    trajectory_csv,
    weak_form_residual,
)
from .presets import (
    PRESETS,
    barenblatt_profile,
    barycenter3_preset,
    bump_profile,
    gaussian_profile,
    heat_flow_preset,
    identity_preset,
    porous_medium_preset,
    profile_grid,
)
from .cli import (
    Scenario,
    build_flow_config,
    parse_scenario,
    run_scenario,
    serialize_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DomainError",
    "InvalidInputError",
    "NumericalFailureError",
    "Domain",
    "GridDensity",
    "ParticleDensity",
    "from_grid",
    "grid_from_csv",
    "normalized_grid",
    "product_w2",
    "quantile",
    "to_grid",
    "w2_distance",
    "InternalEnergy",
    "McCannReport",
    "custom_energy",
    "energy_gradient",
    "energy_value",
    "entropy_energy",
    "mccann_check",
    "power_law_energy",
    "pressure",
    "zero_energy",
    "ComonotoneReport",
    "ConvexityReport",
    "CostFunction",
    "MultiMarginalPlan",
    "barycenter_cost",
    "convexity_probe",
    "displacement_interpolate",
    "kantorovich_potentials",
    "lp_solve_mm",
    "monotone_plan",
    "plan_cost",
    "probe_comonotone",
    "quadratic_pairwise_cost",
    "semi_coupling_value",
    "velocity_field",
    "zero_cost",
    "l1_distance_to_profile",
    "l1_grid_distance",
    "particle_step_density",
    "StepProblem",
    "StepSolution",
    "euler_lagrange_residual",
    "objective",
    "objective_gradient",
    "project_ordered_box",
    "solve_step",
    "ContractionReport",
    "Coupling",
    "EstimateReport",
    "FlowConfig",
    "FlowTrajectory",
    "PopulationSpec",
    "StepDiagnostics",
    "TestFunction",
    "WeakFormReport",
    "bump_test_function",
    "contraction_probe",
    "diagnostics_csv",
    "estimate_report",
    "run_flow",
    "trajectory_csv",
    "weak_form_residual",
    "PRESETS",
    "barenblatt_profile",
    "barycenter3_preset",
    "bump_profile",
    "gaussian_profile",
    "heat_flow_preset",
    "identity_preset",
    "porous_medium_preset",
    "profile_grid",
    "Scenario",
    "build_flow_config",
    "parse_scenario",
    "run_scenario",
    "serialize_scenario",
]
