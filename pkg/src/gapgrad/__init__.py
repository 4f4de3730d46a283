"""Numerical verification toolkit for gradient rates of the insulated
conductivity problem with m-convex inclusions.

The library splits into five layers: weight geometry and explicit
constants (geometry), circle eigensolves and parity structure (spectral),
closed-form rate predictions (exponents), radial comparison solutions
(radial), and the degenerate disk solver with its rate experiments
(solver).  The harness module wires those into reproducible experiments
with CSV/JSON/SVG artifacts, exposed on the command line as ``gapgrad``.
"""

from .errors import (
    ConvergenceError,
    ExperimentError,
    GapgradError,
    GridResolutionError,
    InputError,
    ParityError,
    QuadratureError,
    UnsupportedDimensionError,
)
from .exponents import (
    ExponentReport,
    alpha_of_lambda,
    alpha_pm,
    beta_of_lambda,
    predict_rates,
    shortcut_lambda1,
)
from .geometry import (
    CubeProfile,
    CubeSpec,
    DerivedConstants,
    GapProfile,
    HConditionReport,
    NormSpec,
    WeightSpec,
    cube_gap_profile,
    cube_profile,
    delta,
    delta_gradient,
    derived_constants,
    gap_transform,
    kappa_weight,
    load_weight_spec,
    validate_H_conditions,
    weight_spec_from_dict,
    weight_spec_to_dict,
    weighted_average,
    weighted_norm,
)
from .harness import (
    ExperimentConfig,
    ReportBundle,
    config_from_dict,
    emit_plots,
    load_config,
    run_experiment,
)
from .radial import (
    RadialSolution,
    fit_leading_coefficient,
    homogeneous_radial,
    solve_radial_ivp,
    variation_of_parameters,
)
from .solver import (
    DecayProfile,
    DiskField,
    DiskSystem,
    LowerBoundReport,
    MoserReport,
    PolarGrid,
    RateFit,
    SweepReport,
    assemble_disk_system,
    boundary_flux_balance,
    ckn_ratio,
    field_from_function,
    fit_loglog,
    gradient_rate_sweep,
    hardy_trace_ratio,
    lower_bound_experiment,
    max_gradient,
    moser_sup_check,
    omega_profile,
    polar_grid,
    solve_disk,
    verify_oscillation_decay,
)
from .spectral import (
    CircleGrid,
    ContinuationReport,
    Spectrum,
    assemble_operator,
    circle_grid,
    odd_sector_member,
    parity_analysis,
    parity_continuation,
    perturbed_weight_b,
    rayleigh_quotient,
    solve_spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "GapgradError",
    "InputError",
    "UnsupportedDimensionError",
    "ConvergenceError",
    "GridResolutionError",
    "QuadratureError",
    "ParityError",
    "ExperimentError",
    # geometry
    "WeightSpec",
    "DerivedConstants",
    "CubeSpec",
    "CubeProfile",
    "GapProfile",
    "NormSpec",
    "HConditionReport",
    "kappa_weight",
    "derived_constants",
    "delta",
    "delta_gradient",
    "cube_profile",
    "cube_gap_profile",
    "gap_transform",
    "weighted_norm",
    "weighted_average",
    "validate_H_conditions",
    "weight_spec_to_dict",
    "weight_spec_from_dict",
    "load_weight_spec",
    # spectral
    "CircleGrid",
    "circle_grid",
    "Spectrum",
    "ContinuationReport",
    "assemble_operator",
    "solve_spectrum",
    "rayleigh_quotient",
    "parity_analysis",
    "odd_sector_member",
    "perturbed_weight_b",
    "parity_continuation",
    # exponents
    "ExponentReport",
    "alpha_of_lambda",
    "alpha_pm",
    "beta_of_lambda",
    "shortcut_lambda1",
    "predict_rates",
    # radial
    "RadialSolution",
    "homogeneous_radial",
    "solve_radial_ivp",
    "variation_of_parameters",
    "fit_leading_coefficient",
    # solver
    "PolarGrid",
    "polar_grid",
    "DiskSystem",
    "DiskField",
    "DecayProfile",
    "RateFit",
    "MoserReport",
    "SweepReport",
    "LowerBoundReport",
    "assemble_disk_system",
    "solve_disk",
    "field_from_function",
    "boundary_flux_balance",
    "max_gradient",
    "omega_profile",
    "fit_loglog",
    "verify_oscillation_decay",
    "moser_sup_check",
    "gradient_rate_sweep",
    "lower_bound_experiment",
    "hardy_trace_ratio",
    "ckn_ratio",
    # harness
    "ExperimentConfig",
    "ReportBundle",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "emit_plots",
]
