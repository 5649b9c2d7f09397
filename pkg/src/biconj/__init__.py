"""Discrete Legendre transforms with certified convexification diagnostics.

The package is organized around five layers:

- :mod:`biconj.extgrid` — uniform grids, sampled functions with a +inf
  sentinel, interpolation;
- :mod:`biconj.funlib` — a catalog of test functions (values, derivatives,
  curvature constants) plus a staircase construction with prescribed
  flatness along a sparse set;
- :mod:`biconj.diffgeo` — finite-difference gradients/Hessians, sup norms,
  and slope intervals of convex samples;
- :mod:`biconj.legendre` — discrete conjugation (brute force and
  sorted-slope engines), dual grid derivation, lower convex envelopes,
  activity maps;
- :mod:`biconj.prop` — margin-by-margin verification that small smooth
  perturbations of a locally strictly convex function survive
  convexification untouched near the anchor.

``biconj.cli`` exposes the same machinery as a command-line tool.
"""

from .errors import (
    HypothesisFailure,
    PropernessError,
    ResolutionError,
    TruncationError,
    ValidationError,
)
from .extgrid import DualGrid, Grid, SampledFunction, eval_interp, make_grid, sample
from .funlib import (
    CounterexamplePhi,
    FunctionSpec,
    analytic_values,
    catalog,
    counterexample_phi,
    make_bump,
    spec,
)
from .diffgeo import (
    HessianAt,
    SubdiffInterval,
    grad_fd,
    hess_sup_norm,
    hessian_fd,
    lambda_min,
    subdifferential_1d,
    sup_norm,
)
from .legendre import (
    ActivityMask,
    activity_map,
    biconjugate,
    biconjugate_via_conjugation,
    conjugate_bruteforce,
    conjugate_llt,
    derive_dual_grid,
    lower_hull_indices,
)
from .prop import (
    AffineMinorant,
    OutsideBallMargins,
    PerTRecord,
    PropositionConstants,
    PropositionReport,
    TangentCertificate,
    ThresholdBracket,
    VelocityEstimate,
    VerificationResult,
    activation_threshold,
    check_on_ball,
    check_outside_ball,
    check_sphere_margin,
    check_tangent_global,
    compute_tx,
    default_schedule,
    find_delta,
    gangbo_remainder,
    resolve_constants,
    run_verification,
    sweep_t,
    velocity_at_zero,
    verify_gradient_equality,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ValidationError",
    "PropernessError",
    "ResolutionError",
    "HypothesisFailure",
    "TruncationError",
    # extgrid
    "Grid",
    "DualGrid",
    "SampledFunction",
    "make_grid",
    "sample",
    "eval_interp",
    # funlib
    "FunctionSpec",
    "spec",
    "catalog",
    "analytic_values",
    "make_bump",
    "CounterexamplePhi",
    "counterexample_phi",
    # diffgeo
    "HessianAt",
    "SubdiffInterval",
    "grad_fd",
    "hessian_fd",
    "lambda_min",
    "sup_norm",
    "hess_sup_norm",
    "subdifferential_1d",
    # legendre
    "conjugate_bruteforce",
    "conjugate_llt",
    "lower_hull_indices",
    "derive_dual_grid",
    "biconjugate",
    "biconjugate_via_conjugation",
    "ActivityMask",
    "activity_map",
    # prop
    "PropositionConstants",
    "AffineMinorant",
    "TangentCertificate",
    "OutsideBallMargins",
    "PerTRecord",
    "PropositionReport",
    "ThresholdBracket",
    "VelocityEstimate",
    "VerificationResult",
    "find_delta",
    "compute_tx",
    "check_on_ball",
    "check_sphere_margin",
    "check_outside_ball",
    "check_tangent_global",
    "verify_gradient_equality",
    "sweep_t",
    "default_schedule",
    "activation_threshold",
    "gangbo_remainder",
    "velocity_at_zero",
    "resolve_constants",
    "run_verification",
]
