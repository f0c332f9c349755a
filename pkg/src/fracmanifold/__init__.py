"""Stable manifolds of Caputo fractional systems near hyperbolic equilibria."""

from __future__ import annotations

from fracmanifold.errors import (
    DomainError,
    FracManifoldError,
    IllConditioned,
    MLOverflow,
    NoConvergence,
    NonConvergence,
    NotHyperbolic,
    NoValidRadius,
    NumericalError,
    ShapeError,
    StepOverflow,
    Unbounded,
    ValidationError,
)
from fracmanifold.fde_solver import (
    Trajectory,
    Verdict,
    Verification,
    decay_time,
    solve_caputo,
    verify_manifold_point,
    voc_residual,
)
from fracmanifold.lp_operator import (
    ManifoldGraph,
    OperatorConfig,
    TrajectoryGrid,
    apply_lp,
    choose_radii,
    estimate_contraction_constant,
    fixed_point,
    fixed_point_residual,
    manifold_graph,
    measure_contraction,
    prepare,
)
from fracmanifold.mittag_leffler import (
    MLMethod,
    MLParams,
    MLValue,
    ml_asymptotic,
    ml_deriv,
    ml_eval,
    ml_matrix,
    ml_series,
    ml_sup_stable,
)
from fracmanifold.polynomial import Monomial, PolynomialMap, lipschitz_on_ball
from fracmanifold.spectral import (
    DeclaredBlock,
    FractionalSystem,
    HyperbolicSplitting,
    TransformedSystem,
    check_hyperbolicity,
    jordanize,
    pullback_manifold,
    transform_system,
)

__all__ = [
    "DeclaredBlock",
    "DomainError",
    "FracManifoldError",
    "FractionalSystem",
    "HyperbolicSplitting",
    "IllConditioned",
    "MLMethod",
    "MLOverflow",
    "MLParams",
    "MLValue",
    "ManifoldGraph",
    "Monomial",
    "NoConvergence",
    "NoValidRadius",
    "NonConvergence",
    "NotHyperbolic",
    "NumericalError",
    "OperatorConfig",
    "PolynomialMap",
    "ShapeError",
    "StepOverflow",
    "Trajectory",
    "TrajectoryGrid",
    "TransformedSystem",
    "Unbounded",
    "ValidationError",
    "Verdict",
    "Verification",
    "apply_lp",
    "check_hyperbolicity",
    "choose_radii",
    "decay_time",
    "estimate_contraction_constant",
    "fixed_point",
    "fixed_point_residual",
    "jordanize",
    "lipschitz_on_ball",
    "manifold_graph",
    "measure_contraction",
    "ml_asymptotic",
    "ml_deriv",
    "ml_eval",
    "ml_matrix",
    "ml_series",
    "ml_sup_stable",
    "prepare",
    "pullback_manifold",
    "solve_caputo",
    "transform_system",
    "verify_manifold_point",
    "voc_residual",
]
