"""Optimal sampling designs for random-effect regression with correlated errors.

The package computes asymptotically optimal design densities for studies in
which every subject is measured at the same time points, individual response
curves follow a nonlinear regression model with random subject effects, and
the within-subject observation errors are correlated in time.  Exact designs
are read off the optimized density by a quantile transform and can then be
polished by direct criterion minimization.

Typical flow::

    cfg = load_config("study.json")
    problem = cfg.build_problem()
    density, res = optimize_density(problem, seed=cfg.seed)
    design = design_from_density(density, n=14, rule="endpoints")
    refined, _ = refine_exact_design(problem, design)
    eff = efficiency(design, refined, problem, estimator="OLS")
"""

from .config import ProblemConfig, fixture_path, load_config, load_design_points
from .correlation import CorrelationSpec, q_function, q_values, rho
from .covariance import (
    design_criterion,
    design_matrix,
    efficiency,
    error_covariance,
    estimator_covariance,
    ols_covariance,
    problem_criterion_value,
    sensitivity_grid,
    simulate_ols_covariance,
    wls_covariance,
)
from .density import (
    PolyDensity,
    QuadratureSpec,
    asymptotic_covariance_V,
    design_from_density,
    eval_cdf,
    eval_density,
    normalize_density,
    quantile,
    uniform_density,
)
from .errors import (
    ConfigError,
    DegenerateDensityError,
    DegenerateDesignError,
    DomainError,
    ExpressionError,
    NumericalError,
    OdengError,
    OptimizationError,
    SingularDesignError,
    UnsupportedCriterionError,
)
from .models import ModelSpec, NoiseSpec, auc_gradient, builtin_model, parse_model_expression
from .optimize import (
    OptimResult,
    SimplexConfig,
    nelder_mead,
    optimize_density,
    refine_exact_design,
)
from .problem import Criterion, ExactDesign, PopulationProblem, PopulationSpec

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ConfigError",
    "CorrelationSpec",
    "Criterion",
    "DegenerateDensityError",
    "DegenerateDesignError",
    "DomainError",
    "ExactDesign",
    "ExpressionError",
    "ModelSpec",
    "NoiseSpec",
    "NumericalError",
    "OdengError",
    "OptimResult",
    "OptimizationError",
    "PolyDensity",
    "PopulationProblem",
    "PopulationSpec",
    "ProblemConfig",
    "QuadratureSpec",
    "SimplexConfig",
    "SingularDesignError",
    "UnsupportedCriterionError",
    "asymptotic_covariance_V",
    "auc_gradient",
    "builtin_model",
    "design_criterion",
    "design_from_density",
    "design_matrix",
    "efficiency",
    "error_covariance",
    "estimator_covariance",
    "eval_cdf",
    "eval_density",
    "fixture_path",
    "load_config",
    "load_design_points",
    "nelder_mead",
    "normalize_density",
    "ols_covariance",
    "optimize_density",
    "parse_model_expression",
    "problem_criterion_value",
    "q_function",
    "q_values",
    "quantile",
    "rho",
    "sensitivity_grid",
    "simulate_ols_covariance",
    "uniform_density",
    "wls_covariance",
]
