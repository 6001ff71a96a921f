"""Estimator covariance matrices for exact designs, criteria, efficiency.

For a design with points t_1 < ... < t_n the regression matrix X stacks the
regression vectors (mean gradient over noise scale) row by row.  Two
estimators are supported:

* ordinary least squares:   cov = (X'X)^-1 X' V X (X'X)^-1 + Vp
* weighted least squares:   cov = (X' (V + X Vp X')^-1 X)^-1

where V is the within-subject error covariance and Vp the between-subject
covariance.  The weighted form folds Vp into the weighting and is the best
linear unbiased covariance; the ordinary form is what a fixed-weight
analysis actually achieves.  Criterion values (determinant or a directional
variance) and efficiency ratios are computed from these matrices, and a
Monte-Carlo simulator provides an independent check of the ordinary form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .correlation import rho
from .errors import (
    ConfigError,
    ConditioningWarning,
    DomainError,
    NumericalError,
    OdengError,
    SingularDesignError,
)
from .models import auc_gradient, regression_vector
from .problem import Criterion, ExactDesign

__all__ = [
    "design_matrix",
    "error_covariance",
    "ols_covariance",
    "wls_covariance",
    "estimator_covariance",
    "criterion_value",
    "efficiency",
    "sensitivity_grid",
    "SensitivityResult",
    "simulate_ols_covariance",
]

CONDITION_WARN_THRESHOLD = 1e12

ESTIMATORS = ("OLS", "WLS")


def _check_estimator(estimator):
    est = str(estimator).upper()
    if est not in ESTIMATORS:
        raise ConfigError(f"estimator must be OLS or WLS, got {estimator!r}")
    return est


def design_matrix(design, model, noise, beta0) -> np.ndarray:
    """Stack regression vectors at the design points into an n-by-p matrix."""
    if design.n < model.p:
        raise SingularDesignError(
            f"design has {design.n} points but the model has p={model.p} parameters"
        )
    return np.vstack([
        regression_vector(model, noise, t, beta0) for t in design.points
    ])


def error_covariance(design, noise, corr) -> np.ndarray:
    """Within-subject error covariance of the observations at the design.

    Entry (j, s) is sigma2 * h(t_j) h(t_s) * (gamma * r(t_j - t_s)
    + (1 - gamma) * delta_js) with r evaluated on the compressed axis.  When
    the correlation spec carries no explicit scale, the number of design
    points is used, matching the resolution-dependent correlation model.
    """
    pts = design.points
    n = pts.size
    scale = corr.scale if corr.scale is not None else float(n)
    lags = scale * np.abs(pts[:, None] - pts[None, :])
    R = np.asarray(rho(corr, lags), dtype=float)
    np.fill_diagonal(R, 1.0)
    C = corr.gamma * R + (1.0 - corr.gamma) * np.eye(n)
    h = np.array([noise.scale_at(t) for t in pts])
    V = noise.sigma2 * (h[:, None] * h[None, :]) * C
    return 0.5 * (V + V.T)


def _warn_if_ill_conditioned(M, label):
    # eigvalsh is cheap at these sizes and gives a reliable 2-norm condition
    # estimate for symmetric matrices.
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    mx = float(np.max(np.abs(w)))
    mn = float(np.min(np.abs(w)))
    if mn == 0.0 or mx / mn > CONDITION_WARN_THRESHOLD:
        cond = np.inf if mn == 0.0 else mx / mn
        warnings.warn(
            f"{label} is ill conditioned (condition number ~ {cond:.3e})",
            ConditioningWarning,
            stacklevel=3,
        )
        return cond
    return mx / mn


def ols_covariance(X, Veps, Vp) -> np.ndarray:
    """Covariance of the ordinary least-squares population estimate."""
    X = np.asarray(X, dtype=float)
    XtX = X.T @ X
    try:
        np.linalg.cholesky(XtX)
    except np.linalg.LinAlgError:
        raise SingularDesignError(
            "normal-equation matrix X'X is singular; the design does not "
            "identify all parameters"
        ) from None
    _warn_if_ill_conditioned(XtX, "normal-equation matrix X'X")
    A = np.linalg.solve(XtX, X.T)
    M = A @ Veps @ A.T + np.asarray(Vp, dtype=float)
    return 0.5 * (M + M.T)


def wls_covariance(X, Veps, Vp) -> np.ndarray:
    """Covariance of the weighted least-squares population estimate.

    The weighting matrix is the inverse of the combined covariance
    V + X Vp X'; a singular combined covariance raises NumericalError with
    a condition-number report.
    """
    X = np.asarray(X, dtype=float)
    Vp = np.asarray(Vp, dtype=float)
    C = np.asarray(Veps, dtype=float) + X @ Vp @ X.T
    C = 0.5 * (C + C.T)
    try:
        np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(C)
        mn = float(np.min(np.abs(w)))
        cond = np.inf if mn == 0.0 else float(np.max(np.abs(w))) / mn
        raise NumericalError(
            "combined observation covariance is not positive definite",
            condition=cond,
        ) from None
    _warn_if_ill_conditioned(C, "combined observation covariance")
    S = X.T @ np.linalg.solve(C, X)
    S = 0.5 * (S + S.T)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularDesignError(
            "weighted information matrix is singular; the design does not "
            "identify all parameters"
        ) from None
    M = np.linalg.solve(S, np.eye(S.shape[0]))
    return 0.5 * (M + M.T)


def estimator_covariance(problem, design, estimator="OLS") -> np.ndarray:
    """Covariance of the chosen estimator for a design under a problem."""
    est = _check_estimator(estimator)
    design.validate_for(problem)
    X = design_matrix(design, problem.model, problem.noise, problem.beta0)
    V = error_covariance(design, problem.noise, problem.correlation)
    if est == "OLS":
        return ols_covariance(X, V, problem.population.Vp)
    return wls_covariance(X, V, problem.population.Vp)


def criterion_value(M, criterion, direction=None) -> float:
    """Scalar criterion of a covariance matrix; lower is better.

    D-type gives the determinant; c- and AUC-type give the variance of the
    linear combination along ``direction`` (falling back to the criterion's
    own direction vector for c-type).
    """
    M = np.asarray(M, dtype=float)
    if criterion.type == "D":
        return float(np.linalg.det(M))
    c = direction if direction is not None else criterion.c
    if c is None:
        raise ConfigError(
            f"criterion {criterion.type!r} needs a direction vector to evaluate"
        )
    c = np.asarray(c, dtype=float)
    return float(c @ M @ c)


def problem_criterion_value(problem, M) -> float:
    """Criterion of a covariance matrix under the problem's own criterion."""
    return criterion_value(M, problem.criterion, problem.criterion_vector())


def design_criterion(problem, design, estimator="OLS") -> float:
    """Criterion value of a design: covariance first, then the scalar."""
    return problem_criterion_value(problem, estimator_covariance(problem, design, estimator))


def efficiency(design, reference, problem, estimator="OLS", criterion=None) -> float:
    """Efficiency of ``design`` relative to ``reference``.

    D-type: (det M_ref / det M_design)^(1/p).  Directional types: the plain
    variance ratio c' M_ref c / c' M_design c.  Values land in (0, 1] when
    the reference is optimal; a better-than-reference design gives > 1.
    """
    crit = criterion if criterion is not None else problem.criterion
    if crit.type == "D":
        direction = None
    elif crit.type == "c":
        direction = crit.c
    else:
        direction = auc_gradient(problem.model, problem.beta0)
    v_design = criterion_value(estimator_covariance(problem, design, estimator), crit, direction)
    v_ref = criterion_value(estimator_covariance(problem, reference, estimator), crit, direction)
    if v_design <= 0 or v_ref <= 0:
        raise NumericalError(
            f"criterion values must be positive for an efficiency ratio, got "
            f"{v_design:.3e} and {v_ref:.3e}"
        )
    if crit.type == "D":
        return float((v_ref / v_design) ** (1.0 / problem.model.p))
    return float(v_ref / v_design)


@dataclass
class SensitivityResult:
    """Efficiency of one design over a grid of nominal-parameter values.

    ``axes`` holds the evaluated values per parameter coordinate (a single
    value for coordinates held fixed), ``values`` the efficiency at each
    node with shape ``tuple(len(a) for a in axes)``, and ``ok`` whether the
    node evaluated cleanly.  Failed nodes carry nan.
    """

    axes: List[np.ndarray]
    values: np.ndarray
    ok: np.ndarray

    def rows(self):
        """Yield (beta_1, ..., beta_p, efficiency) per node, C order."""
        for idx in np.ndindex(self.values.shape):
            beta = tuple(float(self.axes[k][i]) for k, i in enumerate(idx))
            yield beta + (float(self.values[idx]),)

    @property
    def min_ok(self) -> float:
        vals = self.values[self.ok]
        if vals.size == 0:
            raise NumericalError("no sensitivity node evaluated successfully")
        return float(np.min(vals))


def sensitivity_grid(design, problem, beta_box, grid, estimator="OLS") -> SensitivityResult:
    """Efficiency of a fixed design as the nominal parameters move.

    ``beta_box`` gives one (lo, hi) interval per parameter; an interval with
    lo == hi pins that coordinate.  Each varying axis is sampled at ``grid``
    equispaced values including both ends.  At every node the reference is
    the exact optimal design recomputed for that node's parameters, so the
    value measures how much is lost by designing for beta0 when the truth
    sits elsewhere.  Nodes where the model, covariance or optimizer fails
    are flagged and carry nan instead of aborting the sweep.
    """
    from .optimize import refine_exact_design  # deferred: optimize imports this module

    est = _check_estimator(estimator)
    p = problem.model.p
    box = [(float(lo), float(hi)) for lo, hi in beta_box]
    if len(box) != p:
        raise ConfigError(f"beta_box needs {p} intervals, got {len(box)}")
    grid = int(grid)
    if grid < 2:
        raise ConfigError("grid must be at least 2 points per varying axis")
    axes = []
    for lo, hi in box:
        if hi < lo:
            raise ConfigError("beta_box intervals need hi >= lo")
        axes.append(np.array([lo]) if hi == lo else np.linspace(lo, hi, grid))
    shape = tuple(a.size for a in axes)
    values = np.full(shape, np.nan)
    ok = np.zeros(shape, dtype=bool)
    for idx in np.ndindex(shape):
        beta = np.array([axes[k][i] for k, i in enumerate(idx)])
        try:
            local = problem.at_beta(beta)
            reference, _ = refine_exact_design(local, design, estimator=est)
            values[idx] = efficiency(design, reference, local, estimator=est)
            ok[idx] = True
        except OdengError:
            continue
    return SensitivityResult(axes=axes, values=values, ok=ok)


def _psd_factor(M):
    M = 0.5 * (M + np.asarray(M, dtype=float).T)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(M)
        w = np.clip(w, 0.0, None)
        return U * np.sqrt(w)


def simulate_ols_covariance(problem, design, n_replicates, seed) -> np.ndarray:
    """Empirical covariance of the ordinary least-squares estimate.

    Each replicate draws subject parameters from N(beta0, Vp) and errors
    from N(0, V), forms responses from the full nonlinear mean, and solves
    the scale-weighted normal equations linearized at beta0.  All draws
    come from one seeded generator in a fixed order (parameters first, then
    errors), so results are reproducible bit for bit for a given seed.

    This estimates the linearized covariance; for strongly nonlinear models
    with wide parameter spread the two differ by the linearization error.
    """
    n_replicates = int(n_replicates)
    if n_replicates < 2:
        raise ConfigError("need at least 2 replicates for a covariance estimate")
    design.validate_for(problem)
    model, noise = problem.model, problem.noise
    beta0 = problem.beta0
    p, n = model.p, design.n

    X = design_matrix(design, model, noise, beta0)
    V = error_covariance(design, noise, problem.correlation)
    h = np.array([noise.scale_at(t) for t in design.points])

    rng = np.random.default_rng(seed)
    Zb = rng.standard_normal((n_replicates, p))
    Ze = rng.standard_normal((n_replicates, n))
    B = beta0[None, :] + Zb @ _psd_factor(problem.population.Vp).T
    E = Ze @ _psd_factor(V).T

    if model.linear:
        # Linear mean: responses are exactly B G' + E with G the basis matrix.
        G = X * h[:, None]
        Y = B @ G.T + E
    else:
        Y = np.empty((n_replicates, n))
        for j, t in enumerate(design.points):
            Y[:, j] = np.array([model.eta(t, b) for b in B]) + E[:, j]
        # Nonlinear estimation error around beta0, linearized: subtract the
        # mean curve at beta0 and accumulate the deviation onto beta0 below.
        eta0 = np.array([model.eta(t, beta0) for t in design.points])
        Y = Y - eta0[None, :]

    XtX = X.T @ X
    try:
        np.linalg.cholesky(XtX)
    except np.linalg.LinAlgError:
        raise SingularDesignError("design does not identify all parameters") from None
    P = np.linalg.solve(XtX, X.T).T  # (n, p): maps scaled responses to estimates

    U = Y / h[None, :]
    est = U @ P
    if not model.linear:
        est = est + beta0[None, :]
    centered = est - est.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / (n_replicates - 1)
    return 0.5 * (cov + cov.T)
