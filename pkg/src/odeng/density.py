"""Design densities: polynomial positive parts, quadrature, quantiles.

A design density phi lives on the time window T and describes where an
increasingly dense sequence of sampling times should concentrate.  The
family used here is the positive part of a polynomial, normalized to unit
mass.  Two matrices summarize a density against a model:

    W = integral of f f' phi dt          (information of the density)
    R = integral of f f' q(1/phi) phi dt (accumulated neighbour correlation)

with f the regression vector and q the correlation tail sum; the spacing of
neighbouring points behaves like 1/phi, which is why the tail sum is
evaluated there.  The covariance attained by designs drawn from phi is then

    V(phi) = sigma2 * (W^-1 + 2 gamma W^-1 R W^-1)

up to the between-subject component, which does not depend on the design
and is therefore left out of the density-level criterion.

Quadrature is composite Simpson on an odd equispaced grid; the cumulative
distribution is accumulated per cell with midpoint refinement so it ends at
exactly 1 and inverts cleanly.  Polynomial coefficients are stored against
the unit-interval variable s = (t - lo) / (hi - lo) to keep high-degree
terms well scaled on wide windows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .correlation import Q_ARGUMENT_CAP, q_values
from .errors import (
    ConfigError,
    DegenerateDensityError,
    DegenerateDesignError,
    DomainError,
)
from .models import regression_vector
from .problem import ExactDesign

__all__ = [
    "QuadratureSpec",
    "PolyDensity",
    "normalize_density",
    "eval_density",
    "eval_cdf",
    "quantile",
    "design_from_density",
    "moment_matrix_W",
    "correlation_matrix_R",
    "asymptotic_covariance_V",
    "uniform_density",
]

# Mass below this is treated as no density at all.
NORM_FLOOR = 1e-12
# Density values at or below this contribute nothing to the correlation
# integral; their reciprocal lag is effectively infinite.
DENSITY_FLOOR = 1e-12

DESIGN_RULES = ("endpoints", "interior")


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Simpson rule on an equispaced grid; nodes must be odd >= 3."""

    nodes: int = 201

    def __post_init__(self):
        n = self.nodes
        if not isinstance(n, (int, np.integer)) or n < 3 or n % 2 == 0:
            raise ConfigError(
                "quadrature nodes must be an odd integer >= 3", "density.quad_nodes"
            )


def _simpson_weights(nodes, step):
    w = np.full(nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (step / 3.0)


@dataclass(frozen=True)
class PolyDensity:
    """A normalized polynomial positive-part density on a window.

    ``coeffs`` are the unnormalized polynomial coefficients (ascending, in
    the unit-interval variable), ``norm`` is the integral of the positive
    part over the window, ``ts``/``phi``/``cdf`` tabulate the normalized
    density and its distribution on the quadrature grid.
    """

    coeffs: np.ndarray
    domain: tuple
    norm: float
    ts: np.ndarray
    phi: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        for name in ("coeffs", "ts", "phi", "cdf"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def degree(self) -> int:
        return int(self.coeffs.size - 1)

    @property
    def nodes(self) -> int:
        return int(self.ts.size)

    @property
    def width(self) -> float:
        return self.domain[1] - self.domain[0]


def _positive_part_tables(coeffs, domain, quad):
    """Positive part on the midpoint-refined grid plus per-cell mass."""
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= lo:
        raise ConfigError("domain must satisfy hi > lo", "domain")
    nodes = quad.nodes
    step = (hi - lo) / (nodes - 1)
    s_fine = np.linspace(0.0, 1.0, 2 * nodes - 1)
    values = np.maximum(P.polyval(s_fine, coeffs), 0.0)
    cells = (step / 6.0) * (values[0:-2:2] + 4.0 * values[1::2] + values[2::2])
    return step, values, cells


def normalize_density(coeffs, domain, quad: Optional[QuadratureSpec] = None) -> PolyDensity:
    """Normalize a polynomial positive part into a density on the window.

    Raises DegenerateDensityError when the positive part carries mass below
    1e-12 (in particular when the polynomial is nonpositive throughout).
    """
    quad = quad or QuadratureSpec()
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ConfigError("coefficients must form a nonempty 1-d array")
    if not np.all(np.isfinite(coeffs)):
        raise ConfigError("coefficients must be finite")
    step, values, cells = _positive_part_tables(coeffs, domain, quad)
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    norm = float(cum[-1])
    if norm < NORM_FLOOR:
        raise DegenerateDensityError(
            f"polynomial positive part has mass {norm:.3e} on the window; "
            "no usable density"
        )
    lo, hi = float(domain[0]), float(domain[1])
    ts = np.linspace(lo, hi, quad.nodes)
    return PolyDensity(
        coeffs=coeffs,
        domain=(lo, hi),
        norm=norm,
        ts=ts,
        phi=values[::2] / norm,
        cdf=cum / norm,
    )


def uniform_density(domain, quad: Optional[QuadratureSpec] = None) -> PolyDensity:
    """The constant density on the window."""
    return normalize_density(np.array([1.0]), domain, quad)


def eval_density(pd, t) -> float:
    """Exact density value at a point of the window."""
    lo, hi = pd.domain
    t = float(t)
    tol = 1e-12 * pd.width
    if t < lo - tol or t > hi + tol:
        raise DomainError(f"t={t:g} outside the window [{lo:g}, {hi:g}]")
    s = (min(max(t, lo), hi) - lo) / pd.width
    return float(max(P.polyval(s, pd.coeffs), 0.0) / pd.norm)


def eval_cdf(pd, t) -> float:
    """Distribution function at a point, linear between grid nodes."""
    lo, hi = pd.domain
    t = float(t)
    tol = 1e-12 * pd.width
    if t < lo - tol or t > hi + tol:
        raise DomainError(f"t={t:g} outside the window [{lo:g}, {hi:g}]")
    return float(np.interp(t, pd.ts, pd.cdf))


def quantile(pd, u) -> float:
    """Inverse distribution function.

    For u strictly inside (0, 1) this inverts the tabulated distribution
    exactly (linear within a grid cell).  The levels 0 and 1 map to the
    window ends t_lo and t_hi; where the density vanishes near an edge
    the inverse is taken from that side, so the result stays monotone.
    """
    u = float(u)
    if not (0.0 <= u <= 1.0) or not np.isfinite(u):
        raise DomainError(f"quantile level must lie in [0, 1], got {u}")
    cdf, ts = pd.cdf, pd.ts
    if u <= 0.0:
        return float(ts[0])
    if u >= 1.0:
        return float(ts[-1])
    i = int(np.searchsorted(cdf, u, side="left"))
    du = cdf[i] - cdf[i - 1]
    if du <= 0.0:
        return float(ts[i])
    frac = (u - cdf[i - 1]) / du
    return float(ts[i - 1] + frac * (ts[i] - ts[i - 1]))


def design_from_density(pd, n, rule="endpoints") -> ExactDesign:
    """Spread n sampling times over the density by its quantiles.

    ``endpoints`` places points at levels (i-1)/(n-1), so the first and
    last point sit at the window ends (n >= 2).  ``interior``
    places them at levels i/(n+1), keeping all points strictly inside,
    which matters for models whose regression vector vanishes at 0.
    Coincident quantiles (flat stretches of the distribution) raise
    DegenerateDesignError.
    """
    n = int(n)
    if rule not in DESIGN_RULES:
        raise ConfigError(
            f"rule must be one of {', '.join(DESIGN_RULES)}", "design.rule"
        )
    if rule == "endpoints":
        if n < 2:
            raise ConfigError("endpoints rule needs n >= 2", "design.n")
        levels = np.arange(n) / (n - 1.0)
    else:
        if n < 1:
            raise ConfigError("interior rule needs n >= 1", "design.n")
        levels = np.arange(1, n + 1) / (n + 1.0)
    pts = np.array([quantile(pd, u) for u in levels])
    if np.any(np.diff(pts) <= 0.0):
        raise DegenerateDesignError(
            "quantile transform produced coincident points; the density is "
            "too concentrated for this many points"
        )
    return ExactDesign(points=pts)


def _basis_matrix(ts, model, noise, beta0):
    return np.vstack([regression_vector(model, noise, t, beta0) for t in ts])


def moment_matrix_W(pd, model, noise, beta0) -> np.ndarray:
    """Information matrix of the density: Simpson sum of f f' phi."""
    F = _basis_matrix(pd.ts, model, noise, beta0)
    w = _simpson_weights(pd.nodes, pd.width / (pd.nodes - 1))
    W = F.T @ (F * (w * pd.phi)[:, None])
    return 0.5 * (W + W.T)


def correlation_matrix_R(pd, model, noise, beta0, corr) -> np.ndarray:
    """Correlation load of the density: Simpson sum of f f' q(1/phi) phi.

    Nodes where the density is at or below 1e-12 contribute nothing: the
    local spacing is effectively infinite there.
    """
    F = _basis_matrix(pd.ts, model, noise, beta0)
    w = _simpson_weights(pd.nodes, pd.width / (pd.nodes - 1))
    q = _tail_sums(corr, pd.phi)
    R = F.T @ (F * (w * pd.phi * q)[:, None])
    return 0.5 * (R + R.T)


def _tail_sums(corr, phi):
    q = np.zeros_like(phi)
    mask = phi > DENSITY_FLOOR
    if np.any(mask):
        args = np.minimum(1.0 / phi[mask], Q_ARGUMENT_CAP)
        q[mask] = q_values(corr, args)
    return q


def asymptotic_covariance_V(pd, problem) -> np.ndarray:
    """Design-dependent covariance attained by designs drawn from a density.

    sigma2 * (W^-1 + 2 gamma W^-1 R W^-1); the between-subject covariance
    is excluded because it shifts every density by the same amount.
    Raises DegenerateDensityError when the density does not identify all
    parameters (singular W).
    """
    model, noise = problem.model, problem.noise
    beta0 = problem.beta0
    W = moment_matrix_W(pd, model, noise, beta0)
    try:
        np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise DegenerateDensityError(
            "density information matrix is singular; the density puts no "
            "mass where the model is informative"
        ) from None
    R = correlation_matrix_R(pd, model, noise, beta0, problem.correlation)
    Wi = np.linalg.solve(W, np.eye(W.shape[0]))
    V = problem.noise.sigma2 * (Wi + 2.0 * problem.correlation.gamma * Wi @ R @ Wi)
    return 0.5 * (V + V.T)


class DensityObjective:
    """Fast asymptotic-criterion evaluator for the density optimizer.

    Precomputes the quadrature grid and the regression basis once; each call
    maps a coefficient vector to the scalar criterion of V(phi), returning
    +inf for degenerate candidates (no positive mass, singular information,
    non-finite criterion), which a simplex search treats as ordinary bad
    vertices.
    """

    def __init__(self, problem, quad: Optional[QuadratureSpec] = None):
        self.problem = problem
        self.quad = quad or QuadratureSpec()
        lo, hi = problem.domain
        nodes = self.quad.nodes
        self.step = (hi - lo) / (nodes - 1)
        self.ts = np.linspace(lo, hi, nodes)
        self.weights = _simpson_weights(nodes, self.step)
        self.s_fine = np.linspace(0.0, 1.0, 2 * nodes - 1)
        self.F = _basis_matrix(self.ts, problem.model, problem.noise, problem.beta0)
        self.direction = problem.criterion_vector()
        self.is_det = problem.criterion.type == "D"
        self.sigma2 = problem.noise.sigma2
        self.gamma = problem.correlation.gamma
        self.eye = np.eye(problem.model.p)

    def phi_values(self, coeffs):
        """Normalized density on the base grid, or None when degenerate."""
        values = np.maximum(P.polyval(self.s_fine, np.asarray(coeffs, dtype=float)), 0.0)
        cells = (self.step / 6.0) * (values[0:-2:2] + 4.0 * values[1::2] + values[2::2])
        norm = float(np.sum(cells))
        if not np.isfinite(norm) or norm < NORM_FLOOR:
            return None
        return values[::2] / norm

    def value(self, coeffs) -> float:
        phi = self.phi_values(coeffs)
        if phi is None:
            return np.inf
        wphi = self.weights * phi
        W = self.F.T @ (self.F * wphi[:, None])
        q = _tail_sums(self.problem.correlation, phi)
        R = self.F.T @ (self.F * (wphi * q)[:, None])
        try:
            np.linalg.cholesky(0.5 * (W + W.T))
            Wi = np.linalg.solve(W, self.eye)
        except np.linalg.LinAlgError:
            return np.inf
        V = self.sigma2 * (Wi + 2.0 * self.gamma * Wi @ R @ Wi)
        if self.is_det:
            out = float(np.linalg.det(V))
            return out if np.isfinite(out) and out > 0.0 else np.inf
        c = self.direction
        out = float(c @ V @ c)
        return out if np.isfinite(out) and out > 0.0 else np.inf

    def density(self, coeffs) -> PolyDensity:
        """Full density object for a coefficient vector (with cdf tables)."""
        return normalize_density(coeffs, self.problem.domain, self.quad)
