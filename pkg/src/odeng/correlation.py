"""Within-subject error correlation: kernels, scaling, and tail sums.

The correlation between two observations of the same subject at lag dt is
gamma * r(dt), where r is a stationary kernel evaluated on a compressed time
axis: r(dt) = rho(scale * |dt|).  The compression ties the effective
correlation length to the sampling resolution, so that denser designs see
proportionally less correlated neighbours.

The tail sum q(t) = sum_{j>=1} rho(j*t) measures how much correlation an
observation accumulates against an infinite ladder of neighbours spaced t
apart.  For the exponential kernel the geometric series collapses to
1/(exp(lam*t) - 1); every other kernel is summed directly with a relative
cutoff of 1e-12 and a hard cap of 1e7 terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

__all__ = ["CorrelationSpec", "rho", "r_scaled", "q_function"]

SERIES_RELATIVE_TOL = 1e-12
SERIES_MAX_TERMS = 10**7
# Arguments beyond this are treated as "infinitely far apart": q == 0.
Q_ARGUMENT_CAP = 1e12

KERNELS = ("exponential", "gaussian", "user-table")


@dataclass(frozen=True)
class CorrelationSpec:
    """Correlation structure of the within-subject errors.

    Parameters
    ----------
    kernel : str
        ``"exponential"`` (rho(t) = exp(-lam*t)), ``"gaussian"``
        (rho(t) = exp(-lam*t^2)) or ``"user-table"``.
    gamma : float
        Weight in [0, 1] of the correlated error component; 0 means fully
        independent errors, 1 fully correlated.
    lam : float
        Decay rate of the builtin kernels, > 0.  Ignored for tables.
    scale : float, optional
        Compression factor applied to lags.  Finite-design evaluations
        default this to the number of design points when unset.
    table : (ndarray, ndarray), optional
        For ``user-table``: lags (starting at 0, strictly increasing) and
        kernel values (starting at 1, nonincreasing, in [0, 1]).  Lags past
        the end of the table map to 0.
    """

    kernel: str
    gamma: float
    lam: float = 1.0
    scale: Optional[float] = None
    table: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ConfigError(
                f"unknown kernel {self.kernel!r}; choose one of {', '.join(KERNELS)}",
                "correlation.kernel",
            )
        if not (0.0 <= self.gamma <= 1.0) or not np.isfinite(self.gamma):
            raise ConfigError("gamma must lie in [0, 1]", "correlation.gamma")
        if self.kernel != "user-table":
            if not np.isfinite(self.lam) or self.lam <= 0:
                raise ConfigError("lambda must be > 0", "correlation.lambda")
        if self.scale is not None and (not np.isfinite(self.scale) or self.scale <= 0):
            raise ConfigError("scale must be > 0 when given", "correlation.scale")
        if self.kernel == "user-table":
            if self.table is None:
                raise ConfigError("user-table kernel needs a table", "correlation.table")
            ts, vals = self.table
            ts = np.asarray(ts, dtype=float)
            vals = np.asarray(vals, dtype=float)
            if ts.ndim != 1 or ts.shape != vals.shape or ts.size < 2:
                raise ConfigError(
                    "table needs matching 1-d lag and value arrays, length >= 2",
                    "correlation.table",
                )
            if ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
                raise ConfigError(
                    "table lags must start at 0 and increase strictly",
                    "correlation.table",
                )
            if vals[0] != 1.0 or np.any(np.diff(vals) > 0) or np.any(vals < 0) or np.any(vals > 1):
                raise ConfigError(
                    "table values must start at 1, be nonincreasing and lie in [0, 1]",
                    "correlation.table",
                )
            object.__setattr__(self, "table", (ts, vals))

    def with_scale(self, scale):
        from dataclasses import replace

        return replace(self, scale=float(scale))


def rho(spec, t):
    """Kernel value at lag t.  Negative lags are folded: rho(|t|).

    Accepts scalars or arrays and broadcasts elementwise.
    """
    t = np.abs(np.asarray(t, dtype=float))
    if spec.kernel == "exponential":
        out = np.exp(-spec.lam * t)
    elif spec.kernel == "gaussian":
        out = np.exp(-spec.lam * t**2)
    else:
        ts, vals = spec.table
        out = np.interp(t, ts, vals, left=1.0, right=0.0)
    return out if out.ndim else float(out)


def r_scaled(spec, dt):
    """Correlation kernel on the compressed axis: rho(scale * |dt|)."""
    if spec.scale is None:
        raise ConfigError(
            "correlation scale is unset; bind one with with_scale()",
            "correlation.scale",
        )
    return rho(spec, spec.scale * np.abs(np.asarray(dt, dtype=float)))


def q_function(spec, t):
    """Tail sum of kernel values at multiples of the lag: sum_j rho(j*t).

    Requires t > 0; +inf is accepted and maps to 0.  The exponential kernel
    uses its closed form, everything else is summed term by term until the
    increment falls below 1e-12 relative to the running total.  Hitting the
    term cap before convergence raises NumericalError carrying the partial
    sum in its message.
    """
    t = float(t)
    if np.isinf(t) and t > 0:
        return 0.0
    if not np.isfinite(t) or t <= 0:
        raise DomainError(f"tail sum requires a positive lag, got {t}")
    if t > Q_ARGUMENT_CAP:
        return 0.0
    if spec.kernel == "exponential":
        x = spec.lam * t
        if x > 700.0:
            return 0.0
        return 1.0 / np.expm1(x)
    total = 0.0
    for j in range(1, SERIES_MAX_TERMS + 1):
        term = float(rho(spec, j * t))
        total += term
        if term <= SERIES_RELATIVE_TOL * (1.0 + total):
            return total
    raise NumericalError(
        f"kernel tail sum did not converge within {SERIES_MAX_TERMS} terms "
        f"(partial sum {total:.6e} at lag {t:g})"
    )


def q_values(spec, t):
    """Vectorized tail sum over an array of positive lags.

    Entries above the argument cap give 0.  Used by the quadrature layer
    where the lag is the reciprocal of a density value.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if spec.kernel == "exponential":
        x = spec.lam * t
        small = (x <= 700.0) & (t <= Q_ARGUMENT_CAP)
        out[small] = 1.0 / np.expm1(x[small])
        return out
    active = t <= Q_ARGUMENT_CAP
    idx = np.where(active)[0]
    for i in idx:
        out[i] = q_function(spec, float(t[i]))
    return out
