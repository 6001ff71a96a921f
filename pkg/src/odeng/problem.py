"""Shared problem types: designs, population structure, optimality criteria.

A PopulationProblem bundles everything the design machinery needs: the mean
model with its nominal parameters, the noise scale, the correlation
structure, the between-subject covariance, the time window, and the
optimality criterion.  It is deliberately a passive value object; all
computation lives in the covariance, density and optimize modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .correlation import CorrelationSpec
from .errors import ConfigError, DomainError
from .models import ModelSpec, NoiseSpec, auc_gradient

__all__ = ["ExactDesign", "PopulationSpec", "Criterion", "PopulationProblem"]

# Minimal allowed spacing between design points, as a fraction of the window
# length.  Spacings below this make the correlated error covariance
# numerically indistinguishable from singular.
SPACING_FLOOR_FRACTION = 1e-6

CRITERION_TYPES = ("D", "c", "AUC")


@dataclass(frozen=True)
class ExactDesign:
    """An ordered set of sampling times.

    Points must increase strictly.  Membership in a problem's time window
    and the minimal-spacing rule are checked by :meth:`validate_for`, since
    a bare design does not know its window.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float)).copy()
        if pts.ndim != 1 or pts.size == 0:
            raise ConfigError("design must be a nonempty 1-d array of times")
        if not np.all(np.isfinite(pts)):
            raise ConfigError("design contains non-finite times")
        if np.any(np.diff(pts) <= 0):
            raise ConfigError("design points must increase strictly")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return int(self.points.size)

    def validate_for(self, problem) -> None:
        lo, hi = problem.domain
        pts = self.points
        if pts[0] < lo or pts[-1] > hi:
            raise DomainError(
                f"design points must lie in [{lo:g}, {hi:g}], got range "
                f"[{pts[0]:g}, {pts[-1]:g}]"
            )
        if self.n < problem.model.p:
            raise DomainError(
                f"need at least p={problem.model.p} points, got {self.n}"
            )
        if self.n > 1:
            floor = problem.spacing_floor
            gap = float(np.min(np.diff(pts)))
            if gap < floor:
                raise DomainError(
                    f"minimal spacing {gap:.3e} is below the floor {floor:.3e}"
                )


@dataclass(frozen=True)
class PopulationSpec:
    """Nominal parameter vector and between-subject covariance.

    The covariance is symmetrized on construction; eigenvalues are required
    to be >= -1e-10 and small negative ones are clipped to zero so the
    matrix stored here is exactly positive semidefinite.
    """

    beta0: np.ndarray
    Vp: np.ndarray

    def __post_init__(self):
        beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=float)).copy()
        Vp = np.asarray(self.Vp, dtype=float).copy()
        p = beta0.size
        if Vp.shape != (p, p):
            raise ConfigError(
                f"Vp must be {p}x{p} to match beta0, got {Vp.shape}", "population.Vp"
            )
        if not np.all(np.isfinite(beta0)) or not np.all(np.isfinite(Vp)):
            raise ConfigError("beta0 and Vp must be finite", "population")
        scale = max(1.0, float(np.max(np.abs(Vp))))
        if np.max(np.abs(Vp - Vp.T)) > 1e-12 * scale:
            raise ConfigError("Vp must be symmetric", "population.Vp")
        Vp = 0.5 * (Vp + Vp.T)
        w, U = np.linalg.eigh(Vp)
        if np.min(w) < -1e-10 * scale:
            raise ConfigError(
                f"Vp has negative eigenvalue {np.min(w):.3e}", "population.Vp"
            )
        w = np.clip(w, 0.0, None)
        Vp = (U * w) @ U.T
        Vp = 0.5 * (Vp + Vp.T)
        beta0.flags.writeable = False
        Vp.flags.writeable = False
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "Vp", Vp)

    @property
    def p(self) -> int:
        return int(self.beta0.size)


@dataclass(frozen=True)
class Criterion:
    """Optimality criterion: D, c, or AUC.

    * ``D`` minimizes the determinant of the estimator covariance.
    * ``c`` minimizes the variance of a fixed linear combination; the
      direction vector must be supplied and nonzero.
    * ``AUC`` is the c-criterion with the direction set to the gradient of
      the model's area under the curve at the nominal parameters.
    """

    type: str
    c: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.type not in CRITERION_TYPES:
            raise ConfigError(
                f"criterion type must be one of {', '.join(CRITERION_TYPES)}",
                "criterion.type",
            )
        if self.type == "c":
            if self.c is None:
                raise ConfigError("c-criterion needs a direction vector", "criterion.c")
            c = np.atleast_1d(np.asarray(self.c, dtype=float)).copy()
            if not np.all(np.isfinite(c)) or not np.any(c != 0):
                raise ConfigError(
                    "criterion direction must be finite and nonzero", "criterion.c"
                )
            c.flags.writeable = False
            object.__setattr__(self, "c", c)
        elif self.c is not None:
            raise ConfigError(
                f"criterion type {self.type!r} does not take a direction vector",
                "criterion.c",
            )


@dataclass(frozen=True)
class PopulationProblem:
    """Everything needed to evaluate and optimize designs for one study."""

    model: ModelSpec
    noise: NoiseSpec
    correlation: CorrelationSpec
    population: PopulationSpec
    domain: Tuple[float, float]
    criterion: Criterion = field(default_factory=lambda: Criterion(type="D"))

    def __post_init__(self):
        lo, hi = (float(self.domain[0]), float(self.domain[1]))
        if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
            raise ConfigError("domain must be a finite interval [lo, hi] with hi > lo", "domain")
        object.__setattr__(self, "domain", (lo, hi))
        if self.population.p != self.model.p:
            raise ConfigError(
                f"beta0 has length {self.population.p} but model "
                f"{self.model.name!r} has p={self.model.p}",
                "population.beta0",
            )
        if self.criterion.type == "c" and self.criterion.c.size != self.model.p:
            raise ConfigError(
                f"criterion direction has length {self.criterion.c.size}, "
                f"expected p={self.model.p}",
                "criterion.c",
            )
        # Fail early if the nominal parameters sit outside the model's
        # valid region (e.g. coincident compartmental rates).
        self.model.check_params(self.population.beta0)

    @property
    def beta0(self) -> np.ndarray:
        return self.population.beta0

    @property
    def width(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def spacing_floor(self) -> float:
        return SPACING_FLOOR_FRACTION * self.width

    def criterion_vector(self) -> Optional[np.ndarray]:
        """Direction vector of the criterion; None for the D-criterion."""
        if self.criterion.type == "D":
            return None
        if self.criterion.type == "c":
            return self.criterion.c
        return auc_gradient(self.model, self.beta0)

    def at_beta(self, beta) -> "PopulationProblem":
        """Same problem with nominal parameters moved to ``beta``."""
        return replace(
            self, population=replace(self.population, beta0=np.asarray(beta, dtype=float))
        )
