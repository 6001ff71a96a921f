"""Mean models, their parameter gradients, and observation-noise scale.

A model describes the per-subject mean response eta(t, b).  Designs are
evaluated through the gradient of eta with respect to b: for a linear model
the gradient is the basis vector itself, for a nonlinear model it is the
local sensitivity at a nominal parameter vector.  The gradient divided by
the noise scale h(t) is the regression vector that enters every information
and covariance computation downstream.

Builtin models
--------------
``quadratic``         basis (1, t, t^2), three parameters
``polynomial``        basis (1, t, ..., t^r), degree r >= 1
``exp-elimination``   b1 * exp(-b2 t), bolus-type decay, two parameters
``bateman3``          b3 * (exp(-b1 t) - exp(-b2 t)), three parameters
``compartmental-fo``  b1/(b1-b2) * (exp(-b2 t) - exp(-b1 t)), two parameters

Arbitrary mean functions can be supplied as expression strings over ``t``
and ``b1..bp``; their gradients are formed by central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    ExpressionError,
    UnsupportedCriterionError,
)
from .expr import parse_expression

__all__ = [
    "ModelSpec",
    "NoiseSpec",
    "builtin_model",
    "parse_model_expression",
    "regression_vector",
    "auc_gradient",
    "BUILTIN_MODEL_NAMES",
]

# Relative half-width used for finite-difference gradients of expression
# models, and the relative closeness of the two rate constants at which the
# first-order compartmental model is considered numerically singular.
FD_RELATIVE_STEP = 1e-6
COMPARTMENTAL_RATE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ModelSpec:
    """A mean model with parameter gradient and optional AUC structure.

    Parameters
    ----------
    name : str
        Identifier used in configs and reports.
    p : int
        Number of subject parameters.
    kind : str
        ``"linear"``, ``"builtin"`` or ``"expression"``.
    eta : callable
        ``eta(t, b) -> float``, the mean response.
    grad : callable
        ``grad(t, b) -> ndarray (p,)``, derivative of eta with respect to b.
    auc : callable, optional
        Closed-form area under the mean curve over [0, inf) as a function
        of b.  None when the model has no such closed form.
    auc_grad : callable, optional
        Gradient of ``auc`` with respect to b.
    basis : tuple of callables, optional
        For linear models, the regression basis; ``grad`` then ignores b.
    check : callable, optional
        Parameter validity check; raises DomainError for b outside the
        region where eta and grad are well defined.
    """

    name: str
    p: int
    kind: str
    eta: Callable
    grad: Callable
    auc: Optional[Callable] = None
    auc_grad: Optional[Callable] = None
    basis: Optional[tuple] = field(default=None, repr=False)
    check: Optional[Callable] = field(default=None, repr=False)

    @property
    def linear(self) -> bool:
        return self.kind == "linear"

    def check_params(self, b) -> None:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.p,):
            raise DomainError(
                f"model {self.name!r} expects {self.p} parameters, got shape {b.shape}"
            )
        if self.check is not None:
            self.check(b)


@dataclass(frozen=True)
class NoiseSpec:
    """Observation noise: variance sigma2 times a squared scale h(t).

    ``h`` defaults to the constant 1 (homoscedastic errors).  It must be
    strictly positive over the design region; evaluation at a point where
    h(t) <= 0 raises DomainError.
    """

    sigma2: float
    h: Optional[Callable] = None
    h_text: Optional[str] = field(default=None, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ConfigError("sigma2 must be a finite nonnegative number", "noise.sigma2")

    @classmethod
    def from_expression(cls, sigma2, text):
        """Build a noise spec with h given as an expression over t."""
        node = parse_expression(text)
        bad = node.param_indices()
        if bad:
            raise ExpressionError(
                f"scale function may only depend on t, found b{min(bad)}"
            )
        with np.errstate(all="ignore"):
            probe = float(node(1.0))
        if not np.isfinite(probe):
            raise ExpressionError("scale function is not finite at probe point t=1")
        return cls(sigma2=float(sigma2), h=lambda t: node(t), h_text=text)

    def scale_at(self, t) -> float:
        if self.h is None:
            return 1.0
        value = float(self.h(t))
        if not np.isfinite(value) or value <= 0:
            raise DomainError(f"noise scale h({t}) = {value} is not positive")
        return value


def _linear_model(name, funcs):
    funcs = tuple(funcs)
    p = len(funcs)

    def eta(t, b):
        return float(np.dot(np.asarray(b, dtype=float), [f(t) for f in funcs]))

    def grad(t, b=None):
        return np.array([float(f(t)) for f in funcs])

    return ModelSpec(name=name, p=p, kind="linear", eta=eta, grad=grad, basis=funcs)


def _monomial(k):
    if k == 0:
        return lambda t: 1.0
    return lambda t: t**k


def _check_compartmental(b):
    b1, b2 = float(b[0]), float(b[1])
    if abs(b1 - b2) < COMPARTMENTAL_RATE_TOLERANCE * max(abs(b1), abs(b2)):
        raise DomainError(
            "compartmental-fo rates are too close: |b1 - b2| < "
            f"{COMPARTMENTAL_RATE_TOLERANCE:g} * max(|b1|, |b2|)"
        )


def _exp_elimination():
    def eta(t, b):
        return b[0] * np.exp(-b[1] * t)

    def grad(t, b):
        d = np.exp(-b[1] * t)
        return np.array([d, -b[0] * t * d])

    def auc(b):
        return b[0] / b[1]

    def auc_grad(b):
        return np.array([1.0 / b[1], -b[0] / b[1] ** 2])

    return ModelSpec(
        name="exp-elimination", p=2, kind="builtin",
        eta=eta, grad=grad, auc=auc, auc_grad=auc_grad,
    )


def _bateman3():
    def eta(t, b):
        return b[2] * (np.exp(-b[0] * t) - np.exp(-b[1] * t))

    def grad(t, b):
        e1 = np.exp(-b[0] * t)
        e2 = np.exp(-b[1] * t)
        return np.array([-b[2] * t * e1, b[2] * t * e2, e1 - e2])

    def auc(b):
        return b[2] * (1.0 / b[0] - 1.0 / b[1])

    def auc_grad(b):
        return np.array([
            -b[2] / b[0] ** 2,
            b[2] / b[1] ** 2,
            1.0 / b[0] - 1.0 / b[1],
        ])

    return ModelSpec(
        name="bateman3", p=3, kind="builtin",
        eta=eta, grad=grad, auc=auc, auc_grad=auc_grad,
    )


def _compartmental_fo():
    # Absorption rate b1, elimination rate b2.  Both eta and grad are
    # rejected when the rates nearly coincide; the shared denominator
    # (b1 - b2)^2 loses all precision there.
    def eta(t, b):
        _check_compartmental(b)
        b1, b2 = b[0], b[1]
        return b1 / (b1 - b2) * (np.exp(-b2 * t) - np.exp(-b1 * t))

    def grad(t, b):
        _check_compartmental(b)
        b1, b2 = b[0], b[1]
        e1 = np.exp(-b1 * t)
        e2 = np.exp(-b2 * t)
        den = (b1 - b2) ** 2
        g1 = (b2 * (e1 - e2) + (b1**2 - b1 * b2) * t * e1) / den
        g2 = (b1 * (e2 - e1) - (b1**2 - b1 * b2) * t * e2) / den
        return np.array([g1, g2])

    def auc(b):
        return 1.0 / b[1]

    def auc_grad(b):
        return np.array([0.0, -1.0 / b[1] ** 2])

    return ModelSpec(
        name="compartmental-fo", p=2, kind="builtin",
        eta=eta, grad=grad, auc=auc, auc_grad=auc_grad,
        check=_check_compartmental,
    )


BUILTIN_MODEL_NAMES = (
    "quadratic",
    "polynomial",
    "exp-elimination",
    "bateman3",
    "compartmental-fo",
)


def builtin_model(name, degree=None) -> ModelSpec:
    """Return one of the builtin models by name.

    ``degree`` applies to ``polynomial`` only and must be at least 1.
    Unknown names raise ConfigError listing the available choices.
    """
    if name == "quadratic":
        return _linear_model("quadratic", [_monomial(k) for k in range(3)])
    if name == "polynomial":
        if degree is None:
            raise ConfigError("polynomial model requires a degree", "model.degree")
        degree = int(degree)
        if degree < 1:
            raise ConfigError("polynomial degree must be >= 1", "model.degree")
        return _linear_model(
            f"polynomial-{degree}", [_monomial(k) for k in range(degree + 1)]
        )
    if name == "exp-elimination":
        return _exp_elimination()
    if name == "bateman3":
        return _bateman3()
    if name == "compartmental-fo":
        return _compartmental_fo()
    raise ConfigError(
        f"unknown model {name!r}; choose one of {', '.join(BUILTIN_MODEL_NAMES)}",
        "model.name",
    )


def parse_model_expression(text, p) -> ModelSpec:
    """Build a model from an expression string over t and b1..bp.

    The expression is probed at t=1, b=(1,...,1); a non-finite value there is
    rejected.  Gradients come from central finite differences with relative
    half-width 1e-6, so the returned model satisfies the same
    gradient-consistency contract as the builtins by construction.
    """
    p = int(p)
    if p < 1:
        raise ConfigError("expression model needs p >= 1", "model.p")
    node = parse_expression(text)
    used = node.param_indices()
    out_of_range = sorted(k for k in used if k > p)
    if out_of_range:
        raise ExpressionError(
            f"expression references b{out_of_range[0]} but the model declares p={p}"
        )

    with np.errstate(all="ignore"):
        probe = float(node(1.0, np.ones(p)))
    if not np.isfinite(probe):
        raise ExpressionError(
            "expression does not evaluate to a finite value at probe point "
            "t=1, b=(1,...,1)"
        )

    def eta(t, b):
        return node(t, np.asarray(b, dtype=float))

    def grad(t, b):
        b = np.asarray(b, dtype=float)
        out = np.empty(p)
        for k in range(p):
            h = FD_RELATIVE_STEP * max(abs(b[k]), 1.0)
            bp = b.copy()
            bm = b.copy()
            bp[k] += h
            bm[k] -= h
            out[k] = (node(t, bp) - node(t, bm)) / (2.0 * h)
        return out

    return ModelSpec(name=f"expr:{text}", p=p, kind="expression", eta=eta, grad=grad)


def regression_vector(model, noise, t, beta0) -> np.ndarray:
    """Gradient of the mean at (t, beta0) divided by the noise scale h(t)."""
    model.check_params(beta0)
    h = noise.scale_at(t)
    return np.asarray(model.grad(t, np.asarray(beta0, dtype=float)), dtype=float) / h


def auc_gradient(model, beta0) -> np.ndarray:
    """Gradient of the area under the mean curve with respect to b at beta0.

    Only models with a closed-form AUC support this; polynomial-basis models
    raise UnsupportedCriterionError.
    """
    if model.auc_grad is None:
        raise UnsupportedCriterionError(
            f"model {model.name!r} has no closed-form area under the curve"
        )
    model.check_params(beta0)
    c = np.asarray(model.auc_grad(np.asarray(beta0, dtype=float)), dtype=float)
    if not np.all(np.isfinite(c)):
        raise DomainError(f"AUC gradient is not finite at beta0={beta0}")
    return c
