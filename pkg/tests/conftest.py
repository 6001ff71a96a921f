"""Shared builders for small test problems."""

import numpy as np
import pytest

from odeng import (
    CorrelationSpec,
    Criterion,
    NoiseSpec,
    PopulationProblem,
    PopulationSpec,
    builtin_model,
    parse_model_expression,
)


def make_problem(
    model=None,
    beta0=(1.0, 0.5),
    domain=(0.0, 10.0),
    sigma2=0.01,
    kernel="exponential",
    lam=0.2,
    gamma=0.6,
    scale=None,
    Vp=None,
    criterion=None,
):
    """A compartmental problem by default; every piece overridable."""
    model = model or builtin_model("compartmental-fo")
    beta0 = np.asarray(beta0, dtype=float)
    if Vp is None:
        Vp = np.diag(np.full(model.p, 0.01))
    return PopulationProblem(
        model=model,
        noise=NoiseSpec(sigma2=sigma2),
        correlation=CorrelationSpec(kernel=kernel, gamma=gamma, lam=lam, scale=scale),
        population=PopulationSpec(beta0=beta0, Vp=np.asarray(Vp, dtype=float)),
        domain=domain,
        criterion=criterion or Criterion(type="D"),
    )


@pytest.fixture
def constant_problem():
    """One-parameter constant mean; everything has a closed form."""
    return make_problem(
        model=parse_model_expression("b1", 1),
        beta0=(1.0,),
        domain=(0.0, 1.0),
        sigma2=0.5,
        lam=1.0,
        Vp=[[0.1]],
    )


@pytest.fixture
def quadratic_problem():
    """Quadratic basis on [-1, 1], the classic polynomial test bed."""
    return make_problem(
        model=builtin_model("quadratic"),
        beta0=(1.0, 1.0, 1.0),
        domain=(-1.0, 1.0),
        sigma2=0.5,
        lam=1.2,
        Vp=np.diag([0.09, 0.09, 0.09]),
    )
