"""Mean models: values, gradients, AUC structure, parameter checks."""

import numpy as np
import pytest

from odeng import (
    ConfigError,
    DomainError,
    ExpressionError,
    NoiseSpec,
    UnsupportedCriterionError,
    auc_gradient,
    builtin_model,
    parse_model_expression,
)
from odeng.models import BUILTIN_MODEL_NAMES, regression_vector


def central_diff(fun, b, k, h):
    bp = np.array(b, dtype=float)
    bm = bp.copy()
    bp[k] += h
    bm[k] -= h
    return (fun(bp) - fun(bm)) / (2.0 * h)


def test_builtin_names_complete():
    for name in BUILTIN_MODEL_NAMES:
        degree = 2 if name == "polynomial" else None
        model = builtin_model(name, degree)
        assert model.p >= 1
    with pytest.raises(ConfigError):
        builtin_model("nope")


def test_polynomial_requires_degree():
    with pytest.raises(ConfigError):
        builtin_model("polynomial")
    with pytest.raises(ConfigError):
        builtin_model("polynomial", 0)
    assert builtin_model("polynomial", 3).p == 4


def test_quadratic_is_linear_basis():
    model = builtin_model("quadratic")
    assert model.linear
    g = model.grad(2.0, None)
    assert np.allclose(g, [1.0, 2.0, 4.0])
    assert model.eta(2.0, (1.0, 1.0, 1.0)) == pytest.approx(7.0)


def test_absorption_elimination_value():
    # 28*(exp(-0.2) - exp(-0.135)), checked on a calculator to full precision
    model = builtin_model("bateman3")
    value = model.eta(1.0, np.array([0.2, 0.135, 28.0]))
    assert value == pytest.approx(-1.5395844410814727, rel=1e-14)


def test_two_rate_profile_value():
    # b1/(b1-b2)*(exp(-b2 t)-exp(-b1 t)) at t=2, b=(1, 0.5):
    # 2*(exp(-1) - exp(-2)) = 0.46508831586965926
    model = builtin_model("compartmental-fo")
    value = model.eta(2.0, np.array([1.0, 0.5]))
    assert value == pytest.approx(0.46508831586965926, rel=1e-14)


def _fd_check(model, draws, rng, t_range=(0.1, 5.0)):
    worst = 0.0
    for _ in range(draws):
        b = model_draw(model, rng)
        t = rng.uniform(*t_range)
        g = model.grad(t, b)

        def fun(bb, t=t):
            return model.eta(t, bb)

        for k in range(model.p):
            h = 1e-6 * max(abs(b[k]), 1.0)
            fd = central_diff(fun, b, k, h)
            scale = max(abs(fd), abs(g[k]), 1e-8)
            worst = max(worst, abs(fd - g[k]) / scale)
    return worst


def model_draw(model, rng):
    if model.name == "exp-elimination":
        return np.array([rng.uniform(0.5, 30.0), rng.uniform(0.1, 2.0)])
    if model.name == "bateman3":
        return np.array([
            rng.uniform(0.1, 2.0), rng.uniform(0.05, 1.5), rng.uniform(1.0, 30.0)
        ])
    if model.name == "compartmental-fo":
        b1 = rng.uniform(0.5, 3.0)
        # keep the two rates well separated; near-coincidence is rejected
        return np.array([b1, b1 * rng.uniform(0.2, 0.7)])
    return rng.uniform(0.5, 2.0, size=model.p)


@pytest.mark.parametrize("name", ["exp-elimination", "bateman3", "compartmental-fo"])
def test_gradients_match_finite_differences(name):
    model = builtin_model(name)
    rng = np.random.default_rng(42)
    assert _fd_check(model, 100, rng) < 1e-6


def test_expression_gradient_matches_closed_form():
    model = parse_model_expression("b1*exp(-b2*t)", 2)
    closed = builtin_model("exp-elimination")
    rng = np.random.default_rng(7)
    for _ in range(20):
        b = np.array([rng.uniform(1.0, 20.0), rng.uniform(0.1, 1.5)])
        t = rng.uniform(0.0, 5.0)
        assert np.allclose(model.grad(t, b), closed.grad(t, b), rtol=1e-6, atol=1e-9)


def test_auc_gradients():
    # closed forms: d/db of integral over [0, inf) of the mean curve
    b = np.array([0.2, 0.135, 28.0])
    g = auc_gradient(builtin_model("bateman3"), b)
    assert np.allclose(
        g, [-700.0, 1536.351165980796, -2.4074074074074074], rtol=1e-12
    )

    g = auc_gradient(builtin_model("compartmental-fo"), np.array([1.0, 0.5]))
    assert np.allclose(g, [0.0, -4.0], rtol=1e-12)

    g = auc_gradient(builtin_model("exp-elimination"), np.array([30.0, 0.75]))
    assert np.allclose(g, [4.0 / 3.0, -53.333333333333336], rtol=1e-12)


def test_auc_unsupported_for_polynomials():
    with pytest.raises(UnsupportedCriterionError):
        auc_gradient(builtin_model("quadratic"), np.array([1.0, 1.0, 1.0]))


def test_coincident_rates_rejected():
    model = builtin_model("compartmental-fo")
    with pytest.raises(DomainError):
        model.eta(1.0, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        model.grad(1.0, np.array([0.5, 0.5 + 1e-9]))
    with pytest.raises(DomainError):
        model.check_params(np.array([1.0, 1.0 - 1e-8]))


def test_wrong_parameter_count_rejected():
    model = builtin_model("exp-elimination")
    with pytest.raises(DomainError):
        model.check_params(np.array([1.0, 2.0, 3.0]))


def test_expression_model_validation():
    with pytest.raises(ExpressionError):
        parse_model_expression("b3*t", 2)  # references b3 with p=2
    with pytest.raises(ConfigError):
        parse_model_expression("b1", 0)
    with pytest.raises(ExpressionError):
        parse_model_expression("log(-t)", 1)  # not finite at the probe point


def test_regression_vector_divides_by_scale():
    model = builtin_model("quadratic")
    noise = NoiseSpec.from_expression(0.5, "t+1")
    g = regression_vector(model, noise, 1.0, np.array([1.0, 1.0, 1.0]))
    assert np.allclose(g, np.array([1.0, 1.0, 1.0]) / 2.0)


def test_noise_scale_validation():
    noise = NoiseSpec.from_expression(1.0, "t-1")
    with pytest.raises(DomainError):
        noise.scale_at(1.0)  # h(1) = 0 is not positive
    with pytest.raises(ExpressionError):
        NoiseSpec.from_expression(1.0, "b1*t")  # parameters not allowed in h
    with pytest.raises(ConfigError):
        NoiseSpec(sigma2=-1.0)
