"""Correlation kernels, lag scaling, and the neighbour tail sum."""

import numpy as np
import pytest

from odeng import ConfigError, CorrelationSpec, DomainError, q_function, q_values, rho
from odeng.correlation import r_scaled


def exp_spec(lam=1.0, gamma=0.6, scale=None):
    return CorrelationSpec(kernel="exponential", gamma=gamma, lam=lam, scale=scale)


def test_kernel_values():
    spec = exp_spec(lam=2.0)
    assert rho(spec, 0.0) == 1.0
    assert rho(spec, 1.0) == pytest.approx(np.exp(-2.0))
    assert rho(spec, -1.0) == pytest.approx(np.exp(-2.0))  # folded

    gauss = CorrelationSpec(kernel="gaussian", gamma=0.5, lam=1.0)
    assert rho(gauss, 2.0) == pytest.approx(np.exp(-4.0))

    out = rho(spec, np.array([0.0, 0.5, 1.0]))
    assert out.shape == (3,)


def test_scaled_kernel_compresses_lags():
    spec = exp_spec(lam=1.0, scale=3.0)
    assert r_scaled(spec, 1.0) == pytest.approx(np.exp(-3.0))
    with pytest.raises(ConfigError):
        r_scaled(exp_spec(scale=None), 1.0)


def test_tail_sum_closed_form_matches_series():
    # geometric: sum exp(-lam j t) = 1/(exp(lam t) - 1)
    for lam, t in [(1.0, 1.0), (0.2, 1.0), (1.2, 0.5), (0.05, 3.0)]:
        spec = exp_spec(lam=lam)
        closed = q_function(spec, t)
        direct = sum(np.exp(-lam * j * t) for j in range(1, 4000))
        assert closed == pytest.approx(direct, abs=1e-10)
    # two fixed values, evaluated independently beforehand
    assert q_function(exp_spec(lam=1.0), 1.0) == pytest.approx(
        0.5819767068693265, rel=1e-14
    )
    assert q_function(exp_spec(lam=0.2), 1.0) == pytest.approx(
        4.516655566126994, rel=1e-14
    )


def test_gaussian_tail_sum_direct_sum():
    # sum_j exp(-(2j)^2) computed by independent direct summation
    spec = CorrelationSpec(kernel="gaussian", gamma=0.5, lam=1.0)
    assert q_function(spec, 2.0) == pytest.approx(0.01831575142390913, rel=1e-12)


def test_tail_sum_monotone_decreasing():
    spec = exp_spec(lam=0.7)
    ts = np.linspace(0.1, 5.0, 40)
    vals = [q_function(spec, t) for t in ts]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_tail_sum_edge_arguments():
    spec = exp_spec()
    assert q_function(spec, np.inf) == 0.0
    assert q_function(spec, 1e13) == 0.0  # beyond the argument cap
    with pytest.raises(DomainError):
        q_function(spec, 0.0)
    with pytest.raises(DomainError):
        q_function(spec, -1.0)


def test_vectorized_tail_sum_agrees():
    spec = CorrelationSpec(kernel="gaussian", gamma=0.5, lam=0.8)
    ts = np.array([0.5, 1.0, 2.0, 1e13])
    out = q_values(spec, ts)
    for i, t in enumerate(ts[:-1]):
        assert out[i] == pytest.approx(q_function(spec, float(t)), rel=1e-12)
    assert out[-1] == 0.0

    espec = exp_spec(lam=1.1)
    out = q_values(espec, ts)
    assert out[1] == pytest.approx(q_function(espec, 1.0), rel=1e-14)


def test_user_table_kernel():
    spec = CorrelationSpec(
        kernel="user-table",
        gamma=0.5,
        table=(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.5, 0.0])),
    )
    assert rho(spec, 0.5) == pytest.approx(0.75)  # linear interpolation
    assert rho(spec, 3.0) == 0.0  # past the table end
    # finite support, so the tail sum terminates on its own
    assert q_function(spec, 0.9) == pytest.approx(0.55 + 0.1)


def test_validation_errors():
    with pytest.raises(ConfigError) as err:
        CorrelationSpec(kernel="exponential", gamma=1.5, lam=1.0)
    assert err.value.key == "correlation.gamma"
    with pytest.raises(ConfigError):
        CorrelationSpec(kernel="exponential", gamma=0.5, lam=0.0)
    with pytest.raises(ConfigError):
        CorrelationSpec(kernel="banana", gamma=0.5, lam=1.0)
    with pytest.raises(ConfigError):
        CorrelationSpec(kernel="exponential", gamma=0.5, lam=1.0, scale=-2.0)
    with pytest.raises(ConfigError):
        CorrelationSpec(kernel="user-table", gamma=0.5)  # table missing
    with pytest.raises(ConfigError):
        CorrelationSpec(
            kernel="user-table", gamma=0.5,
            table=(np.array([0.5, 1.0]), np.array([1.0, 0.5])),  # lags not from 0
        )
    with pytest.raises(ConfigError):
        CorrelationSpec(
            kernel="user-table", gamma=0.5,
            table=(np.array([0.0, 1.0]), np.array([0.9, 0.5])),  # values not from 1
        )


def test_with_scale_returns_new_spec():
    spec = exp_spec()
    bound = spec.with_scale(14)
    assert bound.scale == 14.0
    assert spec.scale is None
