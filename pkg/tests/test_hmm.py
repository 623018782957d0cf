import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from shared.errors import DimensionMismatchError, DomainError, NonPositiveDefiniteError
from shared.hmm import HmmParams, implied_regression, predictive_distribution
from tests.oracles import joint_gaussian_conditional


def _random_params(rng, n_lags: int, n_terms: int) -> HmmParams:
    a = rng.standard_normal((n_terms, n_terms))
    return HmmParams(
        mu_y=float(rng.normal()),
        alpha=rng.uniform(-0.3, 0.3, size=n_lags),
        sigma2=float(rng.uniform(0.1, 2.0)),
        mu_x=rng.normal(size=n_terms),
        beta=rng.normal(size=n_terms),
        q=a @ a.T + 0.5 * np.eye(n_terms),
    )


def test_no_search_information():
    params = HmmParams(0.2, [0.5, 0.1], 0.3, [1.0, 2.0], [0.0, 0.0], np.eye(2))
    mean, variance = predictive_distribution(params, [1.0, -1.0], [10.0, -4.0])
    assert mean == pytest.approx(0.2 + 0.5 - 0.1, abs=1e-14)
    assert variance == pytest.approx(0.3, abs=1e-14)


def test_scalar_hand_computation():
    params = HmmParams(0.0, [0.0], 1.0, [0.0], [1.0], [[1.0]])
    mean, variance = predictive_distribution(params, [0.0], [2.0])
    assert variance == pytest.approx(0.5, abs=1e-14)
    assert mean == pytest.approx(1.0, abs=1e-14)


def test_matches_joint_gaussian_conditioning():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        params = _random_params(rng, int(rng.integers(1, 4)), int(rng.integers(0, 4)))
        y_lags = rng.normal(size=params.n_lags)
        x_t = rng.normal(size=params.n_terms)
        mean, variance = predictive_distribution(params, y_lags, x_t)
        ref_mean, ref_variance = joint_gaussian_conditional(params, y_lags, x_t)
        assert mean == pytest.approx(ref_mean, abs=1e-10)
        assert variance == pytest.approx(ref_variance, abs=1e-10)
        assert variance > 0


def test_implied_regression_reproduces_the_mean():
    rng = np.random.default_rng(5)
    params = _random_params(rng, 3, 2)
    intercept, lags, terms = implied_regression(params)
    y_lags, x_t = rng.normal(size=3), rng.normal(size=2)
    mean, _ = predictive_distribution(params, y_lags, x_t)
    assert intercept + lags @ y_lags + terms @ x_t == pytest.approx(mean, abs=1e-12)


def test_no_terms():
    params = HmmParams(1.0, [0.5], 2.0, [], [], np.zeros((0, 0)))
    assert predictive_distribution(params, [2.0], []) == (pytest.approx(2.0), pytest.approx(2.0))


def test_indefinite_q_is_rejected():
    params = HmmParams(0.0, [0.1], 1.0, [0.0, 0.0], [1.0, 1.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NonPositiveDefiniteError):
        predictive_distribution(params, [0.0], [0.0, 0.0])


def test_asymmetric_q_is_rejected():
    with pytest.raises(NonPositiveDefiniteError):
        HmmParams(0.0, [0.1], 1.0, [0.0, 0.0], [1.0, 1.0], [[1.0, 0.5], [0.0, 1.0]])


def test_parameter_validation():
    with pytest.raises(DomainError):
        HmmParams(0.0, [0.1], 0.0, [0.0], [1.0], [[1.0]])
    with pytest.raises(DimensionMismatchError):
        HmmParams(0.0, [0.1], 1.0, [0.0, 1.0], [1.0], [[1.0]])
    params = HmmParams(0.0, [0.1], 1.0, [0.0], [1.0], [[1.0]])
    with pytest.raises(DimensionMismatchError):
        predictive_distribution(params, [0.0, 0.0], [1.0])


def test_variance_is_constant_and_mean_is_affine():
    rng = np.random.default_rng(77)
    params = _random_params(rng, 3, 4)
    variances = []
    for _ in range(100):
        _, variance = predictive_distribution(params, rng.normal(size=3), rng.normal(size=4))
        variances.append(variance)
    assert max(variances) - min(variances) <= 1e-12

    step = np.zeros(7)
    step[[0, 5]] = [0.7, -1.3]
    origin, _ = predictive_distribution(params, np.zeros(3), np.zeros(4))
    shifted, _ = predictive_distribution(params, step[:3], step[3:])
    for _ in range(2):
        base = rng.normal(size=7)
        low, _ = predictive_distribution(params, base[:3], base[3:])
        high, _ = predictive_distribution(params, (base + step)[:3], (base + step)[3:])
        assert high - low == pytest.approx(shifted - origin, abs=1e-12)
