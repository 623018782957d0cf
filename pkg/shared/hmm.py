"""
Linear-Gaussian model linking an AR(N) latent ILI process to search observations.

    y_t = mu_y + sum_j alpha_j y_{t-j} + eps_t,      eps_t ~ N(0, sigma2)
    X_t = mu_x + y_t * beta + u_t,                   u_t ~ N(0, Q)

Conditioning y_t on its lags and on X_t gives a normal whose mean is linear in both,
which is the form the penalized nowcast regression estimates directly.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from shared.errors import DimensionMismatchError, DomainError, NonPositiveDefiniteError


@dataclass(frozen=True)
class HmmParams:
    mu_y: float
    alpha: np.ndarray
    sigma2: float
    mu_x: np.ndarray
    beta: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "mu_x", "beta", "q"):
            array = np.array(getattr(self, name), dtype=float, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        k = self.mu_x.shape[0]
        if self.alpha.ndim != 1 or self.mu_x.ndim != 1 or self.beta.shape != (k,):
            raise DimensionMismatchError("alpha, mu_x and beta must be vectors; mu_x and beta of equal length")
        if self.q.shape != (k, k):
            raise DimensionMismatchError(f"Q must be {k}x{k}, got {self.q.shape}")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not np.allclose(self.q, self.q.T):
            raise NonPositiveDefiniteError("Q must be symmetric")

    @property
    def n_lags(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_terms(self) -> int:
        return self.mu_x.shape[0]

    def q_inv_beta(self) -> np.ndarray:
        if self.n_terms == 0:
            return np.zeros(0)
        return cho_solve(self.q_factor(), self.beta)

    def q_factor(self):
        try:
            return cho_factor(self.q, lower=True)
        except LinAlgError as e:
            raise NonPositiveDefiniteError("Q is not positive definite") from e


def predictive_distribution(params: HmmParams, y_lags, x_t) -> Tuple[float, float]:
    """
    Mean and variance of y_t given its N previous values and the current observations.

    Args:
        params: Model parameters.
        y_lags: (y_{t-1}, ..., y_{t-N}); alpha_j multiplies y_{t-j}.
        x_t: Observation vector at t.

    Returns:
        (mean, variance) of the conditional normal.

    Raises:
        NonPositiveDefiniteError: if Q has no Cholesky factor.
        DimensionMismatchError: if the inputs do not match the parameter dimensions.
    """
    y_lags = np.asarray(y_lags, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    if y_lags.shape != (params.n_lags,) or x_t.shape != (params.n_terms,):
        raise DimensionMismatchError(
            f"expected {params.n_lags} lags and {params.n_terms} observations, "
            f"got {y_lags.shape} and {x_t.shape}"
        )
    q_inv_beta = params.q_inv_beta()
    precision = 1.0 / params.sigma2 + float(params.beta @ q_inv_beta)
    variance = 1.0 / precision
    prior_mean = params.mu_y + float(params.alpha @ y_lags)
    mean = variance * (prior_mean / params.sigma2 + float(q_inv_beta @ (x_t - params.mu_x)))
    return mean, variance


def implied_regression(params: HmmParams) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Intercept, lag coefficients and observation coefficients of the conditional mean.

    The conditional mean equals intercept + lags @ y_lags + terms @ x_t.
    """
    q_inv_beta = params.q_inv_beta()
    variance = 1.0 / (1.0 / params.sigma2 + float(params.beta @ q_inv_beta))
    lags = variance / params.sigma2 * params.alpha
    terms = variance * q_inv_beta
    intercept = variance * (params.mu_y / params.sigma2 - float(q_inv_beta @ params.mu_x))
    return intercept, lags, terms
