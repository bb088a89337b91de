"""Gaussian likelihoods for the benchmark problems."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

_LOG_2PI = math.log(2.0 * math.pi)


def _column(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim else x.reshape(1, 1)


def normal_known_var_loglike(data, sigma, mu):
    """``sum_i log N(y_i | mu, sigma^2)``, vectorized over ``mu``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y = np.asarray(data, dtype=float).reshape(1, -1)
    mu_arr = np.asarray(mu, dtype=float)
    r = (y - _column(mu_arr)) / sigma
    out = -0.5 * np.sum(r**2, axis=1) - y.size * (math.log(sigma) + 0.5 * _LOG_2PI)
    return float(out[0]) if mu_arr.ndim == 0 else out


def normal_loglike(data, mu, sigma):
    """Gaussian log-likelihood with unknown mean and std, vectorized over ``(mu, sigma)``."""
    mu_arr, sig_arr = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    if np.any(sig_arr <= 0):
        raise ValueError("sigma must be positive")
    y = np.asarray(data, dtype=float).reshape(1, -1)
    s = _column(sig_arr)
    r = (y - _column(mu_arr)) / s
    out = -0.5 * np.sum(r**2, axis=1) - y.size * (np.log(s[:, 0]) + 0.5 * _LOG_2PI)
    return float(out[0]) if mu_arr.ndim == 0 and sig_arr.ndim == 0 else out


@dataclass(frozen=True)
class GaussianLikelihoodSpec:
    """``N(data | model_output, noise_cov)`` with a diagonal (vector) or full covariance."""

    data: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        cov = np.asarray(self.noise_cov, dtype=float)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "noise_cov", cov)
        if cov.ndim == 1:
            if cov.shape != data.shape or np.any(cov <= 0):
                raise ValueError("diagonal noise covariance must be positive with one entry per datum")
            logdet = float(np.sum(np.log(cov)))
            chol = None
        else:
            if cov.shape != (data.size, data.size) or not np.allclose(cov, cov.T):
                raise ValueError("noise covariance must be a symmetric N x N matrix")
            try:
                chol = cho_factor(cov, lower=True)
            except np.linalg.LinAlgError:
                raise ValueError("noise covariance is not positive definite") from None
            logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_const", -0.5 * (data.size * _LOG_2PI + logdet))

    @classmethod
    def iid(cls, data, sigma):
        data = np.asarray(data, dtype=float)
        return cls(data, np.full(data.size, float(sigma) ** 2))

    def __call__(self, outputs):
        """Log-likelihood of model outputs (one row per evaluation)."""
        out = np.atleast_2d(np.asarray(outputs, dtype=float))
        r = self.data - out
        if self._chol is None:
            quad = np.sum(r**2 / self.noise_cov, axis=1)
        else:
            quad = np.einsum("ij,ij->i", r, cho_solve(self._chol, r.T).T)
        val = self._const - 0.5 * quad
        return float(val[0]) if np.ndim(outputs) == 1 else val
