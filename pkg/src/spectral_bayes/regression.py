"""Least-squares fitting of expansion coefficients with empirical and LOO errors."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, qr, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .multibasis import BasisSpec

MAX_CONDITION = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"design matrix is rank deficient: condition number estimate {condition:.3e} > {MAX_CONDITION:.0e}")


def min_design_size(P):
    """Smallest admissible number of design points for ``P`` regressors."""
    return max(P + 1, -(-11 * P // 10))


@dataclass(frozen=True)
class FitReport:
    """Least-squares coefficients and error estimates.

    For multi-output fits ``coefficients`` has shape ``(P, n_outputs)`` and every
    error field is an array with one entry per output.
    """

    coefficients: np.ndarray
    empirical_error: object
    loo_error: object
    normalized_empirical: object
    normalized_loo: object
    hat_diagonals: np.ndarray
    K: int
    P: int
    response_variance: object
    condition_number: float

    def to_dict(self, include_coefficients=True):
        def num(v):
            a = np.asarray(v, dtype=float)
            return a.tolist() if a.ndim else float(a)

        d = {
            "K": self.K,
            "P": self.P,
            "empirical_error": num(self.empirical_error),
            "loo_error": num(self.loo_error),
            "normalized_empirical": num(self.normalized_empirical),
            "normalized_loo": num(self.normalized_loo),
            "response_variance": num(self.response_variance),
            "response_variance_ddof": 1,
            "condition_number": float(self.condition_number),
        }
        if include_coefficients:
            d["coefficients"] = num(self.coefficients)
        return d

    @property
    def n_outputs(self):
        return 1 if self.coefficients.ndim == 1 else self.coefficients.shape[1]

    def split(self):
        """One single-output report per column of a multi-output fit."""
        if self.coefficients.ndim == 1:
            return [self]
        return [
            FitReport(
                self.coefficients[:, i],
                float(self.empirical_error[i]),
                float(self.loo_error[i]),
                float(self.normalized_empirical[i]),
                float(self.normalized_loo[i]),
                self.hat_diagonals,
                self.K,
                self.P,
                float(self.response_variance[i]),
                self.condition_number,
            )
            for i in range(self.n_outputs)
        ]


def design_matrix(spec, design):
    """``A[k, l] = Psi_l(xi_k)`` on the standardized design points."""
    xi = getattr(design, "points_standard", design)
    return spec.evaluate(xi)


def _block_slices(K, block):
    for start in range(0, K, block):
        yield slice(start, min(start + block, K))


def lstsq_blocks(get_block, K, P, Y, block=None):
    """Blocked QR least squares.

    ``get_block(slice)`` returns the rows of the design matrix for that slice, so the
    full ``K x P`` matrix never has to be held in memory. Returns the coefficients,
    residuals, hat diagonals and a condition number estimate of the design matrix.
    """
    Y = np.asarray(Y, dtype=float)
    Y2 = Y.reshape(K, -1)
    n_out = Y2.shape[1]
    if block is None:
        block = max(2 * P, 8192 if P < 400 else 4096)
    # Pass 1: R factor of the augmented matrix [A | Y]; its top-right block is Q^T Y.
    R = np.zeros((0, P + n_out))
    for sl in _block_slices(K, block):
        stacked = np.vstack([R, np.hstack([get_block(sl), Y2[sl]])])
        R = qr(stacked, mode="r", overwrite_a=True, check_finite=False)[0][: P + n_out]
    Ra = R[:P, :P]
    diag = np.abs(np.diag(Ra))
    if diag.min() == 0.0 or not np.all(np.isfinite(Ra)):
        raise RankDeficientError(np.inf)
    rcond, info = lapack.dtrcon(Ra, norm="1", uplo="U")
    condition = np.inf if rcond == 0 else 1.0 / rcond
    if condition > MAX_CONDITION:
        raise RankDeficientError(condition)
    coef = solve_triangular(Ra, R[:P, P:], check_finite=False)
    # Pass 2: residuals and hat diagonals h_k = ||R^-T a_k||^2.
    resid = np.empty_like(Y2)
    hat = np.empty(K)
    for sl in _block_slices(K, block):
        A = get_block(sl)
        resid[sl] = Y2[sl] - A @ coef
        Z = solve_triangular(Ra, A.T, trans="T", check_finite=False)
        hat[sl] = np.einsum("ij,ij->j", Z, Z)
    return coef, resid, hat, condition


def _report(coef, resid, hat, Y2, condition, single):
    K, P = resid.shape[0], coef.shape[0]
    if np.any(hat >= 1.0 - 1e-12):
        raise ValueError("a hat diagonal equals one; the leave-one-out error is undefined (K too small?)")
    emp = np.mean(resid**2, axis=0)
    loo = np.mean((resid / (1.0 - hat)[:, None]) ** 2, axis=0)
    var = np.var(Y2, axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_emp = np.where(var > 0, emp / var, np.where(emp == 0, 0.0, np.inf))
        n_loo = np.where(var > 0, loo / var, np.where(loo == 0, 0.0, np.inf))
    if single:
        coef, emp, loo, n_emp, n_loo, var = coef[:, 0], emp[0], loo[0], n_emp[0], n_loo[0], var[0]
        emp, loo, n_emp, n_loo, var = (float(v) for v in (emp, loo, n_emp, n_loo, var))
    return FitReport(coef, emp, loo, n_emp, n_loo, hat, K, P, var, float(condition))


def _check_size(K, P):
    need = min_design_size(P)
    if K < need:
        raise ValueError(f"design size K={K} is too small for P={P} basis terms: need K >= max(P+1, ceil(1.1 P)) = {need}")


def ols_fit(A, Y):
    """Ordinary least squares with hat diagonals and the LOO shortcut."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-d matrix")
    Y = np.asarray(Y, dtype=float)
    K, P = A.shape
    if Y.shape[0] != K:
        raise ValueError(f"A has {K} rows but Y has {Y.shape[0]}")
    _check_size(K, P)
    coef, resid, hat, cond = lstsq_blocks(lambda sl: A[sl], K, P, Y)
    return _report(coef, resid, hat, Y.reshape(K, -1), cond, Y.ndim == 1)


def fit_basis(spec, xi, Y, block=None):
    """Least squares on ``spec`` evaluated at standardized points, block by block."""
    xi = np.asarray(xi, dtype=float).reshape(-1, spec.M)
    Y = np.asarray(Y, dtype=float)
    K, P = xi.shape[0], spec.P
    if Y.shape[0] != K:
        raise ValueError(f"{K} design points but {Y.shape[0]} responses")
    _check_size(K, P)
    coef, resid, hat, cond = lstsq_blocks(lambda sl: spec.evaluate(xi[sl]), K, P, Y, block)
    return _report(coef, resid, hat, Y.reshape(K, -1), cond, Y.ndim == 1)


def loo_by_refit(A, Y):
    """Leave-one-out error by ``K`` explicit refits (reference implementation)."""
    A = np.asarray(A, dtype=float)
    Y = np.asarray(Y, dtype=float)
    K, P = A.shape
    if K < P + 1:
        raise ValueError(f"need K >= P + 1 for leave-one-out, got K={K}, P={P}")
    errs = np.empty(K)
    keep = np.ones(K, dtype=bool)
    for k in range(K):
        keep[k] = False
        coef = np.linalg.lstsq(A[keep], Y[keep], rcond=None)[0]
        errs[k] = Y[k] - A[k] @ coef
        keep[k] = True
    return float(np.mean(errs**2))


class PolynomialChaosExpansion(RegressorMixin, BaseEstimator):
    """Least-squares polynomial chaos surrogate of a (possibly vector-valued) model.

    Parameters
    ----------
    prior : PriorSpec
        Input distribution; fixes the polynomial families and the standardization.
    degree : int
        Maximal total degree of the basis.
    q : float
        Quasi-norm of the hyperbolic truncation, 1 gives the total-degree set.

    Attributes
    ----------
    basis_ : BasisSpec
    coef_ : ndarray of shape (P,) or (P, n_outputs)
    fit_report_ : FitReport
    """

    def __init__(self, prior=None, degree=3, q=1.0):
        self.prior = prior
        self.degree = degree
        self.q = q

    def fit(self, X, y):
        if self.prior is None:
            raise ValueError("PolynomialChaosExpansion needs a prior")
        X = check_array(X, ensure_min_features=1)
        y = check_array(y, ensure_2d=False, dtype=float)
        self.basis_ = BasisSpec.build(self.prior.families, self.degree, self.q)
        self.n_features_in_ = X.shape[1]
        self.fit_report_ = fit_basis(self.basis_, self.prior.to_standard(X), y)
        self.coef_ = self.fit_report_.coefficients
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.basis_.evaluate(self.prior.to_standard(X)) @ self.coef_

    @property
    def mean_(self):
        check_is_fitted(self, "coef_")
        return self.coef_[0]

    @property
    def variance_(self):
        check_is_fitted(self, "coef_")
        return np.sum(self.coef_[1:] ** 2, axis=0)
