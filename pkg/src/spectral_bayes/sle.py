"""Spectral likelihood expansions and the posterior quantities read off their coefficients."""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb, gammaln
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .multibasis import BasisSpec, sub_indices_1d, sub_indices_2d
from .poly1d import Family, eval_orthonormal_all, jacobi_coefficients
from .regression import FitReport, fit_basis
from .transforms import Gaussian, Lognormal, PriorSpec, Uniform

CORRELATION_SLACK = 1e-6


class SpectralWarning(UserWarning):
    """Nonphysical value (negative evidence or variance) read off an expansion."""


class NegativeEvidenceWarning(SpectralWarning):
    pass


class NegativeVarianceWarning(SpectralWarning):
    pass


@dataclass(frozen=True)
class Expansion:
    """Coefficients of a likelihood (or auxiliary quantity) expansion.

    The fitted target is ``exp(log f - log_scale)``, so the represented function
    is ``exp(log_scale) * sum(coeffs * Psi)``. ``prior`` is set only when the
    reference density differs from the prior (auxiliary expansions).
    """

    spec: BasisSpec
    coeffs: np.ndarray
    reference: PriorSpec
    log_scale: float
    fit: FitReport = None
    prior: PriorSpec = None

    @property
    def scale(self):
        return math.exp(self.log_scale)

    @property
    def is_auxiliary(self):
        return self.prior is not None and self.prior != self.reference

    @property
    def b0(self):
        return float(self.coeffs[0])

    def to_dict(self):
        d = {
            "families": [f.value for f in self.spec.families],
            "degree": self.spec.degree,
            "qnorm": self.spec.qnorm,
            "indices": [list(a) for a in self.spec.indices],
            "coefficients": [float(c) for c in self.coeffs],
            "log_scale": float(self.log_scale),
            "reference_kind": "auxiliary" if self.is_auxiliary else "prior",
            "reference": self.reference.to_dict(),
        }
        if self.prior is not None:
            d["prior"] = self.prior.to_dict()
        if self.fit is not None:
            d["fit"] = self.fit.to_dict(include_coefficients=False)
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        spec = BasisSpec(tuple(d["families"]), tuple(tuple(a) for a in d["indices"]), d["degree"], d.get("qnorm", 1.0))
        reference = PriorSpec.from_dict(d["reference"])
        prior = PriorSpec.from_dict(d["prior"]) if "prior" in d else None
        return cls(spec, np.asarray(d["coefficients"], dtype=float), reference, float(d["log_scale"]), None, prior)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PosteriorSummary:
    evidence: float
    means: np.ndarray
    stds: np.ndarray
    correlations: np.ndarray
    variances: np.ndarray = None
    flags: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "evidence": float(self.evidence),
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "correlations": np.asarray(self.correlations, dtype=float).tolist(),
            "flags": list(self.flags),
        }


def _check_basis(spec, reference):
    if spec.M != reference.M:
        raise ValueError(f"basis has {spec.M} dimensions but the reference has {reference.M}")
    if tuple(spec.families) != tuple(reference.families):
        raise ValueError(
            f"basis families {[f.value for f in spec.families]} are not orthonormal for the reference "
            f"{[f.value for f in reference.families]}"
        )


def evaluate_loglike(loglike, X, vectorized=True):
    """Log-likelihood at each row of ``X`` as a float vector."""
    X = np.asarray(X, dtype=float)
    if vectorized:
        vals = np.asarray(loglike(X), dtype=float).reshape(-1)
        if vals.size != X.shape[0]:
            raise ValueError(f"vectorized log-likelihood returned {vals.size} values for {X.shape[0]} points")
        return vals
    return np.array([float(loglike(x)) for x in X])


def fit_log_target(log_target, reference, spec, xi):
    """Fit ``exp(log_target - shift)`` on standardized points; see :class:`Expansion`."""
    _check_basis(spec, reference)
    log_target = np.asarray(log_target, dtype=float)
    if np.any(np.isnan(log_target)) or np.any(log_target == np.inf):
        bad = np.flatnonzero(np.isnan(log_target) | (log_target == np.inf))[0]
        raise ValueError(f"log-likelihood is not a number or +inf at design point {bad}")
    shift = float(np.max(log_target))
    if shift == -np.inf:
        raise ValueError("the likelihood is identically zero on the experimental design")
    report = fit_basis(spec, xi, np.exp(log_target - shift))
    return Expansion(spec, report.coefficients, reference, shift, report)


def fit_sle(loglike, prior, spec, design, vectorized=True):
    """Spectral likelihood expansion on the prior-orthonormal basis ``spec``.

    ``loglike`` maps a ``(K, M)`` array of physical points to ``K`` log-likelihoods
    (or one point to a float when ``vectorized=False``).
    """
    values = evaluate_loglike(loglike, design.points_physical, vectorized)
    return fit_log_target(values, prior, spec, design.points_standard)


def evidence(e):
    """Model evidence ``scale * b0``; a negative value is returned with a warning."""
    z = e.scale * e.b0
    if z < 0:
        warnings.warn(f"negative evidence estimate {z:.3e}; the expansion is inaccurate", NegativeEvidenceWarning)
    return z


def log_evidence(e):
    if e.b0 <= 0:
        return -np.inf if e.b0 == 0 else np.nan
    return e.log_scale + math.log(e.b0)


def expansion_values(e, x):
    """``sum(coeffs * Psi(xi(x))) / b0`` at physical points."""
    xi = e.reference.to_standard(x)
    return e.spec.evaluate(xi) @ e.coeffs / e.b0


def posterior_surrogate(e, x):
    """Signed posterior density surrogate ``g(x) * sum(b Psi) / b0`` (``g`` is the reference)."""
    x, single = e.reference._points(x)
    val = expansion_values(e, x) * e.reference.pdf(x)
    return float(val[0]) if single else val


def _marginal_factor(e, j, values):
    """Univariate correction ``sum_d b_d Psi_d(xi_j) / b0`` in dimension ``j``."""
    pos = sub_indices_1d(e.spec, j)
    degs = e.spec.index_array[pos, j]
    table = eval_orthonormal_all(e.spec.families[j], int(degs.max()), values)
    return table[..., degs] @ e.coeffs[pos] / e.b0


def _safe_standard(marginal, x):
    x = np.asarray(x, dtype=float)
    ok = marginal.in_support(x)
    xi = marginal.to_standard(np.where(ok, x, marginal.mean))
    return xi, ok


def marginal_1d(e, j):
    """Posterior marginal density of dimension ``j`` (0-based) as a callable; zero off-support."""
    sub_indices_1d(e.spec, j)
    m = e.reference.marginals[j]

    def density(x):
        xi, ok = _safe_standard(m, x)
        val = _marginal_factor(e, j, xi) * np.exp(m.logpdf(np.where(ok, x, m.mean)))
        return np.where(ok, val, 0.0)

    return density


def marginal_2d(e, j, k):
    """Bivariate posterior marginal of dimensions ``j`` and ``k`` as a callable ``f(xj, xk)``."""
    pos = sub_indices_2d(e.spec, j, k)
    mj, mk = e.reference.marginals[j], e.reference.marginals[k]
    alpha = e.spec.index_array[pos]
    def density(xj, xk):
        xj, xk = np.broadcast_arrays(np.asarray(xj, dtype=float), np.asarray(xk, dtype=float))
        zj, okj = _safe_standard(mj, xj)
        zk, okk = _safe_standard(mk, xk)
        tj = eval_orthonormal_all(mj.family, int(alpha[:, j].max()), zj)[..., alpha[:, j]]
        tk = eval_orthonormal_all(mk.family, int(alpha[:, k].max()), zk)[..., alpha[:, k]]
        corr = (tj * tk) @ e.coeffs[pos] / e.b0
        pdf = np.exp(mj.logpdf(np.where(okj, xj, mj.mean)) + mk.logpdf(np.where(okk, xk, mk.mean)))
        return np.where(okj & okk, corr * pdf, 0.0)

    return density


def monomial_coeffs(family, r):
    """Coefficients of ``xi**r`` in the orthonormal basis of ``family``.

    Exact for every ``r`` via the three-term recurrence of the orthonormal family;
    the vector has length ``max(r + 1, 6)``.
    """
    r = int(r)
    if r < 0:
        raise ValueError(f"power must be nonnegative, got {r}")
    a = jacobi_coefficients(Family.parse(family), r + 1)
    c = np.zeros(max(r + 1, 6))
    c[0] = 1.0
    for _ in range(r):
        # xi * Psi_n = a_{n+1} Psi_{n+1} + a_n Psi_{n-1}
        nxt = np.zeros_like(c)
        for n in np.flatnonzero(c):
            nxt[n + 1] += a[n + 1] * c[n]
            if n >= 1:
                nxt[n - 1] += a[n] * c[n]
        c = nxt
    return c


def lognormal_qoi_coeffs(log_location, log_scale, maxdeg):
    """Hermite coefficients of ``exp(log_location + log_scale * xi)`` up to degree ``maxdeg``."""
    n = np.arange(int(maxdeg) + 1)
    if log_scale == 0:
        c = np.zeros(n.size)
        c[0] = math.exp(log_location)
        return c
    if log_scale < 0:
        raise ValueError(f"log_scale must be nonnegative, got {log_scale}")
    return np.exp(log_location + 0.5 * log_scale**2 + n * math.log(log_scale) - 0.5 * gammaln(n + 1.0))


def _affine_standard(marginal):
    """``(A, B)`` with ``x = A + B * xi``."""
    if isinstance(marginal, Gaussian):
        return marginal.mean, marginal.std
    if isinstance(marginal, Uniform):
        return marginal.mean, 0.5 * (marginal.upper - marginal.lower)
    raise TypeError(f"{type(marginal).__name__} is not affine in its standardized variable")


def power_qoi_coeffs(marginal, r, maxdeg, center=0.0):
    """Univariate coefficients of ``(x - center)**r`` for a reference marginal."""
    if isinstance(marginal, Lognormal):
        lam, s = marginal.log_location, marginal.log_scale
        out = np.zeros(maxdeg + 1)
        for i in range(r + 1):
            out += comb(r, i) * (-center) ** (r - i) * lognormal_qoi_coeffs(i * lam, i * s, maxdeg)
        return out
    A, B = _affine_standard(marginal)
    out = np.zeros(max(maxdeg, r) + 1)
    for i in range(r + 1):
        mono = monomial_coeffs(marginal.family, i)[: i + 1]
        out[: i + 1] += comb(r, i) * (A - center) ** (r - i) * B**i * mono
    return out[: maxdeg + 1]


def _contract_1d(e, j, c):
    pos = sub_indices_1d(e.spec, j)
    degs = e.spec.index_array[pos, j]
    c = np.asarray(c, dtype=float)
    keep = degs < c.size
    return float(c[degs[keep]] @ e.coeffs[pos[keep]]) / e.b0


def _max_degree(e, j):
    return int(e.spec.index_array[:, j].max())


def posterior_mean(e, j):
    m = e.reference.marginals[j]
    return _contract_1d(e, j, power_qoi_coeffs(m, 1, _max_degree(e, j)))


def posterior_variance(e, j, mean=None):
    """Posterior variance of dimension ``j``; a negative value is returned with a warning."""
    m = e.reference.marginals[j]
    mean = posterior_mean(e, j) if mean is None else mean
    var = _contract_1d(e, j, power_qoi_coeffs(m, 2, _max_degree(e, j), center=mean))
    if var < 0:
        warnings.warn(f"negative posterior variance {var:.3e} in dimension {j}", NegativeVarianceWarning)
    return var


def posterior_covariance(e, j, k, means=None):
    if j == k:
        raise ValueError("posterior_covariance needs j != k; use posterior_variance for the diagonal")
    pos = sub_indices_2d(e.spec, j, k)
    alpha = e.spec.index_array[pos]
    mj = posterior_mean(e, j) if means is None else means[0]
    mk = posterior_mean(e, k) if means is None else means[1]
    uj = power_qoi_coeffs(e.reference.marginals[j], 1, _max_degree(e, j), center=mj)
    uk = power_qoi_coeffs(e.reference.marginals[k], 1, _max_degree(e, k), center=mk)
    return float((uj[alpha[:, j]] * uk[alpha[:, k]]) @ e.coeffs[pos]) / e.b0


def qoi_expectation(e, qoi_coeffs):
    """Posterior expectation of a QoI given by its coefficients on ``e.spec`` (zero-padded)."""
    c = np.asarray(qoi_coeffs, dtype=float).reshape(-1)
    if c.size > e.spec.P:
        raise ValueError(f"QoI has {c.size} coefficients but the expansion basis has {e.spec.P}")
    return float(c @ e.coeffs[: c.size]) / e.b0


def summarize(e):
    """Evidence, means, standard deviations and correlations."""
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SpectralWarning)
        z = evidence(e)
        M = e.spec.M
        means = np.array([posterior_mean(e, j) for j in range(M)])
        var = np.array([posterior_variance(e, j, means[j]) for j in range(M)])
    for w in caught:
        if issubclass(w.category, NegativeEvidenceWarning):
            flags.append("negative_evidence")
        elif issubclass(w.category, NegativeVarianceWarning):
            flags.append("negative_variance")
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    stds = np.sqrt(np.where(var >= 0, var, np.nan))
    corr = np.eye(M)
    for j in range(M):
        for k in range(j + 1, M):
            cov = posterior_covariance(e, j, k, (means[j], means[k]))
            rho = cov / (stds[j] * stds[k])
            if np.isfinite(rho) and abs(rho) > 1.0:
                if abs(rho) > 1.0 + CORRELATION_SLACK:
                    raise ValueError(f"correlation {rho:.6f} between dimensions {j} and {k} lies outside [-1, 1]")
                rho = math.copysign(1.0, rho)
            corr[j, k] = corr[k, j] = rho
    return PosteriorSummary(z, means, stds, corr, var, tuple(dict.fromkeys(flags)))


class SpectralLikelihoodExpansion(BaseEstimator):
    """Estimator that fits a spectral likelihood expansion from log-likelihood samples.

    Parameters
    ----------
    prior : PriorSpec
    degree : int
        Maximal total degree of the basis.
    q : float
        Hyperbolic truncation quasi-norm, 1 gives the total-degree set.
    reference : PriorSpec or None
        Auxiliary reference density. ``None`` expands the likelihood about the prior;
        otherwise the estimator fits ``L * prior / reference`` on the reference basis.

    ``fit(X, y)`` takes physical design points ``X`` (distributed like the reference)
    and the log-likelihood values ``y`` at those points.
    """

    def __init__(self, prior=None, degree=5, q=1.0, reference=None):
        self.prior = prior
        self.degree = degree
        self.q = q
        self.reference = reference

    def _reference(self):
        return self.prior if self.reference is None else self.reference

    def fit(self, X, y):
        if self.prior is None:
            raise ValueError("SpectralLikelihoodExpansion needs a prior")
        ref = self._reference()
        X = check_array(X)
        y = check_array(y, ensure_2d=False, ensure_all_finite=False, dtype=float)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"expected {X.shape[0]} log-likelihood values, got shape {y.shape}")
        self.n_features_in_ = X.shape[1]
        self.basis_ = BasisSpec.build(ref.families, self.degree, self.q)
        if self.reference is None:
            target = y
        else:
            from .asle import auxiliary_log_target

            target = auxiliary_log_target(y, self.prior, ref, X)
        e = fit_log_target(target, ref, self.basis_, ref.to_standard(X))
        if self.reference is not None:
            e = Expansion(e.spec, e.coeffs, ref, e.log_scale, e.fit, self.prior)
        self.expansion_ = e
        self.coef_ = e.coeffs
        self.log_scale_ = e.log_scale
        self.fit_report_ = e.fit
        return self

    def predict(self, X):
        """Surrogate of the expanded function (likelihood, or ``L * prior / reference``)."""
        check_is_fitted(self, "expansion_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        e = self.expansion_
        return e.scale * (e.spec.evaluate(e.reference.to_standard(X)) @ e.coeffs)

    def posterior_pdf(self, X):
        check_is_fitted(self, "expansion_")
        return posterior_surrogate(self.expansion_, check_array(X))

    @property
    def evidence_(self):
        check_is_fitted(self, "expansion_")
        return evidence(self.expansion_)

    def marginal(self, j, k=None):
        check_is_fitted(self, "expansion_")
        return marginal_1d(self.expansion_, j) if k is None else marginal_2d(self.expansion_, j, k)

    def summarize(self):
        check_is_fitted(self, "expansion_")
        return summarize(self.expansion_)
