"""Univariate orthonormal Hermite and Legendre polynomials.

Hermite polynomials use the probabilists' convention (weight ``N(0, 1)``),
not the physicists' one (weight ``exp(-x**2)``). Legendre polynomials are
orthonormal with respect to the uniform density on ``[-1, 1]``.
"""

import enum
import math

import numpy as np

MAX_DEGREE = 120


class Family(enum.Enum):
    HERMITE = "hermite"
    LEGENDRE = "legendre"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown polynomial family {value!r}") from None

    @property
    def domain(self):
        return (-np.inf, np.inf) if self is Family.HERMITE else (-1.0, 1.0)

    def weight(self, x):
        """Probability density the family is orthonormal against."""
        x = np.asarray(x, dtype=float)
        if self is Family.HERMITE:
            return np.exp(-0.5 * x**2) / math.sqrt(2.0 * math.pi)
        return np.where(np.abs(x) <= 1.0, 0.5, 0.0)

    def quadrature(self, n):
        """Gauss rule with ``n`` nodes whose weights sum to one."""
        if self is Family.HERMITE:
            x, w = np.polynomial.hermite_e.hermegauss(n)
        else:
            x, w = np.polynomial.legendre.leggauss(n)
        return x, w / w.sum()


def _check_degree(degree):
    degree = int(degree)
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    if degree > MAX_DEGREE:
        raise ValueError(f"degree {degree} exceeds the supported maximum {MAX_DEGREE}")
    return degree


def eval_raw_all(family, max_degree, x):
    """Unnormalized polynomials of degree ``0..max_degree`` at ``x``.

    Returns an array of shape ``x.shape + (max_degree + 1,)``.
    """
    family = Family.parse(family)
    max_degree = _check_degree(max_degree)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = x
    for n in range(1, max_degree):
        if family is Family.HERMITE:
            # He_{n+1} = x He_n - n He_{n-1}
            out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
        else:
            # (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}
            out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


def eval_raw(family, degree, x):
    degree = _check_degree(degree)
    return eval_raw_all(family, degree, x)[..., degree]


def norms(family, max_degree):
    family = Family.parse(family)
    max_degree = _check_degree(max_degree)
    n = np.arange(max_degree + 1)
    if family is Family.HERMITE:
        from scipy.special import gammaln

        return np.exp(0.5 * gammaln(n + 1.0))
    return np.sqrt(1.0 / (2.0 * n + 1.0))


def norm(family, degree):
    """L2 norm of the unnormalized polynomial under the family weight."""
    degree = _check_degree(degree)
    return float(norms(family, degree)[degree])


def eval_orthonormal_all(family, max_degree, x):
    """Orthonormal polynomials of degree ``0..max_degree``, last axis is degree."""
    return eval_raw_all(family, max_degree, x) / norms(family, max_degree)


def eval_orthonormal(family, degree, x):
    degree = _check_degree(degree)
    return eval_orthonormal_all(family, degree, x)[..., degree]


def jacobi_coefficients(family, max_degree):
    """Off-diagonal entries ``a_n`` of ``x Psi_n = a_{n+1} Psi_{n+1} + a_n Psi_{n-1}``.

    Entry ``n`` (for ``n >= 1``) couples degrees ``n - 1`` and ``n``; entry 0 is unused.
    """
    family = Family.parse(family)
    n = np.arange(max_degree + 1, dtype=float)
    if family is Family.HERMITE:
        return np.sqrt(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = n / np.sqrt(4.0 * n**2 - 1.0)
    a[0] = 0.0
    return a
