"""Independent prior marginals and the physical <-> standardized variable maps."""

import math
from dataclasses import dataclass

import numpy as np

from .poly1d import Family

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def lognormal_params(mean, std):
    """Log-location and log-scale of the lognormal with the given mean and std."""
    if mean <= 0 or std <= 0:
        raise ValueError(f"lognormal mean and std must be positive, got {mean}, {std}")
    scale2 = math.log1p((std / mean) ** 2)
    return math.log(mean) - 0.5 * scale2, math.sqrt(scale2)


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float

    kind = "uniform"
    family = Family.LEGENDRE

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"uniform bounds must satisfy lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def mean(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def std(self):
        return (self.upper - self.lower) / math.sqrt(12.0)

    @property
    def support(self):
        return (self.lower, self.upper)

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.lower) & (x <= self.upper)

    def to_standard(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower) - 1.0

    def from_standard(self, xi):
        return self.lower + 0.5 * (np.asarray(xi, dtype=float) + 1.0) * (self.upper - self.lower)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.in_support(x), -math.log(self.upper - self.lower), -np.inf)

    def log_jacobian(self, x):
        """log |d xi / d x|."""
        return np.full(np.shape(x), math.log(2.0 / (self.upper - self.lower)))

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float

    kind = "gaussian"
    family = Family.HERMITE

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"gaussian std must be positive, got {self.std}")

    @property
    def support(self):
        return (-np.inf, np.inf)

    def in_support(self, x):
        return np.isfinite(np.asarray(x, dtype=float))

    def to_standard(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def from_standard(self, xi):
        return self.mean + self.std * np.asarray(xi, dtype=float)

    def logpdf(self, x):
        z = self.to_standard(x)
        return -0.5 * z**2 - _LOG_SQRT_2PI - math.log(self.std)

    def log_jacobian(self, x):
        return np.full(np.shape(x), -math.log(self.std))

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Lognormal:
    """Lognormal marginal parametrized by the mean and std of ``log x``.

    Use :meth:`from_moments` to build it from the physical mean and std.
    """

    log_location: float
    log_scale: float

    kind = "lognormal"
    family = Family.HERMITE

    def __post_init__(self):
        if not self.log_scale > 0:
            raise ValueError(f"lognormal log_scale must be positive, got {self.log_scale}")

    @classmethod
    def from_moments(cls, mean, std):
        return cls(*lognormal_params(mean, std))

    @property
    def mean(self):
        return math.exp(self.log_location + 0.5 * self.log_scale**2)

    @property
    def std(self):
        s2 = self.log_scale**2
        return math.sqrt(math.expm1(s2) * math.exp(2.0 * self.log_location + s2))

    @property
    def support(self):
        return (0.0, np.inf)

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x > 0) & np.isfinite(x)

    def to_standard(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.log(x) - self.log_location) / self.log_scale

    def from_standard(self, xi):
        return np.exp(self.log_location + self.log_scale * np.asarray(xi, dtype=float))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        ok = self.in_support(x)
        safe = np.where(ok, x, 1.0)
        z = (np.log(safe) - self.log_location) / self.log_scale
        val = -0.5 * z**2 - _LOG_SQRT_2PI - math.log(self.log_scale) - np.log(safe)
        return np.where(ok, val, -np.inf)

    def log_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return -math.log(self.log_scale) - np.log(x)

    def to_dict(self):
        return {
            "kind": self.kind,
            "log_location": self.log_location,
            "log_scale": self.log_scale,
            "mean": self.mean,
            "std": self.std,
        }


def marginal_from_dict(d):
    kind = d.get("kind")
    if kind == "uniform":
        return Uniform(float(d["lower"]), float(d["upper"]))
    if kind == "gaussian":
        return Gaussian(float(d["mean"]), float(d["std"]))
    if kind == "lognormal":
        if "log_location" in d:
            return Lognormal(float(d["log_location"]), float(d["log_scale"]))
        return Lognormal.from_moments(float(d["mean"]), float(d["std"]))
    raise ValueError(f"unknown marginal kind {kind!r}")


def affine_coeffs(marginal):
    """``(d0, d1)`` such that ``x = d0 * Psi_0 + d1 * Psi_1`` in the marginal's orthonormal basis."""
    if isinstance(marginal, Gaussian):
        return marginal.mean, marginal.std
    if isinstance(marginal, Uniform):
        # Legendre Psi_1(xi) = sqrt(3) xi
        return marginal.mean, 0.5 * (marginal.upper - marginal.lower) / math.sqrt(3.0)
    raise TypeError(
        f"{type(marginal).__name__} is not an affine map of its standardized variable; "
        "use lognormal_qoi_coeffs instead"
    )


class PriorSpec:
    """Product of independent marginals."""

    def __init__(self, marginals):
        self.marginals = tuple(marginals)
        if not self.marginals:
            raise ValueError("a prior needs at least one marginal")

    def __repr__(self):
        return f"{type(self).__name__}({list(self.marginals)!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self.marginals == other.marginals

    def __hash__(self):
        return hash((type(self).__name__, self.marginals))

    def __len__(self):
        return len(self.marginals)

    @property
    def M(self):
        return len(self.marginals)

    @property
    def families(self):
        return tuple(m.family for m in self.marginals)

    @property
    def means(self):
        return np.array([m.mean for m in self.marginals])

    @property
    def stds(self):
        return np.array([m.std for m in self.marginals])

    def _points(self, x):
        # A 1-d array is one point when M > 1 and a column of points when M == 1.
        x = np.asarray(x, dtype=float)
        single = x.ndim == 0 or (x.ndim == 1 and self.M > 1)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x[:, None] if self.M == 1 else x[None, :]
        if x.ndim != 2 or x.shape[1] != self.M:
            raise ValueError(f"expected points with {self.M} coordinates, got shape {x.shape}")
        return x, single

    def in_support(self, x):
        x, single = self._points(x)
        ok = np.ones(x.shape[0], dtype=bool)
        for i, m in enumerate(self.marginals):
            ok &= m.in_support(x[:, i])
        return ok[0] if single else ok

    def to_standard(self, x):
        x, single = self._points(x)
        for i, m in enumerate(self.marginals):
            bad = ~m.in_support(x[:, i])
            if bad.any():
                raise ValueError(
                    f"point {x[bad][0].tolist()} lies outside the support {m.support} of dimension {i}"
                )
        xi = np.column_stack([m.to_standard(x[:, i]) for i, m in enumerate(self.marginals)])
        return xi[0] if single else xi

    def from_standard(self, xi):
        xi, single = self._points(xi)
        for i, m in enumerate(self.marginals):
            if m.family is Family.LEGENDRE:
                bad = (xi[:, i] < -1.0) | (xi[:, i] > 1.0)
                if bad.any():
                    raise ValueError(f"standardized value {xi[bad, i][0]} outside [-1, 1] in dimension {i}")
        x = np.column_stack([m.from_standard(xi[:, i]) for i, m in enumerate(self.marginals)])
        return x[0] if single else x

    def logpdf(self, x):
        x, single = self._points(x)
        out = np.zeros(x.shape[0])
        for i, m in enumerate(self.marginals):
            out = out + m.logpdf(x[:, i])
        return out[0] if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, n, rng):
        """``n`` independent prior draws using a numpy Generator."""
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((n, self.M))
        out = np.empty_like(z)
        for i, m in enumerate(self.marginals):
            if m.family is Family.LEGENDRE:
                out[:, i] = m.from_standard(rng.uniform(-1.0, 1.0, n))
            else:
                out[:, i] = m.from_standard(z[:, i])
        return out

    def to_dict(self):
        return {"marginals": [m.to_dict() for m in self.marginals]}

    @classmethod
    def from_dict(cls, d):
        return cls([marginal_from_dict(m) for m in d["marginals"]])


def to_standard(prior, x):
    return prior.to_standard(x)


def from_standard(prior, xi):
    return prior.from_standard(xi)
