"""Benchmark inference problems: priors, data and vectorized log-likelihoods."""

from dataclasses import dataclass, field

import numpy as np

from ..transforms import Gaussian, Lognormal, PriorSpec, Uniform
from .gaussian import normal_known_var_loglike, normal_loglike
from .heat import HeatProblem, IHCPLikelihood, Rectangle, make_synthetic_data, sensor_line

CONJUGATE_DATA = np.array([8.78, 4.05, 12.58, 3.60, 11.05, 8.70, 20.80, 1.23, 19.36, 12.07])
CONJUGATE_SIGMA = 5.0
CONJUGATE_PRIOR = (11.5, 1.5)

NORMAL2D_DATA = np.array([31.23, 27.50, 24.91, 25.99, 32.88, 36.41, 27.81, 25.19, 37.96, 34.84])

IHCP_SIGMA_T = 0.25
IHCP2D_KAPPA_TRUE = (32.0, 28.0)
IHCP6D_KAPPA_TRUE = (20.0, 24.0, 28.0, 32.0, 36.0, 40.0)


@dataclass
class Benchmark:
    name: str
    prior: PriorSpec
    loglike: object
    param_names: tuple
    param_units: tuple
    data: np.ndarray
    data_units: str
    extra: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.prior.M

    @property
    def evidence_units(self):
        n = np.asarray(self.data).size
        return "1" if self.data_units == "1" else f"{self.data_units}^-{n}"

    def logpost(self, x):
        """Unnormalized log posterior of one physical point, ``-inf`` off the prior support."""
        lp = self.prior.logpdf(x)
        if not np.isfinite(lp):
            return -np.inf
        return float(self.loglike(np.asarray(x, dtype=float).reshape(1, -1))[0]) + float(lp)


def _rows(x, M):
    return np.asarray(x, dtype=float).reshape(-1, M)


def conjugate1d():
    data, sigma = CONJUGATE_DATA, CONJUGATE_SIGMA

    def loglike(x):
        return normal_known_var_loglike(data, sigma, _rows(x, 1)[:, 0])

    prior = PriorSpec([Gaussian(*CONJUGATE_PRIOR)])
    return Benchmark("conjugate1d", prior, loglike, ("mu",), ("1",), data, "1", {"sigma": sigma})


def normal2d():
    data = NORMAL2D_DATA

    def loglike(x):
        X = _rows(x, 2)
        return normal_loglike(data, X[:, 0], X[:, 1])

    prior = PriorSpec([Uniform(20.0, 40.0), Uniform(2.0, 10.0)])
    return Benchmark("normal2d", prior, loglike, ("mu", "sigma"), ("1", "1"), data, "1")


SENSOR_HEIGHT = 0.95


def ihcp2d_problem(n=20, sensor_height=SENSOR_HEIGHT):
    inclusions = (Rectangle.square((0.3, 0.4), 0.2), Rectangle.square((0.7, 0.6), 0.2))
    return HeatProblem(n, 15.0, inclusions, 200.0, 2000.0, sensor_line(12, sensor_height))


def ihcp6d_problem(n=40, sensor_height=SENSOR_HEIGHT):
    inclusions = tuple(Rectangle.square((c1, c2), 0.15) for c2 in (0.35, 0.65) for c1 in (0.25, 0.5, 0.75))
    return HeatProblem(n, 30.0, inclusions, 200.0, 2000.0, sensor_line(20, sensor_height))


def ihcp_benchmark(name, problem, prior, kappa_true, seed, sigma_t=IHCP_SIGMA_T, data=None):
    """IHCP benchmark on an arbitrary geometry; synthetic data unless ``data`` is given."""
    if prior.M != problem.n_params:
        raise ValueError(f"prior has {prior.M} dimensions but the problem has {problem.n_params} inclusions")
    if data is None:
        data = make_synthetic_data(problem, kappa_true, sigma_t, seed)
    else:
        data = np.asarray(data, dtype=float)
        if data.shape != (problem.n_measurements,):
            raise ValueError(f"expected {problem.n_measurements} measurements, got {data.size}")
    loglike = IHCPLikelihood(problem, data, sigma_t)
    names = tuple(f"kappa{i + 1}" for i in range(problem.n_params))
    extra = {"kappa_true": list(kappa_true), "noise_seed": seed, "sigma_t": sigma_t, "problem": problem}
    return Benchmark(name, prior, loglike, names, ("W/m/K",) * problem.n_params, data, "K", extra)


def ihcp2d(n=20, seed=1, sensor_height=SENSOR_HEIGHT):
    """Two inclusions, uniform prior on [20, 40] W/m/K, 12 sensors."""
    prior = PriorSpec([Uniform(20.0, 40.0), Uniform(20.0, 40.0)])
    return ihcp_benchmark("ihcp2d", ihcp2d_problem(n, sensor_height), prior, IHCP2D_KAPPA_TRUE, seed)


def ihcp6d(n=40, seed=2, sensor_height=SENSOR_HEIGHT):
    """Six inclusions, lognormal prior with mean 30 and std 6 W/m/K, 20 sensors."""
    prior = PriorSpec([Lognormal.from_moments(30.0, 6.0)] * 6)
    return ihcp_benchmark("ihcp6d", ihcp6d_problem(n, sensor_height), prior, IHCP6D_KAPPA_TRUE, seed)


BENCHMARKS = {"conjugate1d": conjugate1d, "normal2d": normal2d, "ihcp2d": ihcp2d, "ihcp6d": ihcp6d}


def get_benchmark(name, **kw):
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BENCHMARKS)}") from None
    return factory(**kw)
