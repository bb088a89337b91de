"""Experimental designs in standardized and physical coordinates."""

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .poly1d import Family

MAX_SOBOL_DIM = 16


def sobol_points(M, K):
    """First ``K`` points of the unscrambled Sobol sequence in ``[0, 1)^M``.

    The all-zeros initial point is skipped, so the sequence starts at 0.5.
    """
    M, K = int(M), int(K)
    if M < 1 or K < 1:
        raise ValueError(f"need M >= 1 and K >= 1, got M={M}, K={K}")
    if M > MAX_SOBOL_DIM:
        raise ValueError(
            f"Sobol designs are provisioned up to {MAX_SOBOL_DIM} dimensions (got {M}); "
            "use a pseudo-random design instead"
        )
    engine = qmc.Sobol(M, scramble=False)
    engine.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for K not a power of 2
        return engine.random(K)


@dataclass(frozen=True)
class Sobol:
    name = "sobol"

    def unit_points(self, M, K):
        return sobol_points(M, K)

    def to_dict(self):
        return {"strategy": self.name}


@dataclass(frozen=True)
class PseudoRandom:
    seed: int = 0

    name = "random"

    def unit_points(self, M, K):
        rng = np.random.default_rng(self.seed)
        u = rng.random((K, M))
        # keep away from 0 so the normal inverse CDF stays finite
        return np.where(u == 0.0, np.nextafter(0.0, 1.0), u)

    def to_dict(self):
        return {"strategy": self.name, "seed": self.seed}


def strategy_from_name(name, seed=0):
    name = str(name).lower()
    if name == "sobol":
        return Sobol()
    if name in ("random", "pseudorandom", "mc"):
        return PseudoRandom(int(seed))
    raise ValueError(f"unknown design strategy {name!r}")


@dataclass(frozen=True)
class ExperimentalDesign:
    points_standard: np.ndarray
    points_physical: np.ndarray
    strategy: object

    @property
    def K(self):
        return self.points_standard.shape[0]

    @property
    def M(self):
        return self.points_standard.shape[1]

    def to_csv(self, names=None):
        names = names or [f"x{i + 1}" for i in range(self.M)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in self.points_physical:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def unit_to_standard(families, u):
    """Map points of the unit cube to the standardized weight of each family."""
    u = np.asarray(u, dtype=float)
    xi = np.empty_like(u)
    for i, fam in enumerate(families):
        if Family.parse(fam) is Family.LEGENDRE:
            xi[:, i] = 2.0 * u[:, i] - 1.0
        else:
            xi[:, i] = ndtri(u[:, i])
    return xi


def make_design(prior, K, strategy=None):
    """Design of ``K`` points distributed according to ``prior`` (or any marginal spec)."""
    strategy = Sobol() if strategy is None else strategy
    u = strategy.unit_points(prior.M, K)
    xi = unit_to_standard(prior.families, u)
    return ExperimentalDesign(xi, prior.from_standard(xi), strategy)
