"""Expansions about an auxiliary reference density and two-step adaptation."""

from dataclasses import dataclass

import numpy as np

from .design import make_design
from .multibasis import BasisSpec
from .sle import (
    Expansion,
    evaluate_loglike,
    fit_log_target,
    fit_sle,
    posterior_surrogate,
    summarize,
)
from .transforms import Gaussian, Lognormal, PriorSpec, Uniform


class AuxiliarySpec(PriorSpec):
    """Product of independent marginals used as the reference density ``g``."""

    def check_covers(self, prior):
        """Require ``g > 0`` wherever the prior density is positive."""
        if prior.M != self.M:
            raise ValueError(f"auxiliary density has {self.M} dimensions, prior has {prior.M}")
        for i, (g, p) in enumerate(zip(self.marginals, prior.marginals)):
            glo, ghi = g.support
            plo, phi = p.support
            if glo > plo or ghi < phi:
                raise ValueError(
                    f"auxiliary support {g.support} in dimension {i} does not cover the prior support {p.support}"
                )


def as_auxiliary(spec):
    return spec if isinstance(spec, AuxiliarySpec) else AuxiliarySpec(spec.marginals)


def auxiliary_log_target(loglike_values, prior, aux, X):
    """``log L + log prior - log g`` at physical points, ``-inf`` where the prior vanishes.

    ``loglike_values`` may be an array or a callable evaluated only inside the prior support.
    """
    X = np.asarray(X, dtype=float)
    log_prior = prior.logpdf(X)
    log_g = aux.logpdf(X)
    inside = np.isfinite(log_prior)
    if np.any(log_g[inside] == -np.inf):
        k = np.flatnonzero(inside & (log_g == -np.inf))[0]
        raise ValueError(f"auxiliary density underflows at design point {k}: {X[k].tolist()}")
    if callable(loglike_values):
        ll = np.full(X.shape[0], -np.inf)
        if inside.any():
            ll[inside] = loglike_values(X[inside])
    else:
        ll = np.asarray(loglike_values, dtype=float)
    out = np.full(X.shape[0], -np.inf)
    out[inside] = ll[inside] + log_prior[inside] - log_g[inside]
    return out


def fit_asle(loglike, prior, aux, spec, design, vectorized=True):
    """Expansion of ``G = L * prior / g`` on the ``g``-orthonormal basis ``spec``.

    ``design`` must be drawn from ``aux``. The evidence is ``scale * coeffs[0]``.
    """
    aux = as_auxiliary(aux)
    aux.check_covers(prior)
    X = design.points_physical
    target = auxiliary_log_target(lambda Z: evaluate_loglike(loglike, Z, vectorized), prior, aux, X)
    e = fit_log_target(target, aux, spec, design.points_standard)
    return Expansion(e.spec, e.coeffs, aux, e.log_scale, e.fit, prior)


def posterior_surrogate_asle(e, x):
    """Posterior surrogate ``g(x) * (1 + sum_{a != 0} b_a / b_0 Psi_a(x))``."""
    return posterior_surrogate(e, x)


def coefficient_energy_fraction(e):
    """Share of the coefficient energy carried by the non-constant terms."""
    c2 = np.asarray(e.coeffs) ** 2
    return float(c2[1:].sum() / c2.sum())


def matched_auxiliary(prior, means, stds):
    """Auxiliary density of the same marginal kinds with the given moments.

    Uniform marginals stay identical to the prior marginal.
    """
    out = []
    for m, mu, sd in zip(prior.marginals, means, stds):
        if isinstance(m, Lognormal):
            out.append(Lognormal.from_moments(float(mu), float(sd)))
        elif isinstance(m, Gaussian):
            out.append(Gaussian(float(mu), float(sd)))
        elif isinstance(m, Uniform):
            out.append(m)
        else:
            raise TypeError(f"no auxiliary marginal for {type(m).__name__}")
    return AuxiliarySpec(out)


@dataclass(frozen=True)
class TwoStepResult:
    expansion: Expansion
    stage1: Expansion
    auxiliary: AuxiliarySpec

    @property
    def fit_reports(self):
        return (self.stage1.fit, self.expansion.fit)


def two_step_adapt(loglike, prior, p, K, q=1.0, K2=None, p2=None, strategy=None, vectorized=True):
    """Fit an SLE, build a moment-matched auxiliary density from it, then fit the aSLE.

    Stage 2 uses a fresh design drawn from the auxiliary density. ``K2`` and ``p2``
    default to the stage-1 values.
    """
    K2 = K if K2 is None else K2
    p2 = p if p2 is None else p2
    spec1 = BasisSpec.build(prior.families, p, q)
    stage1 = fit_sle(loglike, prior, spec1, make_design(prior, K, strategy), vectorized)
    s = summarize(stage1)
    if "negative_variance" in s.flags or not np.all(np.isfinite(s.stds)) or np.any(s.stds <= 0):
        raise ValueError(f"stage-1 posterior moments are invalid (stds {s.stds.tolist()}); cannot build the auxiliary density")
    if any(isinstance(m, Lognormal) for m in prior.marginals) and np.any(s.means <= 0):
        raise ValueError(f"stage-1 posterior means {s.means.tolist()} are not positive")
    aux = matched_auxiliary(prior, s.means, s.stds)
    spec2 = BasisSpec.build(aux.families, p2, q)
    stage2 = fit_asle(loglike, prior, aux, spec2, make_design(aux, K2, strategy), vectorized)
    return TwoStepResult(stage2, stage1, aux)
