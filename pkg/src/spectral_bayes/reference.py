"""Reference solvers: random-walk Metropolis, crude Monte Carlo evidence, conjugate closed forms."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class Chain:
    states: np.ndarray
    acceptance_rate: float
    seed: int
    proposal_std: np.ndarray
    log_density: np.ndarray = None

    @property
    def T(self):
        return self.states.shape[0]

    def after_burn_in(self, fraction=0.1):
        return self.states[int(fraction * self.T):]

    def mean(self, burn_in=0.1):
        return self.after_burn_in(burn_in).mean(axis=0)

    def std(self, burn_in=0.1):
        return self.after_burn_in(burn_in).std(axis=0, ddof=1)

    def corrcoef(self, burn_in=0.1):
        s = self.after_burn_in(burn_in)
        return np.atleast_2d(np.corrcoef(s, rowvar=False))

    def to_csv(self, names=None):
        M = self.states.shape[1]
        names = names or [f"x{i + 1}" for i in range(M)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for row in self.states:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def rwm_sample(logpost, init, T, proposal_std, seed=0):
    """Random-walk Metropolis with Gaussian proposals.

    ``logpost`` returns the unnormalized log posterior of one physical point and
    ``-inf`` outside the support.
    """
    T = int(T)
    if T < 1:
        raise ValueError(f"chain length must be at least 1, got {T}")
    x = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    step = np.broadcast_to(np.asarray(proposal_std, dtype=float), x.shape).copy()
    if np.any(step <= 0):
        raise ValueError(f"proposal std must be positive, got {step.tolist()}")
    lp = float(logpost(x))
    if not np.isfinite(lp):
        raise ValueError(f"log posterior is not finite at the initial point {x.tolist()}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((T, x.size)) * step
    logu = np.log(rng.random(T))
    states = np.empty((T, x.size))
    lps = np.empty(T)
    accepted = 0
    for t in range(T):
        prop = x + noise[t]
        lq = float(logpost(prop))
        if lq - lp >= logu[t]:
            x, lp = prop, lq
            accepted += 1
        states[t] = x
        lps[t] = lp
    return Chain(states, accepted / T, seed, step, lps)


def _posterior_from_loglike(loglike, prior):
    def logpost(x):
        lpr = float(np.asarray(prior.logpdf(x)).reshape(-1)[0])
        if not np.isfinite(lpr):
            return -np.inf
        return float(np.asarray(loglike(x), dtype=float).reshape(-1)[0]) + lpr

    return logpost


def rwm_posterior(loglike, prior, T, seed=0, init=None, proposal_std=None):
    """RWM on ``loglike * prior``; defaults: start at the prior mean, step = prior std / 5."""
    init = prior.means if init is None else init
    proposal_std = prior.stds / 5.0 if proposal_std is None else proposal_std
    return rwm_sample(_posterior_from_loglike(loglike, prior), init, T, proposal_std, seed)


def crude_mc_evidence(loglike, prior, n, seed=0, chunk=1_000_000):
    """Mean of the likelihood over ``n`` prior draws and its standard error.

    ``loglike`` must be vectorized over rows. Computed in the log domain with a
    running max-shift so tiny likelihoods do not underflow.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 draws, got {n}")
    rng = np.random.default_rng(seed)
    logs = []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        logs.append(np.asarray(loglike(prior.sample(m, rng)), dtype=float).reshape(-1))
        done += m
    ll = np.concatenate(logs)
    shift = float(ll.max())
    if shift == -np.inf:
        return 0.0, 0.0
    w = np.exp(ll - shift)
    est = math.exp(shift) * w.mean()
    se = math.exp(shift) * w.std(ddof=1) / math.sqrt(n)
    return float(est), float(se)


def log_mean_exp(values):
    values = np.asarray(values, dtype=float)
    return float(logsumexp(values) - math.log(values.size))


def _check_conjugate(data, sigma, sigma0):
    data = np.atleast_1d(np.asarray(data, dtype=float))
    if data.size < 1:
        raise ValueError("need at least one observation")
    if sigma <= 0 or sigma0 <= 0:
        raise ValueError(f"standard deviations must be positive, got sigma={sigma}, sigma0={sigma0}")
    return data


def conjugate_posterior(data, sigma, mu0, sigma0):
    """Posterior mean and std of a Gaussian mean with known noise std and Gaussian prior."""
    y = _check_conjugate(data, sigma, sigma0)
    N = y.size
    var = 1.0 / (1.0 / sigma0**2 + N / sigma**2)
    return var * (mu0 / sigma0**2 + N * y.mean() / sigma**2), math.sqrt(var)


def log_conjugate_evidence(data, sigma, mu0, sigma0):
    y = _check_conjugate(data, sigma, sigma0)
    N = y.size
    prec = 1.0 / sigma0**2 + N / sigma**2
    lin = mu0 / sigma0**2 + N * y.mean() / sigma**2
    quad = mu0**2 / sigma0**2 + N * np.mean(y**2) / sigma**2 - lin**2 / prec
    return (
        -math.log(sigma0)
        - N * math.log(sigma * math.sqrt(2.0 * math.pi))
        - 0.5 * math.log(prec)
        - 0.5 * quad
    )


def conjugate_evidence(data, sigma, mu0, sigma0):
    """Closed-form marginal likelihood of the conjugate Gaussian model."""
    return math.exp(log_conjugate_evidence(data, sigma, mu0, sigma0))
