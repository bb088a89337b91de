"""Multi-index truncation sets and tensorized orthonormal polynomial bases."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .poly1d import Family, eval_orthonormal_all

DEFAULT_MAX_TERMS = 2_000_000


def _compositions(M, total):
    """Nonnegative integer vectors of length ``M`` summing to ``total``.

    Yielded in descending lexicographic order, e.g. (1, 0) before (0, 1).
    """
    if M == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(M - 1, total - first):
            yield (first,) + rest


def total_degree_set(M, p, max_terms=DEFAULT_MAX_TERMS):
    """All multi-indices of length ``M`` with total degree at most ``p``."""
    M, p = int(M), int(p)
    if M < 1 or p < 0:
        raise ValueError(f"need M >= 1 and p >= 0, got M={M}, p={p}")
    count = math.comb(M + p, p)
    if count > max_terms:
        raise ValueError(
            f"total-degree set with M={M}, p={p} has {count} terms, above the cap max_terms={max_terms}"
        )
    out = []
    for degree in range(p + 1):
        out.extend(_compositions(M, degree))
    return out


def _qnorm(alpha, q):
    return sum(a**q for a in alpha) ** (1.0 / q)


def hyperbolic_set(M, p, q, max_terms=DEFAULT_MAX_TERMS):
    """Multi-indices with q-quasinorm at most ``p`` (``0 < q <= 1``)."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if q == 1.0:
        return total_degree_set(M, p, max_terms)
    # ||alpha||_q >= ||alpha||_1 for q <= 1, so filtering the total-degree set is exhaustive.
    return [a for a in total_degree_set(M, p, max_terms) if _qnorm(a, q) <= p * (1.0 + 1e-12)]


@dataclass(frozen=True)
class BasisSpec:
    """Tensorized orthonormal basis: one polynomial family per input and a multi-index set."""

    families: tuple
    indices: tuple
    degree: int
    qnorm: float = 1.0

    def __post_init__(self):
        fams = tuple(Family.parse(f) for f in self.families)
        idx = tuple(tuple(int(v) for v in a) for a in self.indices)
        object.__setattr__(self, "families", fams)
        object.__setattr__(self, "indices", idx)
        if not idx or any(idx[0]):
            raise ValueError("the first multi-index must be the all-zeros index")
        if any(len(a) != len(fams) for a in idx):
            raise ValueError("multi-index length does not match the number of families")
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate multi-indices")
        if any(min(a) < 0 for a in idx):
            raise ValueError("multi-index entries must be nonnegative")

    @classmethod
    def build(cls, families, degree, q=1.0, max_terms=DEFAULT_MAX_TERMS):
        families = tuple(Family.parse(f) for f in families)
        indices = hyperbolic_set(len(families), degree, q, max_terms)
        return cls(families, tuple(indices), int(degree), float(q))

    @property
    def M(self):
        return len(self.families)

    @property
    def P(self):
        return len(self.indices)

    def __len__(self):
        return self.P

    @property
    def index_array(self):
        return np.asarray(self.indices, dtype=int).reshape(self.P, self.M)

    def position(self, alpha):
        return self._lookup()[tuple(alpha)]

    def _lookup(self):
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {a: i for i, a in enumerate(self.indices)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def evaluate(self, xi):
        """Basis values at standardized points, shape ``(K, P)``."""
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[None, :] if self.M > 1 or xi.size == 1 else xi[:, None]
        if xi.ndim != 2 or xi.shape[1] != self.M:
            raise ValueError(f"expected points with {self.M} coordinates, got shape {xi.shape}")
        alpha = self.index_array
        out = np.ones((xi.shape[0], self.P))
        for i, fam in enumerate(self.families):
            top = int(alpha[:, i].max())
            if top == 0:
                continue
            table = eval_orthonormal_all(fam, top, xi[:, i])
            out *= table[:, alpha[:, i]]
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"alpha{i + 1}" for i in range(self.M)])
        writer.writerows(self.indices)
        return buf.getvalue()

    @staticmethod
    def indices_from_csv(text):
        rows = list(csv.reader(io.StringIO(text)))
        return [tuple(int(v) for v in row) for row in rows[1:] if row]


def eval_basis(spec, xi):
    """Values of every basis polynomial at a single standardized point."""
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    return spec.evaluate(xi)[0]


def _check_dim(spec, j):
    if not 0 <= j < spec.M:
        raise IndexError(f"dimension {j} out of range for M={spec.M}")


def sub_indices_1d(spec, j):
    """Positions of the indices that vary only in dimension ``j`` (0-based).

    Sorted by the degree in dimension ``j``, so the constant term comes first.
    """
    _check_dim(spec, j)
    alpha = spec.index_array
    others = np.delete(alpha, j, axis=1)
    mask = ~others.any(axis=1)
    pos = np.flatnonzero(mask)
    return pos[np.argsort(alpha[pos, j], kind="stable")]


def sub_indices_2d(spec, j, k):
    """Positions of the indices that vary only in dimensions ``j`` and ``k``."""
    _check_dim(spec, j)
    _check_dim(spec, k)
    if j == k:
        raise ValueError("sub_indices_2d needs two distinct dimensions")
    alpha = spec.index_array
    others = np.delete(alpha, [j, k], axis=1)
    return np.flatnonzero(~others.any(axis=1))


def tensor_coefficients(spec, factors):
    """Coefficients on ``spec`` of a product of univariate expansions.

    ``factors`` maps a dimension to the coefficient vector (indexed by degree) of a
    univariate function of that coordinate; all other coordinates contribute the
    constant 1. Degrees beyond a factor's length contribute zero.
    """
    alpha = spec.index_array
    out = np.ones(spec.P)
    for i in range(spec.M):
        if i in factors:
            c = np.asarray(factors[i], dtype=float)
            padded = np.zeros(int(alpha[:, i].max()) + 1)
            n = min(len(c), len(padded))
            padded[:n] = c[:n]
            out *= padded[alpha[:, i]]
        else:
            out *= alpha[:, i] == 0
    return out
