"""Steady-state heat conduction on the unit square with piecewise-constant conductivity.

Cell-centered finite volumes on an ``n x n`` grid. Boundary conditions: fixed
temperature on the top edge (``r2 = 1``), prescribed inward heat flux on the bottom
edge (``r2 = 0``) and insulated left and right edges. Field arrays are indexed
``[row along r2, column along r1]``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import cg

from ..design import make_design
from ..multibasis import BasisSpec
from ..regression import fit_basis
from ..sle import Expansion
from .gaussian import GaussianLikelihoodSpec

DIRECT_SOLVER_MAX_N = 128
RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Rectangle:
    r1_min: float
    r1_max: float
    r2_min: float
    r2_max: float

    @classmethod
    def square(cls, center, side):
        c1, c2 = center
        h = 0.5 * side
        return cls(c1 - h, c1 + h, c2 - h, c2 + h)

    def contains(self, r1, r2):
        return (r1 > self.r1_min) & (r1 < self.r1_max) & (r2 > self.r2_min) & (r2 < self.r2_max)

    def overlaps(self, other):
        return (
            self.r1_min < other.r1_max
            and other.r1_min < self.r1_max
            and self.r2_min < other.r2_max
            and other.r2_min < self.r2_max
        )


@dataclass(frozen=True)
class HeatProblem:
    """Geometry, boundary data and sensor locations; inclusion ``i`` takes ``kappa[i]``."""

    n: int
    kappa0: float
    inclusions: tuple
    dirichlet_top: float
    neumann_bottom_flux: float
    measurement_points: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        object.__setattr__(self, "measurement_points", tuple(tuple(map(float, p)) for p in self.measurement_points))
        if int(self.n) < 2:
            raise ValueError(f"grid needs at least 2 cells per side, got n={self.n}")
        if not self.kappa0 > 0:
            raise ValueError(f"background conductivity must be positive, got {self.kappa0}")
        for i, rect in enumerate(self.inclusions):
            if not (0 <= rect.r1_min < rect.r1_max <= 1 and 0 <= rect.r2_min < rect.r2_max <= 1):
                raise ValueError(f"inclusion {i} {rect} does not lie inside the unit square")
            for j in range(i):
                if rect.overlaps(self.inclusions[j]):
                    raise ValueError(f"inclusions {j} and {i} overlap")
        for p in self.measurement_points:
            if not (0 <= p[0] <= 1 and 0 <= p[1] <= 1):
                raise ValueError(f"measurement point {p} lies outside the unit square")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def n_params(self):
        return len(self.inclusions)

    @property
    def n_measurements(self):
        return len(self.measurement_points)

    def with_grid(self, n):
        return HeatProblem(n, self.kappa0, self.inclusions, self.dirichlet_top, self.neumann_bottom_flux, self.measurement_points)

    def to_dict(self):
        return {
            "n": int(self.n),
            "kappa0": float(self.kappa0),
            "inclusions": [[r.r1_min, r.r1_max, r.r2_min, r.r2_max] for r in self.inclusions],
            "dirichlet_top": float(self.dirichlet_top),
            "neumann_bottom_flux": float(self.neumann_bottom_flux),
            "measurement_points": [list(p) for p in self.measurement_points],
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`; inclusions are ``[r1_min, r1_max, r2_min, r2_max]`` rows."""
        return cls(
            int(d["n"]),
            float(d["kappa0"]),
            tuple(Rectangle(*map(float, r)) for r in d["inclusions"]),
            float(d["dirichlet_top"]),
            float(d["neumann_bottom_flux"]),
            tuple(tuple(p) for p in d["measurement_points"]),
        )

    def cell_centers(self):
        c = (np.arange(self.n) + 0.5) * self.h
        return c

    def _masks(self):
        if "masks" not in self._cache:
            c = self.cell_centers()
            R1, R2 = np.meshgrid(c, c)
            self._cache["masks"] = [rect.contains(R1, R2) for rect in self.inclusions]
        return self._cache["masks"]

    def check_kappa(self, kappa):
        kappa = np.asarray(kappa, dtype=float).reshape(-1)
        if kappa.size != self.n_params:
            raise ValueError(f"expected {self.n_params} conductivities, got {kappa.size}")
        if np.any(~(kappa > 0)):
            raise ValueError(f"conductivities must be positive, got {kappa.tolist()}")
        return kappa

    def conductivity_field(self, kappa):
        """Cell-center conductivities (inclusion membership decided at the cell center)."""
        kappa = self.check_kappa(kappa)
        out = np.full((self.n, self.n), float(self.kappa0))
        for mask, k in zip(self._masks(), kappa):
            out[mask] = k
        return out

    def _interp(self):
        """Sparse bilinear interpolation weights on the extended grid."""
        if "interp" not in self._cache:
            n = self.n
            c = self.cell_centers()
            # extended r1 axis: mirrored insulated edges; r2 axis: top boundary row
            x1 = np.concatenate([[0.0], c, [1.0]])
            x2 = np.concatenate([[0.0], c, [1.0]])
            rows, cols, vals = [], [], []
            for m, (p1, p2) in enumerate(self.measurement_points):
                i = min(max(np.searchsorted(x1, p1, side="right") - 1, 0), n)
                j = min(max(np.searchsorted(x2, p2, side="right") - 1, 0), n)
                t1 = (p1 - x1[i]) / (x1[i + 1] - x1[i])
                t2 = (p2 - x2[j]) / (x2[j + 1] - x2[j])
                for dj, w2 in ((0, 1 - t2), (1, t2)):
                    for di, w1 in ((0, 1 - t1), (1, t1)):
                        w = w1 * w2
                        if w == 0.0:
                            continue
                        ei, ej = i + di, j + dj
                        ci = min(max(ei - 1, 0), n - 1)
                        if ej == n + 1:
                            cols.append(n * n)  # top boundary value
                        else:
                            cols.append(min(max(ej - 1, 0), n - 1) * n + ci)
                        rows.append(m)
                        vals.append(w)
            W = sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_measurements, n * n + 1))
            self._cache["interp"] = W
        return self._cache["interp"]

    def interpolate(self, field):
        ext = np.append(np.asarray(field, dtype=float).reshape(-1), self.dirichlet_top)
        return self._interp() @ ext


@dataclass(frozen=True)
class HeatSolution:
    field: np.ndarray
    measurements: np.ndarray
    residual: float
    bottom_influx: float
    top_outflux: float
    iterations: int = 0


def _pieces(rects, t0, t1, transverse):
    """Midpoints and weights of the transverse sub-intervals of ``[t0, t1]`` cut by rectangle edges."""
    edges = [t0, t1]
    for r in rects:
        for e in ((r.r2_min, r.r2_max) if transverse == 1 else (r.r1_min, r.r1_max)):
            if t0 < e < t1:
                edges.append(e)
    edges = np.unique(edges)
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges) / (t1 - t0)


def _path_lengths(rects, lo, hi, t, transverse):
    """Length of each path ``[lo, hi]`` lying inside each rectangle, at transverse coordinate ``t``."""
    L = np.zeros((lo.size, len(rects)))
    for m, r in enumerate(rects):
        if transverse == 1:
            inside, a, b = r.r2_min < t < r.r2_max, r.r1_min, r.r1_max
        else:
            inside, a, b = r.r1_min < t < r.r1_max, r.r2_min, r.r2_max
        if inside:
            L[:, m] = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
    return L


def _path_family(problem, lo, hi, transverse):
    """Weights ``(n, k)`` and inclusion path lengths ``(n, k, faces, R)`` for one family of faces.

    Row ``i`` of the result describes faces whose transverse extent is ``[i h, (i + 1) h]``.
    """
    n, h, rects = problem.n, problem.h, problem.inclusions
    per_strip = [_pieces(rects, i * h, (i + 1) * h, transverse) for i in range(n)]
    k = max(len(w) for _, w in per_strip)
    W = np.zeros((n, k))
    L = np.zeros((n, k, lo.size, len(rects)))
    for i, (ts, ws) in enumerate(per_strip):
        W[i, : ws.size] = ws
        for j, t in enumerate(ts):
            L[i, j] = _path_lengths(rects, lo, hi, t, transverse)
    return W, L, hi - lo


def _conductances(problem, kappa):
    """Exact face conductances for piecewise-constant conductivity on axis-aligned rectangles.

    Along the path between two cell centers the conductivity combines harmonically, across
    the face arithmetically. On grids whose faces align with the inclusion edges this reduces
    to the harmonic mean of the two neighbouring cells.
    """
    if "paths" not in problem._cache:
        c = problem.cell_centers()
        families = []
        for lo, hi, transverse in ((c[:-1], c[1:], 1), (c[:-1], c[1:], 0), (c[-1:], np.ones(1), 0)):
            W, L, length = _path_family(problem, lo, hi, transverse)
            # resistance = L @ (1/kappa - 1/kappa0) + length / kappa0, flattened for one matvec
            families.append((W[..., None], L.reshape(-1, L.shape[-1]), length / problem.kappa0, L.shape[:3]))
        problem._cache["paths"] = families
    excess = 1.0 / np.asarray(kappa, dtype=float) - 1.0 / problem.kappa0
    h = problem.h
    out = []
    for W, L, base, shape in problem._cache["paths"]:
        res = (L @ excess).reshape(shape) + base
        out.append(np.sum(W * (h / res), axis=1))
    kx, ky, kt = out
    return kx, ky.T, kt[:, 0]


def _assemble(problem, kappa):
    """Diagonal, r1-coupling and r2-coupling entries of the symmetric system, top conductances and right-hand side."""
    n, h = problem.n, problem.h
    kx, ky, kt = _conductances(problem, kappa)
    diag = np.zeros((n, n))
    diag[:, 1:] += kx
    diag[:, :-1] += kx
    diag[1:, :] += ky
    diag[:-1, :] += ky
    diag[-1, :] += kt
    rhs = np.zeros((n, n))
    rhs[-1, :] += kt * problem.dirichlet_top
    rhs[0, :] += problem.neumann_bottom_flux * h
    return diag, kx, ky, kt, rhs


def _apply(diag, kx, ky, T):
    out = diag * T
    out[:, 1:] -= kx * T[:, :-1]
    out[:, :-1] -= kx * T[:, 1:]
    out[1:, :] -= ky * T[:-1, :]
    out[:-1, :] -= ky * T[1:, :]
    return out


def solve_heat(problem, kappa, check=True):
    """Temperature field and interpolated sensor temperatures for conductivities ``kappa``."""
    n = problem.n
    kappa = problem.check_kappa(kappa)
    diag, kx, ky, kt, rhs = _assemble(problem, kappa)
    iterations = 0
    if n <= DIRECT_SOLVER_MAX_N:
        N = n * n
        ab = np.zeros((n + 1, N))
        ab[n] = diag.reshape(-1)
        off1 = np.zeros((n, n))
        off1[:, 1:] = -kx
        ab[n - 1] = off1.reshape(-1)
        ab[0, n:] = -ky.reshape(-1)
        T = solveh_banded(ab, rhs.reshape(-1), check_finite=False).reshape(n, n)
    else:
        mat = _sparse_matrix(diag, kx, ky)
        counter = {"k": 0}

        def cb(_):
            counter["k"] += 1

        maxiter = 20 * n * n
        x, info = cg(mat, rhs.reshape(-1), rtol=1e-13, maxiter=maxiter, callback=cb)
        iterations = counter["k"]
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge after {iterations} iterations")
        T = x.reshape(n, n)
    res = float(np.linalg.norm(_apply(diag, kx, ky, T) - rhs) / np.linalg.norm(rhs))
    if check and res > RESIDUAL_TOL:
        raise SolverError(f"discrete residual {res:.2e} exceeds {RESIDUAL_TOL:.0e} (iterations: {iterations})")
    influx = problem.neumann_bottom_flux * problem.h * n
    outflux = float(np.sum(kt * (T[-1, :] - problem.dirichlet_top)))
    return HeatSolution(T, problem.interpolate(T), res, influx, outflux, iterations)


def _sparse_matrix(diag, kx, ky):
    n = diag.shape[0]
    N = n * n
    off1 = np.zeros((n, n))
    off1[:, 1:] = -kx
    o1 = off1.reshape(-1)[1:]
    on = -ky.reshape(-1)
    return sparse.diags([diag.reshape(-1), o1, o1, on, on], [0, -1, 1, -n, n], shape=(N, N), format="csr")


def forward_model(problem, kappa):
    """Sensor temperatures; rows of a 2-d ``kappa`` are solved one by one."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim == 1:
        return solve_heat(problem, kappa, check=False).measurements
    return np.array([solve_heat(problem, k, check=False).measurements for k in kappa])


def ihcp_loglike(problem, data, sigma_t, kappa):
    """Gaussian log-likelihood of sensor data with iid noise of std ``sigma_t``."""
    like = GaussianLikelihoodSpec.iid(data, sigma_t)
    return like(forward_model(problem, kappa))


class IHCPLikelihood:
    """Vectorized callable ``kappa -> log L`` for a fixed problem and data set."""

    def __init__(self, problem, data, sigma_t):
        self.problem = problem
        self.data = np.asarray(data, dtype=float)
        self.sigma_t = float(sigma_t)
        self._like = GaussianLikelihoodSpec.iid(self.data, self.sigma_t)

    def __call__(self, kappa):
        return self._like(forward_model(self.problem, kappa))


def make_synthetic_data(problem, kappa_true, sigma_t, seed=0):
    """Sensor temperatures at ``kappa_true`` plus iid ``N(0, sigma_t^2)`` noise."""
    clean = solve_heat(problem, kappa_true).measurements
    if sigma_t == 0:
        return clean
    rng = np.random.default_rng(seed)
    return clean + sigma_t * rng.standard_normal(clean.size)


def fit_forward_pce(problem, prior, spec, design):
    """One polynomial chaos expansion per sensor, fitted jointly on the solver outputs."""
    Y = forward_model(problem, design.points_physical)
    report = fit_basis(spec, design.points_standard, Y)
    return [Expansion(spec, r.coefficients, prior, 0.0, r) for r in report.split()]


def forward_pce_predict(expansions, prior, kappa):
    """Evaluate per-sensor expansions at physical points; returns ``(K, n_sensors)``."""
    spec = expansions[0].spec
    C = np.column_stack([e.coeffs for e in expansions])
    return spec.evaluate(prior.to_standard(kappa)) @ C


def fit_forward_pce_default(problem, prior, degree, K, q=1.0, strategy=None):
    spec = BasisSpec.build(prior.families, degree, q)
    return fit_forward_pce(problem, prior, spec, make_design(prior, K, strategy))


def field_to_csv(problem, field):
    """Temperature field as CSV rows ``r1,r2,temperature`` at the cell centers."""
    c = problem.cell_centers()
    T = np.asarray(field, dtype=float)
    lines = ["r1,r2,temperature"]
    for i, r2 in enumerate(c):
        for j, r1 in enumerate(c):
            lines.append(f"{float(r1)!r},{float(r2)!r},{float(T[i, j])!r}")
    return "\n".join(lines) + "\n"


def linear_profile(problem, r2):
    """Exact temperature of the homogeneous problem at height ``r2``."""
    return problem.dirichlet_top + problem.neumann_bottom_flux / problem.kappa0 * (1.0 - np.asarray(r2))


def sensor_line(count, height=0.95):
    return tuple(((i + 0.5) / count, height) for i in range(count))


def richardson_order(coarse, mid, fine):
    """Observed convergence order from three solutions on grids refined by 2."""
    d1 = np.linalg.norm(np.asarray(coarse) - np.asarray(mid))
    d2 = np.linalg.norm(np.asarray(mid) - np.asarray(fine))
    return math.log(d1 / d2, 2)
