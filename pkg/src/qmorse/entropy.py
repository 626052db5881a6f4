"""Covering numbers, near-critical sets and the quantitative Sard bound.

Covering counts of finite samples are estimated from above (explicit covers,
verified) and from below (a maximal ``2*eps``-separated packing: no closed
``eps``-ball can contain two of its points).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .jetcalc.grids import ball_grid, cube_lattice
from .linalg import singular_value_array

# relative slack on "within eps" so that grid points at distance exactly eps
# (up to rounding) count as covered
COVER_RTOL = 1e-9


@dataclass(frozen=True)
class LambdaProfile:
    """Thresholds ``lambda_1 >= ... >= lambda_q >= 0``; ``lambda_0 = 1`` implicitly."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if any(x < 0 or math.isnan(x) for x in lam):
            raise ValueError("lambda entries must be non-negative")
        if any(a < b for a, b in zip(lam, lam[1:])):
            raise ValueError("lambda entries must be non-increasing")
        object.__setattr__(self, "lambdas", lam)

    @property
    def q(self) -> int:
        return len(self.lambdas)

    def products(self) -> list[float]:
        """``lambda_0 * ... * lambda_i`` for ``i = 0..q``."""
        out = [1.0]
        for lam in self.lambdas:
            out.append(out[-1] * lam)
        return out


@dataclass
class CoveringEstimate:
    epsilon: float
    upper: int
    lower: int
    centers: np.ndarray
    method: str = ""

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "upper": self.upper,
            "lower": self.lower,
            "method": self.method,
            "centers": np.asarray(self.centers).tolist(),
        }


@dataclass
class LambdaCriticalSample:
    """Grid points of the Lambda-critical set and their images."""

    points: np.ndarray
    values: np.ndarray
    resolution: int
    sampled: int


@dataclass(frozen=True)
class SardParameters:
    n: int
    m: int
    k: int
    r: float
    K_lip: float
    c: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if min(self.n, self.m, self.k) < 1:
            raise ValueError("n, m, k must be positive")
        if self.r <= 0 or self.delta <= 0 or self.c <= 0 or self.K_lip < 0:
            raise ValueError("r, delta, c must be positive and K_lip non-negative")

    @property
    def q(self) -> int:
        return min(self.n, self.m)

    @property
    def Rk(self) -> float:
        return self.K_lip * self.r ** (self.k - 1) / math.factorial(self.k - 1)


@dataclass
class SardRow:
    epsilon: float
    empirical_upper: int
    bound: float
    ratio: float
    exceeds: bool


# --------------------------------------------------------------------------
# covering numbers


def covers(points: np.ndarray, centers: np.ndarray, epsilon: float) -> bool:
    """Every point within ``epsilon`` (relative slack :data:`COVER_RTOL`) of a center."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        return True
    if len(centers) == 0:
        return False
    d, _ = cKDTree(np.atleast_2d(centers)).query(points)
    return bool(np.all(d <= epsilon * (1 + COVER_RTOL)))


def _neighbors(tree: cKDTree, points: np.ndarray, radius: float) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency of points within ``radius``, diagonal included."""
    N = len(points)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(N)])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(N)])
    return sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(N, N))


def _greedy_max_coverage(points, tree, epsilon):
    adj = _neighbors(tree, points, epsilon * (1 + COVER_RTOL))
    counts = np.asarray(adj.sum(axis=1)).ravel()
    uncovered = np.ones(len(points), dtype=bool)
    centers = []
    while uncovered.any():
        best = int(np.argmax(counts))  # lowest index on ties
        centers.append(best)
        nbrs = adj.indices[adj.indptr[best] : adj.indptr[best + 1]]
        newly = nbrs[uncovered[nbrs]]
        uncovered[newly] = False
        # adjacency is symmetric: each neighbor of a newly covered point loses one
        touched = np.concatenate([adj.indices[adj.indptr[j] : adj.indptr[j + 1]] for j in newly])
        counts -= np.bincount(touched, minlength=len(points))
    return points[centers]


def _farthest_point(points, epsilon):
    centers = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    limit = epsilon * (1 + COVER_RTOL)
    while dist.max() > limit:
        i = int(np.argmax(dist))
        centers.append(i)
        dist = np.minimum(dist, np.linalg.norm(points - points[i], axis=1))
    return points[centers]


def _lattice_cover(points, epsilon):
    n = points.shape[1]
    side = 2 * epsilon / math.sqrt(n)
    lo, hi = points.min(axis=0), points.max(axis=0)
    mid = 0.5 * (lo + hi)
    ncell = np.maximum(1, np.ceil((hi - lo) / side - 1e-9)).astype(int)
    first = mid - 0.5 * (ncell - 1) * side
    idx = np.clip(np.rint((points - first) / side), 0, ncell - 1).astype(int)
    cells = np.unique(idx, axis=0)
    return first + cells * side


def covering_number(points, epsilon: float) -> CoveringEstimate:
    """Upper and lower estimates of ``M(epsilon, points)``.

    The upper count is the smallest verified cover among greedy max-coverage,
    farthest-point traversal (both seeded at index 0, ties to the lowest
    index) and an axis lattice of cubes inscribed in ``epsilon``-balls.  The
    lower count is a maximal ``2*epsilon``-separated packing taken in index
    order.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return CoveringEstimate(epsilon, 0, 0, np.zeros((0, points.shape[-1] if points.ndim == 2 else 1)), "empty")
    points = points.reshape(len(points), -1)
    tree = cKDTree(points)

    candidates = [
        ("greedy", _greedy_max_coverage(points, tree, epsilon)),
        ("farthest", _farthest_point(points, epsilon)),
        ("lattice", _lattice_cover(points, epsilon)),
    ]
    best = None
    for name, centers in candidates:
        if not covers(points, centers, epsilon):
            continue
        if best is None or len(centers) < len(best[1]):
            best = (name, centers)
    name, centers = best

    return CoveringEstimate(epsilon, len(centers), packing_number(points, 2 * epsilon, tree), centers, name)


def packing_number(points: np.ndarray, separation: float, tree: cKDTree | None = None) -> int:
    """Size of a greedy (index-order) set with pairwise distances above ``separation``."""
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return 0
    tree = cKDTree(points) if tree is None else tree
    blocked = np.zeros(len(points), dtype=bool)
    count = 0
    radius = separation * (1 + 2 * COVER_RTOL)
    for i in range(len(points)):
        if blocked[i]:
            continue
        count += 1
        blocked[tree.query_ball_point(points[i], radius)] = True
    return count


def volumetric_ball_bound(n: int, rho: float) -> int:
    return int(math.ceil((1.0 + 2.0 / rho) ** n - 1e-9))


def ball_cover_centers(n: int, rho: float) -> np.ndarray:
    """Explicit centers of ``rho``-balls covering the closed unit ball (``n <= 3``).

    Each lattice cube of side ``2*rho/sqrt(n)`` lies in the ``rho``-ball around
    its center, so the cubes meeting the unit ball give a rigorous cover.  Two
    lattice phases are tried and the smaller kept.
    """
    if n > 3:
        raise ValueError("constructive covers are only built for n <= 3")
    if rho >= 1:
        return np.zeros((1, n))
    if n == 1:
        m = math.ceil(1.0 / rho - 1e-12)
        return (-1.0 + rho * (2 * np.arange(m) + 1)).reshape(-1, 1)
    side = 2 * rho / math.sqrt(n)
    best = None
    for phase in (0.0, 0.5):
        m = math.ceil(1.0 / side) + 1
        ax = (np.arange(-m, m + 1) + phase) * side
        centers = np.stack([g.ravel() for g in np.meshgrid(*([ax] * n), indexing="ij")], axis=-1)
        # nearest point of each cube to the origin
        near = np.maximum(np.abs(centers) - side / 2, 0.0)
        centers = centers[np.linalg.norm(near, axis=1) <= 1.0]
        if best is None or len(centers) < len(best):
            best = centers
    return best


def ball_covering_number(n: int, rho: float, *, constructive: bool = True) -> int:
    """Upper bound on ``M(rho, closed unit ball in R^n)``.

    The volumetric bound ``ceil((1 + 2/rho)^n)``, improved by an explicit
    lattice cover for ``n <= 3`` when ``constructive`` is set.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    vol = volumetric_ball_bound(n, rho)
    if constructive and n <= 3:
        return min(vol, len(ball_cover_centers(n, rho)))
    return vol


# --------------------------------------------------------------------------
# near-critical sets and the Sard bound


def lambda_critical_points(F, L: LambdaProfile, grid: int, radius: float | None = None) -> LambdaCriticalSample:
    """Grid points ``x`` of the ball with ``sigma_i(DF(x)) <= lambda_i`` for ``i = 1..q``."""
    n, m = F.dim_in, F.dim_out
    q = min(n, m)
    if L.q != q:
        raise ValueError(f"profile has {L.q} entries, map needs q = min(n, m) = {q}")
    radius = F.domain_radius if radius is None else radius
    pts = ball_grid(n, grid, radius)
    vals, jac = F.derivatives(pts, 1)
    sv = singular_value_array(jac)[:, :q]
    mask = np.all(sv <= np.array(L.lambdas)[None, :], axis=1)
    return LambdaCriticalSample(pts[mask], vals[mask], grid, len(pts))


def sard_bound(p: SardParameters, L: LambdaProfile, epsilon: float) -> float:
    """Right-hand side of the quantitative Sard inequality at scale ``epsilon``.

    ``c (Rk/eps)^(n/k) * sum_{i=0..q} min(lam_0...lam_i (r/eps)^i (eps/Rk)^(i/k), (delta/eps)^i)``.
    ``Rk = 0`` returns 0.
    """
    if not 0 < epsilon <= p.delta:
        raise ValueError(f"epsilon must lie in (0, delta = {p.delta}], got {epsilon}")
    if L.q != p.q:
        raise ValueError(f"profile has {L.q} entries, expected q = {p.q}")
    Rk = p.Rk
    if Rk == 0:
        return 0.0
    prods = L.products()
    total = 0.0
    for i in range(p.q + 1):
        a = prods[i] * (p.r / epsilon) ** i * (epsilon / Rk) ** (i / p.k)
        b = (p.delta / epsilon) ** i
        total += min(a, b)
    return p.c * (Rk / epsilon) ** (p.n / p.k) * total


def sard_compare(F, L: LambdaProfile, p: SardParameters, epsilons, grid: int = 64, center=None) -> list[SardRow]:
    """Empirical covering counts of the sampled near-critical values in ``B_delta`` versus the bound."""
    sample = lambda_critical_points(F, L, grid, radius=p.r)
    center = np.zeros(p.m) if center is None else np.asarray(center, dtype=float)
    vals = sample.values
    if len(vals):
        vals = vals[np.linalg.norm(vals - center, axis=1) <= p.delta]
    rows = []
    for eps in epsilons:
        bound = sard_bound(p, L, eps)
        emp = covering_number(vals, eps).upper if len(vals) else 0
        ratio = emp / bound if bound > 0 else (0.0 if emp == 0 else math.inf)
        rows.append(SardRow(float(eps), emp, bound, ratio, emp > bound))
    return rows


def sard_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "empirical_upper", "bound", "ratio"])
    for r in rows:
        w.writerow([repr(r.epsilon), r.empirical_upper, repr(r.bound), repr(r.ratio)])
    return buf.getvalue()
