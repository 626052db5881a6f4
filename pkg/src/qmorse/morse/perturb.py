"""Regular-value selection and the perturbation ``h = h1 + sum_i c_i lambda_i``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..jetcalc.budget import tensor_norms
from ..jetcalc.grids import ball_grid, cell_diameter
from ..jetcalc.jets import Jet, jet_space
from ..linalg import jacobi_eigh
from .constants import MorseConstants

# bump profile is treated as exactly 1 (resp. 0) when u <= U_FLAT (resp. >= 1 - U_FLAT);
# exp(-1/U_FLAT) = exp(-500) is below double precision relative to 1
U_FLAT = 2e-3


class NoRegularValueError(RuntimeError):
    pass


class PerturbationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# smooth plateau bumps


def _step(u: Jet) -> Jet:
    """``g(u) = e(1-u) / (e(u) + e(1-u))`` with ``e(u) = exp(-1/u)``, for ``0 < u < 1``."""
    e_u = (-(u.reciprocal())).exp()
    e_1u = (-((1.0 - u).reciprocal())).exp()
    return e_1u / (e_u + e_1u)


@dataclass(frozen=True)
class BumpSum:
    """``sum_i coeffs[i] * lambda_i`` with radial plateau bumps of a common size.

    ``lambda_i`` is 1 on ``B(center_i, inner)``, 0 outside ``B(center_i, 2 * inner)``.
    """

    centers: np.ndarray
    coeffs: np.ndarray
    inner: float

    @property
    def outer(self) -> float:
        return 2 * self.inner

    def jets(self, points: np.ndarray, order: int) -> Jet:
        points = np.atleast_2d(points)
        space = jet_space(points.shape[1], order)
        out = np.zeros((space.size, len(points)))
        for center, coeff in zip(self.centers, self.coeffs):
            off = points - center
            rho = np.linalg.norm(off, axis=1)
            u = (rho - self.inner) / self.inner
            out[0, u <= U_FLAT] += coeff
            band = (u > U_FLAT) & (u < 1 - U_FLAT)
            if np.any(band):
                ys = Jet.variables(space, off[band])
                r = sum((y * y for y in ys), Jet.constant(space, 0.0, int(band.sum()))).sqrt()
                out[:, band] += coeff * _step((r - self.inner) / self.inner).c
        return Jet(space, out)

    def kinks(self, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Parameters ``tau`` where ``origin + tau * direction`` crosses a bump sphere.

        Returns an array of shape ``(P, 4 * N)`` (NaN where there is no crossing).
        """
        origin = np.atleast_2d(origin)
        direction = np.atleast_2d(direction)
        a = np.sum(direction * direction, axis=1)
        cols = []
        for center in self.centers:
            w = origin - center
            b = 2 * np.sum(w * direction, axis=1)
            c0 = np.sum(w * w, axis=1)
            for rad in (self.inner, self.outer):
                disc = b * b - 4 * a * (c0 - rad * rad)
                sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
                with np.errstate(invalid="ignore", divide="ignore"):
                    cols.append((-b - sq) / (2 * a))
                    cols.append((-b + sq) / (2 * a))
        return np.stack(cols, axis=1) if cols else np.zeros((len(origin), 0))


def bump_profile_sups(n: int, inner: float, k: int, nradii: int = 400) -> list[float]:
    """Sampled ``sup |D^j lambda|`` for ``j = 0..k`` of one unit bump of inner radius ``inner``."""
    dirs = [np.eye(n)[i] * s for i in range(n) for s in (1.0, -1.0)]
    if n > 1:
        dirs.append(np.ones(n) / np.sqrt(n))
        dirs.append(-np.ones(n) / np.sqrt(n))
    u = np.linspace(U_FLAT, 1 - U_FLAT, nradii)
    radii = inner * (1 + u)
    pts = np.concatenate([radii[:, None] * d[None, :] for d in dirs])
    bump = BumpSum(np.zeros((1, n)), np.ones(1), inner)
    jt = bump.jets(pts, k)
    sups = [float(np.max(np.abs(jt.value)))]
    for j in range(1, k + 1):
        sups.append(float(np.max(tensor_norms(jt, j))))
    return sups


# --------------------------------------------------------------------------
# perturbed field


class PerturbedField:
    """``f0 + h1 + bumps`` with ``h1(x) = -v . x`` (so ``Dh1 = -v``)."""

    def __init__(self, base, v, bumps: BumpSum | None = None):
        self.base = base
        self.v = np.asarray(v, dtype=float).reshape(-1)
        self.bumps = bumps
        self.dim = base.dim
        self.order = base.order
        self.domain_radius = base.domain_radius

    def jets(self, points: np.ndarray, order: int) -> Jet:
        points = np.atleast_2d(points)
        out = self.base.jets(points, order).copy()
        out.c[0] -= points @ self.v
        if order >= 1:
            for i, idx in enumerate(out.space.unit):
                out.c[idx] -= self.v[i]
        if self.bumps is not None and len(self.bumps.coeffs):
            out.c += self.bumps.jets(points, order).c
        return out

    def kinks(self, origin, direction):
        if self.bumps is None or not len(self.bumps.coeffs):
            return np.zeros((len(np.atleast_2d(origin)), 0))
        return self.bumps.kinks(origin, direction)

    def __call__(self, x) -> float:
        return float(self.jets(np.asarray(x, dtype=float)[None, :], 0).value[0])


# --------------------------------------------------------------------------
# regular value


@dataclass
class RegularValue:
    v: np.ndarray
    distance: float
    near_critical_count: int
    resolution_adequate: bool

    def to_json(self) -> dict:
        return {
            "v": self.v.tolist(),
            "distance": self.distance,
            "near_critical_count": self.near_critical_count,
            "resolution_adequate": self.resolution_adequate,
        }


def near_critical_values(f0, gamma: float, grid: int) -> np.ndarray:
    """Sampled ``{Df0(x) : sigma_min(Hf0(x)) < gamma}``."""
    pts = ball_grid(f0.dim, grid, f0.domain_radius)
    jt = f0.jets(pts, 2)
    w, _ = jacobi_eigh(jt.derivative(2))
    smin = np.min(np.abs(w), axis=1)
    return jt.derivative(1)[smin < gamma]


def select_regular_value(f0, budget, mc: MorseConstants, grid: int, exclude=()) -> RegularValue:
    """Pick ``v`` with ``|v| < eps/2`` as far as possible from the near-critical values.

    Near-critical values outside ``B(0, eps)`` are ignored; if none remain
    ``v = 0``.  Ties go to the smaller ``|v|``, then lexicographic order.
    ``exclude`` adds extra values to avoid.
    """
    S = near_critical_values(f0, mc.gamma, grid)
    extra = np.asarray(list(exclude), dtype=float).reshape(-1, f0.dim)
    S = np.concatenate([S, extra])
    S = S[np.linalg.norm(S, axis=1) < mc.eps]
    adequate = cell_diameter(f0.dim, grid, f0.domain_radius) < mc.psi3
    if len(S) == 0:
        return RegularValue(np.zeros(f0.dim), float("inf"), 0, adequate)
    cres = 2 * max(grid // 4, 4) + 1  # odd, so 0 is a candidate
    cand = ball_grid(f0.dim, cres, 0.5 * mc.eps * (1 - 1.0 / (4 * cres)))
    dist, _ = cKDTree(S).query(cand)
    norms = np.linalg.norm(cand, axis=1)
    order = np.lexsort(tuple(cand.T[::-1]) + (norms, -dist))
    best = order[0]
    if not dist[best] > 0:
        raise NoRegularValueError("no admissible regular value at this resolution; refine the grid")
    return RegularValue(cand[best], float(dist[best]), int(len(S)), adequate)


# --------------------------------------------------------------------------
# bump perturbation


@dataclass
class Perturbation:
    v: np.ndarray
    bump_centers: np.ndarray
    bump_coeffs: np.ndarray
    inner_radius: float
    outer_radius: float
    C1: float
    bump_sups: list
    lambda_ck_norm: float
    h1_ck_norm: float
    h_ck_norm_estimate: float
    plateau_max_change: float = 0.0
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "v": self.v.tolist(),
            "bump_centers": self.bump_centers.tolist(),
            "bump_coeffs": self.bump_coeffs.tolist(),
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "C1": self.C1,
            "bump_sups": list(self.bump_sups),
            "lambda_ck_norm": self.lambda_ck_norm,
            "h1_ck_norm": self.h1_ck_norm,
            "h_ck_norm_estimate": self.h_ck_norm_estimate,
            "plateau_max_change": self.plateau_max_change,
        }


def build_perturbation(f0, v, certs, mc: MorseConstants):
    """Separate critical values with plateau bumps.

    Returns ``(perturbation, f, mc)`` where ``f = f0 + h1 + lambda`` and ``mc``
    carries the measured bump budget ``C1`` (and the matching ``psi2``).
    Critical points are ranked by value of ``f0 + h1`` (ties: input order)
    and the ``i``-th gets ``c_i = i * eps / (2 * C1 * k * N**2)``.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    f1 = PerturbedField(f0, v)
    n, k, eps = f0.dim, mc.k, mc.eps
    inner = mc.d_sep / 4
    centers = np.array([c.point for c in certs], dtype=float).reshape(len(certs), n)
    N = len(centers)
    for i in range(N):
        for j in range(i + 1, N):
            gap = np.linalg.norm(centers[i] - centers[j])
            if gap < mc.d_sep:
                raise PerturbationError(
                    f"bump supports overlap: critical points {i} and {j} are {gap:.3e} apart, d = {mc.d_sep:.3e}"
                )
    sups = bump_profile_sups(n, inner, k)
    C1 = max(sups)
    mc = mc.with_C1(C1)
    h1_norm = float(np.linalg.norm(v))
    if N == 0:
        pert = Perturbation(v, centers, np.zeros(0), inner, 2 * inner, C1, sups, 0.0, h1_norm, h1_norm)
        return pert, PerturbedField(f0, v, None), mc

    values = f1.jets(centers, 0).value
    rank = np.argsort(values, kind="stable")
    coeffs = np.empty(N)
    step = eps / (2 * C1 * k * N**2)
    coeffs[rank] = step * np.arange(1, N + 1)
    lam_norm = float(sum(np.max(coeffs) * s for s in sups[1:]))
    h_norm = h1_norm + lam_norm
    if lam_norm > eps / 2 or h_norm > eps:
        raise PerturbationError(f"perturbation budget exceeded: |lambda| = {lam_norm:.3e}, |h| = {h_norm:.3e}")
    bumps = BumpSum(centers, coeffs, inner)
    f = PerturbedField(f0, v, bumps)

    before = f1.jets(centers, 2)
    after = f.jets(centers, 2)
    change = max(
        float(np.max(np.abs(after.derivative(1) - before.derivative(1)))),
        float(np.max(np.abs(after.derivative(2) - before.derivative(2)))),
    )
    if change > 1e-12:
        raise PerturbationError(f"bumps moved derivatives at a critical point by {change:.3e}")
    pert = Perturbation(v, centers, coeffs, inner, 2 * inner, C1, sups, lam_norm, h1_norm, h_norm, change)
    return pert, f, mc
