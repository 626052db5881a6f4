"""Quantitative inverse function theorem and certified isolation of critical points.

Inputs are at least C^3, so the generalized Jacobian at a point is the single
matrix ``J = DF(x0)`` and the inverse-function constants reduce to

    delta = sigma_min(J) / 2,   r = delta / hess_lip   (clamped to the domain),

with the inverse defined on ``B(F(x0), r*delta/2)`` and ``1/delta``-Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter

from .jetcalc.grids import ball_grid
from .linalg import jacobi_eigh, singular_values

NEWTON_MAXITER = 60


class SingularJacobianError(ValueError):
    pass


@dataclass(frozen=True)
class InverseCertificate:
    x0: np.ndarray
    y0: np.ndarray
    delta: float
    K_lip: float
    r: float
    domain_ball_radius: float
    image_ball_radius: float
    inv_lipschitz: float

    def to_json(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "y0": self.y0.tolist(),
            "delta": self.delta,
            "K_lip": self.K_lip,
            "r": self.r,
            "domain_ball_radius": self.domain_ball_radius,
            "image_ball_radius": self.image_ball_radius,
            "inv_lipschitz": self.inv_lipschitz,
        }


def inverse_certificate(F, x0, K_lip: float, hess_lip: float, domain_radius: float | None = None) -> InverseCertificate:
    """Inverse-function certificate for a C^1 map ``F: R^n -> R^n`` at ``x0``.

    ``K_lip`` bounds the Lipschitz constant of ``F`` and ``hess_lip`` that of
    ``DF`` near ``x0``.  ``hess_lip = 0`` means a constant Jacobian: ``r`` is
    then the distance from ``x0`` to the domain boundary.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    R = F.domain_radius if domain_radius is None else domain_radius
    if not np.isfinite(R):
        raise ValueError("a finite domain radius is needed to clamp the certificate")
    y0, J = (a[0] for a in F.derivatives(x0[None, :], 1))
    spec = singular_values(J)
    if spec.sigma_min <= 1e-10:
        raise SingularJacobianError(f"Jacobian at {x0.tolist()} is singular (sigma_min = {spec.sigma_min:.3e})")
    if K_lip < spec.sigma_max * (1 - 1e-12):
        raise ValueError(f"K_lip = {K_lip} is below |DF(x0)| = {spec.sigma_max}")
    delta = 0.5 * spec.sigma_min
    clamp = R - float(np.linalg.norm(x0))
    if clamp <= 0:
        raise ValueError("x0 must lie in the interior of the domain")
    r = clamp if hess_lip == 0 else min(delta / hess_lip, clamp)
    return InverseCertificate(
        x0=x0,
        y0=np.asarray(y0, dtype=float),
        delta=delta,
        K_lip=float(K_lip),
        r=r,
        domain_ball_radius=r * delta / (2 * K_lip),
        image_ball_radius=r * delta / 2,
        inv_lipschitz=1.0 / delta,
    )


def local_inverse(F, cert: InverseCertificate, y, tol: float = 1e-14, maxiter: int = 200) -> np.ndarray:
    """Solve ``F(x) = y`` for ``y`` in the certified image ball.

    Chord iterations with the frozen Jacobian at ``x0`` contract with factor
    at most 1/2 on ``B(x0, r)``; a few full Newton steps polish the result.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if np.linalg.norm(y - cert.y0) > cert.image_ball_radius * (1 + 1e-12):
        raise ValueError("y lies outside the certified image ball")
    J0 = F.jacobian(cert.x0)
    x = cert.x0.copy()
    scale = max(1.0, float(np.linalg.norm(y)))
    for _ in range(maxiter):
        res = F(x) - y
        if np.linalg.norm(res) <= tol * scale:
            break
        x = x - np.linalg.solve(J0, res)
    for _ in range(3):
        val, jac = (a[0] for a in F.derivatives(x[None, :], 1))
        x = x - np.linalg.solve(jac, val - y)
    return x


# --------------------------------------------------------------------------
# critical points


@dataclass
class CriticalCertificate:
    point: np.ndarray
    uniqueness_radius: float
    hess_spectrum: np.ndarray
    sigma_min_hess: float
    morse_index: int
    value: float
    grad_norm: float

    def to_json(self) -> dict:
        return {
            "point": self.point.tolist(),
            "uniqueness_radius": self.uniqueness_radius,
            "hess_spectrum": self.hess_spectrum.tolist(),
            "sigma_min_hess": self.sigma_min_hess,
            "morse_index": self.morse_index,
            "value": self.value,
            "grad_norm": self.grad_norm,
        }


@dataclass
class NearDegenerate:
    """A converged critical point whose Hessian is below the certification floor."""

    point: np.ndarray
    sigma_min_hess: float
    value: float
    grad_norm: float
    reason: str = "near-degenerate"

    def to_json(self) -> dict:
        return {
            "point": self.point.tolist(),
            "sigma_min_hess": self.sigma_min_hess,
            "value": self.value,
            "grad_norm": self.grad_norm,
            "reason": self.reason,
        }


@dataclass
class Isolation:
    certificates: list = field(default_factory=list)
    near_degenerate: list = field(default_factory=list)

    @property
    def points(self) -> np.ndarray:
        pts = [c.point for c in self.certificates] + [c.point for c in self.near_degenerate]
        return np.array(pts).reshape(len(pts), -1)


def newton_critical(f, seeds: np.ndarray, newton_tol: float = 1e-10, maxiter: int = NEWTON_MAXITER):
    """Batched Newton on ``Df``; returns converged points and their gradient norms."""
    x = np.array(seeds, dtype=float)
    R = f.domain_radius
    alive = np.ones(len(x), dtype=bool)
    done = np.zeros(len(x), dtype=bool)
    gnorm = np.full(len(x), np.inf)
    for _ in range(maxiter + 1):
        idx = np.flatnonzero(alive & ~done)
        if idx.size == 0:
            break
        jt = f.jets(x[idx], 2)
        g, H = jt.derivative(1), jt.derivative(2)
        gn = np.linalg.norm(g, axis=1)
        gnorm[idx] = gn
        conv = gn <= newton_tol
        done[idx[conv]] = True
        step_idx = idx[~conv]
        if step_idx.size == 0:
            break
        Hs, gs = H[~conv], g[~conv]
        ok = np.abs(np.linalg.det(Hs)) > 0
        alive[step_idx[~ok]] = False
        step = np.zeros_like(gs)
        if np.any(ok):
            step[ok] = np.linalg.solve(Hs[ok], gs[ok][..., None])[..., 0]
        x[step_idx] -= step
        bad = ~np.all(np.isfinite(x[step_idx]), axis=1) | (np.linalg.norm(x[step_idx], axis=1) > 2 * R)
        alive[step_idx[bad]] = False
    keep = done & alive & (np.linalg.norm(x, axis=1) <= R * (1 + 1e-12))
    return x[keep], gnorm[keep]


def _merge(f, pts, gnorm, newton_tol):
    # keep the smaller |Df|; two points merge when no gradient barrier separates them
    order = np.lexsort((*pts.T[::-1], gnorm))
    kept = []
    barrier = np.sqrt(newton_tol)
    ts = np.linspace(0.0, 1.0, 17)
    for i in order:
        p = pts[i]
        dup = False
        for j in kept:
            q = pts[j]
            if np.linalg.norm(p - q) <= newton_tol:
                dup = True
                break
            seg = q[None, :] + ts[:, None] * (p - q)[None, :]
            gmax = np.max(np.linalg.norm(f.jets(seg, 1).derivative(1), axis=1))
            if gmax <= barrier:
                dup = True
                break
        if not dup:
            kept.append(i)
    return pts[kept], gnorm[kept]


def seed_points(f, grid: int) -> np.ndarray:
    """Grid points where ``|Df|`` is a local minimum over the 3^n lattice neighborhood."""
    pts = ball_grid(f.dim, grid, f.domain_radius)
    gn = np.linalg.norm(f.jets(pts, 1).derivative(1), axis=1).reshape((grid,) * f.dim)
    local = gn == minimum_filter(gn, size=3, mode="nearest")
    return pts[local.ravel()]


def classify(f, point, K: float, psi1_floor: float, grad_norm: float):
    """Certificate or near-degenerate report for a converged critical point."""
    jt = f.jets(point[None, :], 2)
    w, _ = jacobi_eigh(jt.derivative(2)[0])
    smin = float(np.min(np.abs(w)))
    value = float(jt.value[0])
    if smin < psi1_floor:
        return NearDegenerate(point, smin, value, grad_norm)
    room = f.domain_radius - float(np.linalg.norm(point))
    rad = psi1_floor**2 / (8 * K**2) if K > 0 else np.inf
    rad = min(rad, room)
    if rad <= 0:
        return NearDegenerate(point, smin, value, grad_norm, "boundary")
    return CriticalCertificate(point, rad, w, smin, int(np.sum(w < 0)), value, grad_norm)


def isolate_criticals(f, budget, psi1_floor: float, grid: int, newton_tol: float = 1e-10) -> Isolation:
    """Find and certify the critical points of ``f`` in the domain ball.

    Newton on ``Df`` is seeded from grid local minima of ``|Df|``.  A point
    with ``sigma_min(Hf) >= psi1_floor`` gets the uniqueness radius
    ``psi1_floor**2 / (8 K**2)`` (clamped to the domain); the others are
    reported as near-degenerate.  Output is sorted lexicographically.
    """
    if not psi1_floor > 0:
        raise ValueError("psi1_floor must be positive")
    seeds = seed_points(f, grid)
    pts, gn = newton_critical(f, seeds, newton_tol)
    if len(pts) == 0:
        return Isolation()
    pts, gn = _merge(f, pts, gn, newton_tol)
    order = np.lexsort(pts.T[::-1])
    out = Isolation()
    for i in order:
        item = classify(f, pts[i], budget.K, psi1_floor, float(gn[i]))
        if isinstance(item, CriticalCertificate):
            out.certificates.append(item)
        else:
            out.near_degenerate.append(item)
    return out
