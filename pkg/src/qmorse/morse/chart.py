"""Hadamard quadratic form and the normal-form chart ``phi(x) = Q_x^{-1} (x - x_c)``.

Near a critical point ``x_c``,

    f(x) - f(x_c) = h^T B(x) h,   h = x - x_c,
    B(x) = int_0^1 int_0^1 t * Hf(x_c + s t h) ds dt,

and ``B(x_c) = Hf(x_c) / 2``.  With ``Q_x`` the congruence reduction of
``B(x)`` against ``A = B(x_c)``, ``y = Q_x^{-1} h`` satisfies
``f(x) - f(x_c) = y^T D0 y``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..jetcalc.grids import ball_grid
from ..linalg import CongruenceReduction, congruence_reduce, normalizer, symmetric_norm
from .constants import MorseConstants

QUAD_START = 8
QUAD_RTOL = 1e-12
KINK_PANELS = 8


class QuadratureError(RuntimeError):
    pass


def _gl01(m: int):
    xi, w = leggauss(m)
    return 0.5 * (xi + 1.0), 0.5 * w


def _hadamard_level(f, center, h, m: int) -> np.ndarray:
    """Gauss-Legendre rule for ``B = int_0^1 (1 - tau) Hf(c + tau h) dtau``.

    This is the double integral after substituting ``tau = s t``.  The range
    is split where the ray crosses a non-analytic sphere of ``f`` (bump
    supports), each piece into ``KINK_PANELS`` panels of ``m`` nodes.
    """
    P, n = h.shape
    xi, wx = _gl01(m)
    kinks = f.kinks(np.broadcast_to(center, h.shape), h) if hasattr(f, "kinks") else np.zeros((P, 0))
    kinks = np.where((kinks > 0) & (kinks < 1), kinks, np.nan)
    kinks = kinks[:, ~np.all(np.isnan(kinks), axis=0)]
    if kinks.shape[1]:
        tau = np.sort(np.where(np.isnan(kinks), 1.0, kinks), axis=1)
        edges = np.concatenate([np.zeros((P, 1)), tau, np.ones((P, 1))], axis=1)
        # the bump profile is flat to all orders at the kinks, which slows
        # Gauss-Legendre convergence; composite panels restore it
        frac = np.linspace(0.0, 1.0, KINK_PANELS + 1)[:-1]
        lo, hi = edges[:, :-1], edges[:, 1:]
        edges = (lo[..., None] + (hi - lo)[..., None] * frac).reshape(P, -1)
        edges = np.concatenate([edges, np.ones((P, 1))], axis=1)
    else:
        edges = np.broadcast_to(np.array([0.0, 1.0]), (P, 2))
    a, b = edges[:, :-1], edges[:, 1:]  # (P, pieces)
    tn = a[..., None] + (b - a)[..., None] * xi  # (P, pieces, m)
    weight = (b - a)[..., None] * wx * (1.0 - tn)
    pts = center + tn[..., None] * h[:, None, None, :]
    H = f.jets(pts.reshape(-1, n), 2).derivative(2).reshape(*tn.shape, n, n)
    return np.einsum("pkq,pkqij->pij", weight, H)


def hadamard_forms(f, center, points, quadrature_max: int = 64):
    """``B(x)`` for each row of ``points``; node count doubles from 8 until the
    relative change is at most 1e-12.

    Returns ``(B, nodes)`` where ``nodes`` is the final per-panel node count.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    h = np.atleast_2d(np.asarray(points, dtype=float)) - center
    m = QUAD_START
    B = _hadamard_level(f, center, h, m)
    active = np.arange(len(h))
    while active.size and m * 2 <= quadrature_max:
        m *= 2
        B2 = _hadamard_level(f, center, h[active], m)
        scale = np.max(np.abs(B2), axis=(1, 2))
        change = np.max(np.abs(B2 - B[active]), axis=(1, 2))
        B[active] = B2
        active = active[change > QUAD_RTOL * scale]
    if active.size and quadrature_max > QUAD_START:
        raise QuadratureError(
            f"Hadamard quadrature did not converge with {m} nodes per panel at {active.size} points"
        )
    return B, m


def hadamard_form(f, center, x, quadrature_max: int = 64) -> np.ndarray:
    return hadamard_forms(f, center, np.asarray(x, dtype=float)[None, :], quadrature_max)[0][0]


# --------------------------------------------------------------------------
# chart


@dataclass
class MorseChart:
    center: np.ndarray
    radius: float
    requested_radius: float
    ctx: CongruenceReduction
    l: int
    value: float
    residual_sup: float
    chart_norm_estimate: float
    chart_norms: list
    test_points: int
    field: object = field(repr=False, default=None)
    quadrature_max: int = 64

    def __call__(self, points) -> np.ndarray:
        return chart_map(self.field, self, points)

    def residuals(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        y = self(points)
        fx = self.field.jets(points, 0).value
        return np.abs(fx - self.value - np.einsum("pi,i,pi->p", y, self.ctx.D0, y))

    def to_json(self) -> dict:
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "requested_radius": self.requested_radius,
            "l": self.l,
            "value": self.value,
            "residual_sup": self.residual_sup,
            "chart_norm_estimate": self.chart_norm_estimate,
            "chart_norms": list(self.chart_norms),
            "test_points": self.test_points,
            "reduction": self.ctx.to_json(),
        }


def chart_map(f, chart: MorseChart, points, *, check: bool = True) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    B, _ = hadamard_forms(f, chart.center, points, chart.quadrature_max)
    out = np.empty_like(points)
    for i, (Bx, x) in enumerate(zip(B, points)):
        Q = congruence_reduce(chart.ctx, Bx, check=check)
        out[i] = np.linalg.solve(Q, x - chart.center)
    return out


def _test_grid(n: int, radius: float, center, min_points: int = 1000) -> np.ndarray:
    res = math.ceil(min_points ** (1.0 / n) - 1e-9)
    while res**n < min_points:
        res += 1
    return ball_grid(n, res, radius, center)


def _fd_norms(chart: MorseChart, max_order: int, ncenters: int = 16) -> list[float]:
    """Finite-difference sups of ``|D^j phi|`` (Frobenius) for ``j = 1..max_order``."""
    n = chart.center.size
    if max_order < 1:
        return []
    r = chart.radius
    hstep = 0.1 * r
    centers = ball_grid(n, 3 if n > 1 else 5, 0.5 * r, chart.center)[:ncenters]
    sups = []
    for j in range(1, max_order + 1):
        sup = 0.0
        combos = list(itertools.combinations_with_replacement(range(n), j))
        signs = list(itertools.product((1.0, -1.0), repeat=j))
        stencil = []
        for combo in combos:
            for sg in signs:
                off = np.zeros(n)
                for i, s in zip(combo, sg):
                    off[i] += s * hstep
                stencil.append(off)
        stencil = np.array(stencil)
        pts = (centers[:, None, :] + stencil[None, :, :]).reshape(-1, n)
        vals = chart_map(chart.field, chart, pts, check=False).reshape(len(centers), len(combos), len(signs), n)
        weights = np.array([np.prod(sg) for sg in signs]) / (2 * hstep) ** j
        deriv = np.einsum("cksn,s->ckn", vals, weights)  # (centers, combos, outputs)
        for ci in range(len(centers)):
            full = 0.0
            for kk, combo in enumerate(combos):
                mult = math.factorial(j) / math.prod(math.factorial(combo.count(i)) for i in set(combo))
                full += mult * float(np.sum(deriv[ci, kk] ** 2))
            sup = max(sup, math.sqrt(full))
        sups.append(sup)
    return sups


def morse_chart(
    f,
    cert,
    mc: MorseConstants | None = None,
    *,
    radius: float | None = None,
    quadrature_max: int = 64,
    min_points: int = 1000,
) -> MorseChart:
    """Normal-form chart around a certified critical point.

    The chart radius is ``mc.psi3`` unless ``radius`` is given.  Every test
    point is checked to have ``B(x)`` inside the congruence neighborhood of
    ``A = B(center)``; on a violation the radius shrinks to the largest
    verified grid radius.
    """
    center = np.asarray(getattr(cert, "point", cert), dtype=float).reshape(-1)
    n = center.size
    if radius is None:
        if mc is None:
            raise ValueError("need MorseConstants or an explicit radius")
        radius = mc.psi3
    if center.size and np.linalg.norm(center) + radius > f.domain_radius:
        radius = max(f.domain_radius - float(np.linalg.norm(center)), 0.0)
    A = hadamard_form(f, center, center, quadrature_max)
    ctx = normalizer(A)
    value = float(f.jets(center[None, :], 0).value[0])

    pts = _test_grid(n, radius, center, min_points)
    B, _ = hadamard_forms(f, center, pts, quadrature_max)
    dist = np.linalg.norm(pts - center, axis=1)
    inside = symmetric_norm(B - A) <= ctx.radius * (1 + 1e-12)
    final_radius = radius
    if not np.all(inside):
        r_bad = float(dist[~inside].min())
        ok = inside & (dist < r_bad)
        final_radius = float(dist[ok].max()) if np.any(ok) else 0.0
    keep = dist <= final_radius * (1 + 1e-12)
    pts, B = pts[keep], B[keep]

    fx = f.jets(pts, 0).value
    resid = np.empty(len(pts))
    for i, (Bx, x) in enumerate(zip(B, pts)):
        Q = congruence_reduce(ctx, Bx)
        y = np.linalg.solve(Q, x - center)
        resid[i] = abs(fx[i] - value - float(np.sum(ctx.D0 * y * y)))

    chart = MorseChart(
        center=center,
        radius=final_radius,
        requested_radius=radius,
        ctx=ctx,
        l=ctx.l,
        value=value,
        residual_sup=float(resid.max()) if len(resid) else 0.0,
        chart_norm_estimate=0.0,
        chart_norms=[],
        test_points=int(len(pts)),
        field=f,
        quadrature_max=quadrature_max,
    )
    k = getattr(f, "order", 3)
    if final_radius > 0:
        norms = _fd_norms(chart, min(k - 1, 3))
        chart.chart_norms = norms
        chart.chart_norm_estimate = float(sum(norms))
    return chart
