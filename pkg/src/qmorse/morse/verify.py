"""Check the five claims of the quantitative Morse construction on a finished run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..jetcalc.grids import ball_grid
from ..linalg import jacobi_eigh
from .constants import MorseConstants

MAX_WITNESSES = 10
ITEMS = ("i", "ii", "iii", "iv", "v")


@dataclass
class ItemResult:
    name: str
    passed: bool
    statistic: float | None
    threshold: float | None
    witnesses: list = field(default_factory=list)
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "witnesses": self.witnesses,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    items: dict

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items.values())

    def failed(self) -> list[str]:
        return [name for name, item in self.items.items() if not item.passed]

    def to_json(self) -> dict:
        return {"passed": self.passed, **{name: self.items[name].to_json() for name in ITEMS}}


def residual_tolerance(K: float) -> float:
    return 1e-8 * (1 + K)


def _critical_points(isolation):
    pts, smin, vals = [], [], []
    for c in list(isolation.certificates) + list(isolation.near_degenerate):
        pts.append(np.asarray(c.point, dtype=float))
        smin.append(float(c.sigma_min_hess))
        vals.append(float(c.value))
    return pts, np.array(smin), np.array(vals)


def check_nondegeneracy(f, isolation, mc: MorseConstants) -> ItemResult:
    """(i) ``sigma_min(Hf(x_i)) >= psi1``, recomputed from ``f``."""
    pts, _, _ = _critical_points(isolation)
    if not pts:
        return ItemResult("i", True, None, mc.psi1, detail="no critical points")
    H = f.jets(np.array(pts), 2).derivative(2)
    w, _ = jacobi_eigh(H)
    smin = np.min(np.abs(w), axis=1)
    bad = np.flatnonzero(smin < mc.psi1)
    wit = [{"point": pts[i].tolist(), "sigma_min_hess": float(smin[i])} for i in bad[:MAX_WITNESSES]]
    return ItemResult("i", bad.size == 0, float(smin.min()), mc.psi1, wit)


def check_separation(isolation, mc: MorseConstants) -> ItemResult:
    """(ii) pairwise distances ``>= d_sep`` and count ``<= N_bound``."""
    pts, _, _ = _critical_points(isolation)
    count = len(pts)
    wit = []
    dmin = None
    if count > 1:
        P = np.array(pts)
        D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
        iu = np.triu_indices(count, 1)
        dmin = float(D[iu].min())
        for a, b in zip(*iu):
            if D[a, b] < mc.d_sep and len(wit) < MAX_WITNESSES:
                wit.append({"points": [P[a].tolist(), P[b].tolist()], "distance": float(D[a, b])})
    ok = (dmin is None or dmin >= mc.d_sep) and count <= mc.N_bound
    detail = f"count {count}, bound {mc.N_bound}"
    return ItemResult("ii", bool(ok), dmin, mc.d_sep, wit, detail)


def check_value_gaps(f, isolation, mc: MorseConstants) -> ItemResult:
    """(iii) distinct critical values, gaps ``>= psi2``."""
    pts, _, _ = _critical_points(isolation)
    if len(pts) < 2:
        return ItemResult("iii", True, None, mc.psi2, detail="fewer than two critical points")
    P = np.array(pts)
    vals = f.jets(P, 0).value
    order = np.argsort(vals, kind="stable")
    gaps = np.diff(vals[order])
    bad = np.flatnonzero(gaps < mc.psi2)
    wit = [
        {"points": [P[order[i]].tolist(), P[order[i + 1]].tolist()], "gap": float(gaps[i])}
        for i in bad[:MAX_WITNESSES]
    ]
    return ItemResult("iii", bad.size == 0, float(gaps.min()), mc.psi2, wit)


def check_charts(charts, mc: MorseConstants) -> ItemResult:
    """(iv) every chart reproduces the normal form within ``1e-8 (1 + K)``."""
    tol = residual_tolerance(mc.K)
    if not charts:
        return ItemResult("iv", True, None, tol, detail="no charts")
    res = np.array([ch.residual_sup for ch in charts])
    bad = [
        {"center": ch.center.tolist(), "residual_sup": ch.residual_sup, "radius": ch.radius}
        for ch in charts
        if not (ch.residual_sup <= tol and ch.radius > 0)
    ]
    return ItemResult("iv", not bad, float(res.max()), tol, bad[:MAX_WITNESSES])


def check_localization(f, isolation, mc: MorseConstants, grid: int) -> ItemResult:
    """(v) grid points with ``|Df| <= eta`` lie within ``psi3`` of a critical point."""
    pts, _, _ = _critical_points(isolation)
    samples = ball_grid(f.dim, grid, f.domain_radius)
    g = np.linalg.norm(f.jets(samples, 1).derivative(1), axis=1)
    low = samples[g <= mc.eta]
    if len(low) == 0:
        return ItemResult("v", True, None, mc.psi3, detail="no grid point below eta")
    if pts:
        dist = np.min(np.linalg.norm(low[:, None, :] - np.array(pts)[None, :, :], axis=2), axis=1)
    else:
        dist = np.full(len(low), np.inf)
    bad = np.flatnonzero(dist > mc.psi3)
    wit = [{"point": low[i].tolist(), "distance": float(dist[i])} for i in bad[:MAX_WITNESSES]]
    return ItemResult("v", bad.size == 0, float(dist.max()), mc.psi3, wit, f"{len(low)} grid points below eta")


def verify_theorem(f, isolation, mc: MorseConstants, grid: int, charts=()) -> VerificationReport:
    """Pass/fail for each claim, with witnesses for failures.

    Near-degenerate critical points count as critical points, so a
    degenerate input fails (i) with the offending point as witness.
    """
    return VerificationReport(
        {
            "i": check_nondegeneracy(f, isolation, mc),
            "ii": check_separation(isolation, mc),
            "iii": check_value_gaps(f, isolation, mc),
            "iv": check_charts(list(charts), mc),
            "v": check_localization(f, isolation, mc, grid),
        }
    )
