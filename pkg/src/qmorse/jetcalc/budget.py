"""Grid estimates of derivative suprema and the C^k norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import symmetric_norm
from .grids import domain_samples

NORM_CONVENTION = (
    "order 1: Euclidean norm; order 2: spectral norm; "
    "order j >= 3: max |entry| * n^((j-1)/2)"
)


@dataclass(frozen=True)
class DerivativeBudget:
    """Grid estimates of ``sup |D^j f|`` for ``j = 1..k``.

    The suprema are maxima over a finite sample and therefore lower bounds of
    the true suprema.
    """

    per_order_sup: tuple
    K: float
    ck_norm: float
    grid_resolution: int
    convention: str = NORM_CONVENTION
    estimate: str = "grid maximum (lower bound of the true supremum)"

    def to_json(self) -> dict:
        return {
            "per_order_sup": list(self.per_order_sup),
            "K": self.K,
            "ck_norm": self.ck_norm,
            "grid_resolution": self.grid_resolution,
            "convention": self.convention,
            "estimate": self.estimate,
        }


def tensor_norms(jet, j: int) -> np.ndarray:
    """Per-point norm of the order-``j`` derivative under :data:`NORM_CONVENTION`."""
    T = jet.derivative(j)
    n = jet.space.n
    if j == 1:
        return np.linalg.norm(T, axis=-1)
    if j == 2:
        return symmetric_norm(T)
    flat = np.abs(T.reshape(T.shape[0], -1))
    return flat.max(axis=-1) * n ** ((j - 1) / 2)


def budget_from_points(f, points: np.ndarray, order: int | None = None, chunk: int = 20000) -> list[float]:
    order = f.order if order is None else order
    sups = np.zeros(order)
    for start in range(0, len(points), chunk):
        jt = f.jets(points[start : start + chunk], order)
        for j in range(1, order + 1):
            sups[j - 1] = max(sups[j - 1], float(np.max(tensor_norms(jt, j))))
    return [float(s) for s in sups]


def estimate_budget(f, grid_resolution: int = 32) -> DerivativeBudget:
    """Estimate ``sup |D^j f|`` over the domain ball for ``j = 1..f.order``.

    The sample is :func:`~qmorse.jetcalc.grids.domain_samples`: a
    ``grid_resolution**n`` ball grid plus a boundary sphere grid.
    ``K`` is the largest entry, ``ck_norm`` their sum.
    """
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be at least 8")
    pts = domain_samples(f.dim, grid_resolution, f.domain_radius)
    sups = budget_from_points(f, pts)
    return DerivativeBudget(tuple(sups), max(sups), float(sum(sups)), grid_resolution)
