"""End-to-end construction: budget, constants, perturbation, certificates, charts, verification."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..certify import Isolation, isolate_criticals
from ..jetcalc.budget import DerivativeBudget, estimate_budget
from .chart import MorseChart, morse_chart
from .constants import ConstantsError, MorseConstants, compute_constants
from .perturb import Perturbation, PerturbedField, RegularValue, build_perturbation, select_regular_value
from .verify import VerificationReport, verify_theorem

MAX_SELECTION_ROUNDS = 4


class AnalysisError(RuntimeError):
    """The construction cannot proceed (for instance a constant function)."""


@dataclass
class Analysis:
    budget: DerivativeBudget
    constants: MorseConstants
    regular_value: RegularValue | None
    perturbation: Perturbation | None
    field: object
    isolation: Isolation
    charts: list
    verification: VerificationReport
    notes: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verification.passed


class _Timer:
    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = time.perf_counter() - self.t0

        return _Stage()


def _select(f0, budget, mc, grid, newton_tol, notes):
    """Choose ``v`` and certify the critical points of ``f0 - v.x``.

    A near-degenerate point of ``f0 - v.x`` adds its ``Df0`` value to the
    excluded set and the selection is repeated.
    """
    exclude = []
    for _ in range(MAX_SELECTION_ROUNDS):
        rv = select_regular_value(f0, budget, mc, grid, exclude=exclude)
        f1 = PerturbedField(f0, rv.v)
        iso = isolate_criticals(f1, budget, mc.psi1, grid, newton_tol)
        if not iso.near_degenerate:
            return rv, iso
        for nd in iso.near_degenerate:
            exclude.append(rv.v.copy())
            notes.append(f"v = {rv.v.tolist()} has a near-degenerate preimage at {nd.point.tolist()}; reselecting")
    return rv, iso


def run_analysis(
    f0,
    eps: float,
    grid: int = 64,
    c: float = 1.0,
    newton_tol: float = 1e-10,
    perturb: bool = True,
    quadrature_max: int = 64,
) -> Analysis:
    """Build ``f = f0 + h`` with ``|h|_{C^k} <= eps`` and check all five claims.

    With ``perturb=False`` the claims are checked on ``f0`` itself.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if grid < 8:
        raise ValueError("grid must be at least 8")
    timer = _Timer()
    notes: list[str] = []
    with timer("budget"):
        budget = estimate_budget(f0, grid_resolution=grid)
    if budget.K == 0:
        raise AnalysisError("all derivatives vanish on the grid: the function is constant and every point is critical")
    with timer("constants"):
        try:
            mc = compute_constants(budget.K, eps, f0.dim, f0.order, c)
        except ConstantsError as exc:
            raise AnalysisError(str(exc)) from exc
    # f differs from f0 by at most eps in C^k, so K + eps bounds its derivatives
    budget_f = replace(budget, K=budget.K + eps)

    rv = pert = None
    if perturb:
        with timer("regular_value"):
            rv, iso1 = _select(f0, budget, mc, grid, newton_tol, notes)
        if not rv.resolution_adequate:
            notes.append("grid cell diameter exceeds psi3; regular-value scan may be too coarse")
        with timer("perturbation"):
            pert, f, mc = build_perturbation(f0, rv.v, iso1.certificates, mc)
        with timer("isolation"):
            iso = isolate_criticals(f, budget_f, mc.psi1, grid, newton_tol)
        if len(iso.certificates) + len(iso.near_degenerate) != len(iso1.certificates):
            notes.append("critical point count changed after adding bumps")
    else:
        f = PerturbedField(f0, np.zeros(f0.dim))
        with timer("isolation"):
            iso = isolate_criticals(f, budget_f, mc.psi1, grid, newton_tol)

    with timer("charts"):
        charts: list[MorseChart] = [
            morse_chart(f, cert, mc, quadrature_max=quadrature_max) for cert in iso.certificates
        ]
    for ch in charts:
        if ch.radius < ch.requested_radius:
            notes.append(f"chart at {ch.center.tolist()} shrunk to radius {ch.radius:.6g}")
    with timer("verify"):
        verification = verify_theorem(f, iso, mc, grid, charts)
    return Analysis(budget, mc, rv, pert, f, iso, charts, verification, notes, timer.stages)
