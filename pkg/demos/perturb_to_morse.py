"""Turn a degenerate function into a quantitative Morse function.

``x1^4 + x2^2`` has a single critical point at the origin, but its Hessian
there is diag(0, 2): the point is degenerate.  The pipeline subtracts a small
linear term ``v . x`` (a regular value of the gradient map), adds plateau bumps
that spread equal critical values apart, and then certifies every claim.
"""

import numpy as np

from qmorse.jetcalc import parse
from qmorse.morse import run_analysis


def main():
    f0 = parse("x1^4 + x2^2", 2, 3)

    raw = run_analysis(f0, 0.1, grid=64, perturb=False)
    print("unperturbed:")
    print(f"  near-degenerate points: {[p.point.round(6).tolist() for p in raw.isolation.near_degenerate]}")
    print(f"  item (i) passes: {raw.verification.items['i'].passed}")

    a = run_analysis(f0, 0.1, grid=64)
    mc = a.constants
    print("\nconstants at K = %.3g, eps = 0.1:" % mc.K)
    for name in ("gamma", "d_sep", "psi2", "psi3", "eta"):
        print(f"  {name:6s} = {getattr(mc, name):.4g}")
    print(f"  N_bound = {mc.N_bound}")

    print(f"\nregular value v = {np.round(a.regular_value.v, 6).tolist()}")
    for c in a.isolation.certificates:
        print(
            f"critical point {np.round(c.point, 6).tolist()}: index {c.morse_index}, "
            f"sigma_min(Hf) = {c.sigma_min_hess:.4g} (needs >= {mc.psi1:.4g})"
        )
    for ch in a.charts:
        print(f"chart radius {ch.radius:.3g}, residual sup {ch.residual_sup:.2e}, l = {ch.l}")

    print("\nverification:")
    for name, item in a.verification.items.items():
        verdict = "pass" if item.passed else "FAIL"
        stat = "" if item.statistic is None else f"statistic {item.statistic:.4g} vs "
        print(f"  ({name}) {verdict}: {stat}threshold {item.threshold:.4g}" + (f"; {item.detail}" if item.detail else ""))


if __name__ == "__main__":
    main()
