"""Near-critical values of a gradient map against the quantitative Sard bound.

For ``f = sin(x1) cos(x2)`` the gradient map ``Df`` is sampled on the unit
disc.  Points whose Jacobian singular values fall below the thresholds
``Lambda`` are near-critical; the covering number of their images shrinks as
the scale grows, and stays below the bound with ``c = 1``.
"""

import numpy as np

from qmorse.entropy import LambdaProfile, SardParameters, sard_compare
from qmorse.jetcalc import GradientMap, estimate_budget, parse


def main():
    f = parse("sin(x1)*cos(x2)", 2, 3)
    K_lip = estimate_budget(f, 32).per_order_sup[2]
    params = SardParameters(n=2, m=2, k=2, r=1.0, K_lip=K_lip)
    print(f"Lipschitz estimate of the gradient map's Jacobian: {K_lip:.4f}")
    for lambdas in [(1.0, 0.1), (2.5, 0.5)]:
        rows = sard_compare(GradientMap(f), LambdaProfile(lambdas), params, np.geomspace(1.0, 0.01, 5), grid=64)
        print(f"\nLambda = {lambdas}")
        print(f"{'eps':>8} {'cover':>6} {'bound':>12} {'ratio':>8}")
        for r in rows:
            print(f"{r.epsilon:8.3f} {r.empirical_upper:6d} {r.bound:12.4g} {r.ratio:8.4f}")


if __name__ == "__main__":
    main()
