"""The Morse chart of ``x^2 + x^3`` against its closed form.

Around the minimum at 0 the Hadamard coefficient is ``B(x) = 1 + x``, so the
chart is ``phi(x) = x sqrt(1 + x)`` and ``f(x) = phi(x)^2`` exactly.
"""

import numpy as np

from qmorse.jetcalc import parse
from qmorse.morse import hadamard_forms, morse_chart


def main():
    f = parse("x1^2 + x1^3", 1, 3)
    chart = morse_chart(f, np.zeros(1), radius=0.4)
    xs = np.linspace(-0.4, 0.4, 9)[:, None]
    B, nodes = hadamard_forms(f, np.zeros(1), xs)
    phi = chart(xs)[:, 0]
    print(f"chart radius {chart.radius}, {chart.test_points} test points, residual sup {chart.residual_sup:.1e}")
    print(f"Gauss-Legendre nodes used: {nodes}")
    print(f"{'x':>6} {'B(x)':>20} {'phi(x)':>20} {'x sqrt(1+x)':>20}")
    for x, b, p in zip(xs[:, 0], B[:, 0, 0], phi):
        print(f"{x:6.2f} {b:20.16f} {p:20.16f} {x * np.sqrt(1 + x):20.16f}")
    print(f"finite-difference chart derivative norms: {[round(v, 4) for v in chart.chart_norms]}")


if __name__ == "__main__":
    main()
