"""Independent oracles shared by the test modules."""

from __future__ import annotations

import mpmath
import numpy as np

mpmath.mp.dps = 40

FD_STEP = 1e-4


def random_expression(rng: np.random.Generator, dim: int, depth: int = 3) -> str:
    """A random smooth expression over ``x1..x_dim``; denominators stay away from zero."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return f"x{rng.integers(1, dim + 1)}"
        return f"{rng.uniform(-2, 2):.3f}"
    kind = rng.integers(0, 8)
    a = random_expression(rng, dim, depth - 1)
    if kind == 0:
        return f"({a} + {random_expression(rng, dim, depth - 1)})"
    if kind == 1:
        return f"({a} - {random_expression(rng, dim, depth - 1)})"
    if kind == 2:
        return f"({a} * {random_expression(rng, dim, depth - 1)})"
    if kind == 3:
        return f"({a})^{rng.integers(2, 4)}"
    if kind == 4:
        return f"sin({a})"
    if kind == 5:
        return f"cos({a})"
    if kind == 6:
        return f"exp(0.5 * sin({a}))"
    return f"{a} / (3 + cos({random_expression(rng, dim, depth - 1)}))"


def mp_eval(spec, x):
    return spec.tree.evaluate([mpmath.mpf(float(v)) for v in x], lib=mpmath)


def fd_gradient_hessian(spec, x, h: float = FD_STEP):
    """Central differences with step ``h`` in 40-digit arithmetic."""
    n = spec.dim
    x = [mpmath.mpf(float(v)) for v in x]
    h = mpmath.mpf(h)

    def f(pt):
        return spec.tree.evaluate(pt, lib=mpmath)

    def shift(pt, i, s):
        out = list(pt)
        out[i] += s
        return out

    g = np.zeros(n)
    H = np.zeros((n, n))
    f0 = f(x)
    for i in range(n):
        g[i] = float((f(shift(x, i, h)) - f(shift(x, i, -h))) / (2 * h))
        H[i, i] = float((f(shift(x, i, h)) - 2 * f0 + f(shift(x, i, -h))) / h**2)
        for j in range(i + 1, n):
            pp = f(shift(shift(x, i, h), j, h))
            pm = f(shift(shift(x, i, h), j, -h))
            mp_ = f(shift(shift(x, i, -h), j, h))
            mm = f(shift(shift(x, i, -h), j, -h))
            H[i, j] = H[j, i] = float((pp - pm - mp_ + mm) / (4 * h * h))
    return g, H


def mp_derivative(spec, x, orders):
    """Exact partial derivative (multi-index ``orders``) by mpmath's high-precision differentiation."""
    x = [mpmath.mpf(float(v)) for v in x]
    return float(mpmath.diff(lambda *pt: spec.tree.evaluate(list(pt), lib=mpmath), x, tuple(orders)))


def hadamard_1d(spec, center: float, x: float) -> float:
    """``int_0^1 (1 - tau) f''(c + tau (x - c)) dtau`` (the 1-D Hadamard coefficient)."""
    c, x = mpmath.mpf(center), mpmath.mpf(x)

    def f2(t):
        return mpmath.diff(lambda u: spec.tree.evaluate([u], lib=mpmath), c + t * (x - c), 2)

    return float(mpmath.quad(lambda t: (1 - t) * f2(t), [0, 1]))


def fd_agrees(value, oracle, rtol: float = 1e-5, atol: float = 1e-7) -> bool:
    """Relative error at most ``rtol``, or absolute error at most ``atol`` near zero."""
    value, oracle = np.asarray(value, dtype=float), np.asarray(oracle, dtype=float)
    return bool(np.all(np.abs(value - oracle) <= np.maximum(rtol * np.abs(oracle), atol)))


def random_symmetric(rng: np.random.Generator, n: int, min_gap: float = 0.2) -> np.ndarray:
    """Random symmetric matrix with every |eigenvalue| at least ``min_gap``."""
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    w = rng.uniform(min_gap, 3.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    return Q @ np.diag(w) @ Q.T
