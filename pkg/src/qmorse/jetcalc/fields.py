"""Point evaluation of scalar fields and vector maps built on jets.

A *scalar field* is anything with ``dim``, ``order``, ``domain_radius`` and a
``jets(points, order)`` method returning a :class:`~qmorse.jetcalc.jets.Jet`.
:class:`~qmorse.jetcalc.expr.FunctionSpec` is the basic one; the Morse
pipeline adds perturbed fields with the same surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DOMAIN_TOL = 1e-12


class DomainError(ValueError):
    pass


@dataclass
class JetValue:
    """Value and derivative tensors of a scalar field at one point."""

    order: int
    value: float
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None
    higher: list = field(default_factory=list)

    def tensor(self, j: int) -> np.ndarray:
        if j == 1:
            return self.grad
        if j == 2:
            return self.hess
        return self.higher[j - 3]


def jet(f, x, order: int) -> JetValue:
    """Exact derivatives of ``f`` at ``x`` up to ``order``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.dim:
        raise DomainError(f"point has dimension {x.shape[0]}, field has {f.dim}")
    if np.linalg.norm(x) > f.domain_radius + DOMAIN_TOL:
        raise DomainError(f"point {x.tolist()} lies outside the ball of radius {f.domain_radius}")
    if not 0 <= order <= f.order:
        raise ValueError(f"order must lie in 0..{f.order}, got {order}")
    j = f.jets(x[None, :], order)
    out = JetValue(order, float(j.value[0]))
    if order >= 1:
        out.grad = j.derivative(1)[0]
    if order >= 2:
        out.hess = j.derivative(2)[0]
    out.higher = [j.derivative(m)[0] for m in range(3, order + 1)]
    return out


def gradients(f, points: np.ndarray) -> np.ndarray:
    return f.jets(points, 1).derivative(1)


def gradients_and_hessians(f, points: np.ndarray):
    j = f.jets(points, 2)
    return j.value, j.derivative(1), j.derivative(2)


# --------------------------------------------------------------------------
# vector maps R^n -> R^m


class VectorMap:
    """A smooth map with batched derivatives ``[F, DF, D2F, ...]``."""

    dim_in: int
    dim_out: int
    domain_radius: float = np.inf

    def derivatives(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.derivatives(np.atleast_2d(x), 0)[0][0]

    def jacobian(self, x) -> np.ndarray:
        return self.derivatives(np.atleast_2d(x), 1)[1][0]


class GradientMap(VectorMap):
    """``x -> Df(x)``; its Jacobian is the Hessian of ``f``."""

    def __init__(self, f):
        self.f = f
        self.dim_in = self.dim_out = f.dim
        self.domain_radius = f.domain_radius

    def derivatives(self, points, order):
        j = self.f.jets(np.atleast_2d(points), order + 1)
        return [j.derivative(m + 1) for m in range(order + 1)]


class ComponentMap(VectorMap):
    """Stack of scalar fields ``(f_1, ..., f_m)`` sharing one domain."""

    def __init__(self, fields):
        self.fields = list(fields)
        dims = {f.dim for f in self.fields}
        if len(dims) != 1:
            raise ValueError("component fields must share a dimension")
        self.dim_in = dims.pop()
        self.dim_out = len(self.fields)
        self.domain_radius = min(f.domain_radius for f in self.fields)

    def derivatives(self, points, order):
        jets = [f.jets(np.atleast_2d(points), order) for f in self.fields]
        return [np.stack([j.derivative(m) for j in jets], axis=1) for m in range(order + 1)]


class LinearMap(VectorMap):
    """``x -> A x + b``."""

    def __init__(self, A, b=None, domain_radius: float = 1.0):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.dim_out, self.dim_in = self.A.shape
        self.b = np.zeros(self.dim_out) if b is None else np.asarray(b, dtype=float)
        self.domain_radius = domain_radius

    def derivatives(self, points, order):
        points = np.atleast_2d(points)
        out = [points @ self.A.T + self.b]
        if order >= 1:
            out.append(np.broadcast_to(self.A, (len(points),) + self.A.shape).copy())
        for m in range(2, order + 1):
            out.append(np.zeros((len(points), self.dim_out) + (self.dim_in,) * m))
        return out
