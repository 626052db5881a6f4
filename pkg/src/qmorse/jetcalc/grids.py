"""Deterministic sample grids on the closed ball.

The cube ``[-1, 1]^n`` is sampled with ``res`` points per axis and pushed onto
the ball by the radial map ``c -> c * |c|_inf / |c|_2``, which sends cube
faces to the sphere.  Refining ``res -> 2 * res - 1`` gives a superset of the
previous grid, so maxima over nested grids never decrease.
"""

from __future__ import annotations

import itertools

import numpy as np


def cube_to_ball(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    l2 = np.linalg.norm(c, axis=-1, keepdims=True)
    linf = np.max(np.abs(c), axis=-1, keepdims=True)
    scale = np.divide(linf, l2, out=np.zeros_like(l2), where=l2 > 0)
    return c * scale


def cube_lattice(n: int, res: int) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, res)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def ball_grid(n: int, res: int, radius: float = 1.0, center=None) -> np.ndarray:
    """``res**n`` points filling the closed ball, boundary included, C-order."""
    pts = radius * cube_to_ball(cube_lattice(n, res))
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def sphere_grid(n: int, res: int, radius: float = 1.0) -> np.ndarray:
    """Points on the boundary sphere: cube-face lattice with ``2*res - 1`` points per axis."""
    if n == 1:
        return np.array([[-radius], [radius]])
    m = 2 * res - 1
    axis = np.linspace(-1.0, 1.0, m)
    faces = []
    for i, s in itertools.product(range(n), (-1.0, 1.0)):
        mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        cols = [mm.ravel() for mm in mesh]
        cols.insert(i, np.full(cols[0].shape, s))
        faces.append(np.stack(cols, axis=-1))
    c = np.unique(np.concatenate(faces), axis=0)
    return radius * c / np.linalg.norm(c, axis=-1, keepdims=True)


def domain_samples(n: int, res: int, radius: float = 1.0) -> np.ndarray:
    """Interior grid plus the separately sampled boundary sphere."""
    return np.concatenate([ball_grid(n, res, radius), sphere_grid(n, res, radius)])


def cell_diameter(n: int, res: int, radius: float = 1.0) -> float:
    """Nominal cell diagonal of :func:`ball_grid` before the radial map."""
    return radius * 2.0 / (res - 1) * np.sqrt(n)
