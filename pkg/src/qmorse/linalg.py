"""Small dense matrix kernels.

Eigen- and singular-value routines are cyclic Jacobi iterations, batched over
leading axes so grid scans can diagonalize thousands of small matrices at once.
The congruence reduction sends a symmetric ``B`` near a reference ``A`` to the
sign normal form ``D0 = diag(+1, ..., +1, -1, ..., -1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60
DEGENERATE_TOL = 1e-10


class DegenerateMatrixError(ValueError):
    """A symmetric matrix with (numerically) zero eigenvalue."""


class OutsideNeighborhoodError(ValueError):
    """``B`` is not in the neighborhood ``U(A)`` where the congruence map is defined."""


class DominanceLostError(ValueError):
    """``Q0^T B Q0`` is not strictly diagonally dominant."""


# --------------------------------------------------------------------------
# Jacobi iterations


def _rotation(app, aqq, apq):
    # symmetric Schur 2x2: returns (c, s) zeroing the (p, q) entry
    nz = apq != 0
    tau = np.divide(aqq - app, 2.0 * apq, out=np.zeros_like(apq), where=nz)
    t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(nz, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c


def jacobi_eigh(A: np.ndarray, tol: float = JACOBI_TOL):
    """Eigen-decomposition of symmetric matrices by cyclic Jacobi sweeps.

    Parameters
    ----------
    A : array, shape (..., n, n)
        Symmetric matrices.
    tol : float
        Sweeps stop when the off-diagonal Frobenius mass is at most
        ``tol`` times the Frobenius norm of each matrix.

    Returns
    -------
    w : array, shape (..., n)
        Eigenvalues in descending order (stable with respect to the original
        diagonal position on ties).
    V : array, shape (..., n, n)
        Orthonormal eigenvectors as columns; each column's first entry whose
        magnitude exceeds ``1e-12`` is positive.
    """
    A = np.array(A, dtype=float)
    n = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape((-1, n, n)).copy()
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    V = np.broadcast_to(np.eye(n), A.shape).copy()
    scale = np.sqrt(np.sum(A * A, axis=(-1, -2)))
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum((A * A)[:, offmask], axis=-1))
        if np.all(off <= tol * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                c, s = _rotation(A[:, p, p], A[:, q, q], A[:, p, q])
                c_, s_ = c[:, None], s[:, None]
                # A <- J^T A J with J acting on columns p, q
                ap, aq = A[:, :, p].copy(), A[:, :, q].copy()
                A[:, :, p] = c_ * ap - s_ * aq
                A[:, :, q] = s_ * ap + c_ * aq
                ap, aq = A[:, p, :].copy(), A[:, q, :].copy()
                A[:, p, :] = c_ * ap - s_ * aq
                A[:, q, :] = s_ * ap + c_ * aq
                A[:, p, q] = A[:, q, p] = 0.0
                vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = c_ * vp - s_ * vq
                V[:, :, q] = s_ * vp + c_ * vq
    w = np.diagonal(A, axis1=-2, axis2=-1).copy()
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    V *= _column_signs(V)[:, None, :]
    return w.reshape(batch + (n,)), V.reshape(batch + (n, n))


def _column_signs(V):
    big = np.abs(V) > 1e-12
    first = np.argmax(big, axis=-2)
    lead = np.take_along_axis(V, first[:, None, :], axis=-2)[:, 0, :]
    return np.where(lead < 0, -1.0, 1.0)


def jacobi_singular_values(M: np.ndarray, tol: float = JACOBI_TOL) -> np.ndarray:
    """Singular values (descending, length ``min(m, n)``) by one-sided Jacobi.

    Columns are orthogonalized pairwise, which diagonalizes ``M^T M``
    implicitly and keeps small singular values accurate.
    """
    M = np.array(M, dtype=float)
    m, n = M.shape[-2:]
    batch = M.shape[:-2]
    if n > m:
        M = np.swapaxes(M, -1, -2)
        m, n = n, m
    X = M.reshape((-1, m, n)).copy()
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                xp, xq = X[:, :, p], X[:, :, q]
                alpha = np.sum(xp * xp, axis=-1)
                beta = np.sum(xq * xq, axis=-1)
                gamma = np.sum(xp * xq, axis=-1)
                act = np.abs(gamma) > tol * np.sqrt(alpha * beta)
                if not np.any(act):
                    continue
                rotated = True
                c, s = _rotation(alpha, beta, np.where(act, gamma, 0.0))
                c_, s_ = c[:, None], s[:, None]
                X[:, :, p], X[:, :, q] = c_ * xp - s_ * xq, s_ * xp + c_ * xq
        if not rotated:
            break
    sv = np.sqrt(np.sum(X * X, axis=-2))
    sv = -np.sort(-sv, axis=-1)
    return sv.reshape(batch + (n,))


def spectral_norm(M: np.ndarray) -> np.ndarray:
    return jacobi_singular_values(M)[..., 0]


def symmetric_norm(A: np.ndarray) -> np.ndarray:
    """Operator norm of symmetric matrices, ``max |eigenvalue|``."""
    w, _ = jacobi_eigh(A)
    return np.max(np.abs(w), axis=-1)


# --------------------------------------------------------------------------
# singular spectrum


@dataclass(frozen=True)
class SingularSpectrum:
    """``sigma[0] = 1`` followed by the ``m`` singular values, zero padded."""

    sigma: tuple
    dim_in: int

    @property
    def values(self) -> np.ndarray:
        return np.array(self.sigma[1:])

    @property
    def sigma_max(self) -> float:
        return self.sigma[1] if len(self.sigma) > 1 else 0.0

    @property
    def sigma_min(self) -> float:
        """``min_{|x| = 1} |Mx|``; zero whenever the domain is larger than the range."""
        m = len(self.sigma) - 1
        if self.dim_in > m or m == 0:
            return 0.0
        return self.sigma[self.dim_in]


def singular_values(M) -> SingularSpectrum:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m, n = M.shape
    sv = jacobi_singular_values(M)
    padded = np.zeros(m)
    padded[: min(m, n)] = sv[: min(m, n)]
    return SingularSpectrum((1.0,) + tuple(float(s) for s in padded), n)


def singular_value_array(M: np.ndarray) -> np.ndarray:
    """Batched singular values padded to the row count, shape ``(..., m)``."""
    m, n = M.shape[-2:]
    sv = jacobi_singular_values(M)
    if n >= m:
        return sv
    pad = np.zeros(M.shape[:-2] + (m - n,))
    return np.concatenate([sv, pad], axis=-1)


# --------------------------------------------------------------------------
# congruence reduction


@dataclass(frozen=True)
class CongruenceReduction:
    """Normal form data at a reference matrix ``A``: ``Q0^T A Q0 = D0``."""

    A: np.ndarray
    Q0: np.ndarray
    D0: np.ndarray  # diagonal entries, +1s then -1s
    radius: float
    l: int

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q0_norm_sq(self) -> float:
        return float(spectral_norm(self.Q0) ** 2)

    def contains(self, B) -> bool:
        return float(symmetric_norm(np.asarray(B) - self.A)) <= self.radius * (1 + 1e-12)

    def to_json(self) -> dict:
        return {
            "A": self.A.tolist(),
            "Q0": self.Q0.tolist(),
            "D0": self.D0.tolist(),
            "radius": self.radius,
            "l": self.l,
        }


def normalizer(A) -> CongruenceReduction:
    """Build ``Q0 = V |Lambda|^{-1/2}`` with positive eigenvalues first.

    Raises :class:`DegenerateMatrixError` when ``min |eigenvalue| < 1e-10``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("normalizer needs a square matrix")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * (1 + np.abs(A).max())):
        raise ValueError("normalizer needs a symmetric matrix")
    n = A.shape[0]
    w, V = jacobi_eigh(A)  # descending: positives already first
    sigma_min = float(np.min(np.abs(w)))
    if sigma_min < DEGENERATE_TOL:
        raise DegenerateMatrixError(f"matrix is degenerate (min |eigenvalue| = {sigma_min:.3e})")
    Q0 = V / np.sqrt(np.abs(w))[None, :]
    D0 = np.where(w > 0, 1.0, -1.0)
    radius = sigma_min / (2 * n)
    return CongruenceReduction(A, Q0, D0, radius, int(np.sum(w > 0)))


def ldl_nopivot(G: np.ndarray):
    """``G = L diag(d) L^T`` with unit lower-triangular ``L``, no pivoting."""
    G = np.array(G, dtype=float)
    n = G.shape[0]
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        d[j] = G[j, j] - np.sum(L[j, :j] ** 2 * d[:j])
        if d[j] == 0:
            raise DominanceLostError(f"zero pivot at step {j}")
        for i in range(j + 1, n):
            L[i, j] = (G[i, j] - np.sum(L[i, :j] * L[j, :j] * d[:j])) / d[j]
    return L, d


def congruence_reduce(ctx: CongruenceReduction, B, *, check: bool = True) -> np.ndarray:
    """The map ``B -> Q`` with ``Q^T B Q = D0`` and ``Q(A) = Q0``.

    ``G = Q0^T B Q0`` is formed as ``D0 + Q0^T (B - A) Q0`` so that ``B = A``
    yields ``G = D0`` and hence ``Q = Q0`` exactly.  Symmetric elimination
    ``G = L D L^T`` then gives ``Q = Q0 L^{-T} |D|^{-1/2}``.
    """
    B = np.array(B, dtype=float)
    if check and not ctx.contains(B):
        dist = float(symmetric_norm(B - ctx.A))
        raise OutsideNeighborhoodError(f"|B - A| = {dist:.3e} exceeds radius {ctx.radius:.3e}")
    E = B - ctx.A
    G = np.diag(ctx.D0) + ctx.Q0.T @ E @ ctx.Q0
    G = 0.5 * (G + G.T)
    diag = np.abs(np.diag(G))
    offsum = np.sum(np.abs(G), axis=1) - diag
    if check and not np.all(diag > offsum):
        raise DominanceLostError("Q0^T B Q0 lost strict diagonal dominance")
    L, d = ldl_nopivot(G)
    if not np.array_equal(np.sign(d), ctx.D0):
        raise DominanceLostError("pivot signs differ from the reference inertia")
    T = np.linalg.solve(L.T, np.diag(1.0 / np.sqrt(np.abs(d))))
    return ctx.Q0 @ T


def transformed(ctx: CongruenceReduction, B) -> np.ndarray:
    """``Q0^T B Q0`` (the matrix whose leading minors the reduction relies on)."""
    return ctx.Q0.T @ np.asarray(B, dtype=float) @ ctx.Q0
