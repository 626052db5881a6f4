"""The explicit constants of the quantitative Morse construction."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from ..entropy import ball_covering_number


class ConstantsError(ValueError):
    pass


@dataclass(frozen=True)
class MorseConstants:
    K: float
    eps: float
    k: int
    n: int
    c: float
    C1: float
    Rk: float
    r_eps: float
    gamma: float
    psi1: float
    d_sep: float
    N_bound: int
    psi2: float
    psi3: float
    sigma: float
    r_loc: float
    eta: float

    def to_json(self) -> dict:
        return asdict(self)

    def with_C1(self, C1: float) -> "MorseConstants":
        return replace(self, C1=C1, psi2=_psi2(self.eps, self.k, C1, self.N_bound))


def _psi2(eps, k, C1, N):
    return eps / (2 * k * C1 * float(N) ** 2)


def compute_constants(K: float, eps: float, n: int, k: int, c: float = 1.0, C1: float = 1.0) -> MorseConstants:
    """Evaluate the constant ledger for derivative budget ``K`` and size ``eps``.

    A single ``(K, eps)`` pair is used throughout; ``gamma`` is the regularity
    level of the gradient, ``d_sep`` the separation of critical points,
    ``psi3`` the chart radius and ``eta`` the gradient threshold below which
    points lie within ``psi3`` of a critical point.
    """
    if not K > 0:
        raise ConstantsError("K must be positive (K = 0 means the function is constant on the grid)")
    if not eps > 0 or not c > 0 or not C1 > 0:
        raise ConstantsError("eps, c and C1 must be positive")
    if k < 3:
        raise ConstantsError("k must be at least 3")
    Rk = K / math.factorial(k - 1)
    r_eps = 0.5 * min(eps, (eps / (c ** (1 / n) * Rk ** (1 / k))) ** (k / (k - 1)))
    bracket = 1 - r_eps**n * c * Rk ** (n / k) / (eps**n * r_eps ** (n / k))
    gamma = Rk ** (1 / k) * r_eps * bracket
    if not gamma > 0:
        raise ConstantsError(
            f"gamma = {gamma:.3e} is not positive; use a smaller eps or a larger constant c"
        )
    d_sep = gamma**2 / (4 * K**2)
    N_bound = ball_covering_number(n, d_sep, constructive=False)
    sigma = gamma / 2
    r_loc = min(sigma / (K + eps), gamma / (sigma * n))
    return MorseConstants(
        K=K,
        eps=eps,
        k=k,
        n=n,
        c=c,
        C1=C1,
        Rk=Rk,
        r_eps=r_eps,
        gamma=gamma,
        psi1=gamma,
        d_sep=d_sep,
        N_bound=N_bound,
        psi2=_psi2(eps, k, C1, N_bound),
        psi3=gamma / (2 * n * (K + eps)),
        sigma=sigma,
        r_loc=r_loc,
        eta=r_loc * sigma / 2,
    )
