"""Truncated multivariate Taylor arithmetic, vectorized over evaluation points.

A :class:`Jet` holds the Taylor coefficients ``c[alpha]`` of a function around
each of ``P`` base points, for every multi-index ``|alpha| <= order``.  The
partial derivative is recovered as ``alpha! * c[alpha]``.  Elementary
functions are applied by composing their univariate Taylor series with the
nilpotent (zero constant term) part of the argument, which is exact up to the
truncation order.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


class JetSpace:
    """Multi-index bookkeeping for jets in ``n`` variables up to ``order``."""

    def __init__(self, n: int, order: int):
        if n < 1 or order < 0:
            raise ValueError(f"invalid jet space n={n}, order={order}")
        self.n = n
        self.order = order
        monos = []
        for deg in range(order + 1):
            # graded, lexicographically descending exponents within a degree
            for combo in itertools.combinations_with_replacement(range(n), deg):
                alpha = [0] * n
                for i in combo:
                    alpha[i] += 1
                monos.append(tuple(alpha))
        self.monomials = monos
        self.size = len(monos)
        self.index = {a: i for i, a in enumerate(monos)}
        self.degree = np.array([sum(a) for a in monos])
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in a) for a in monos], dtype=float
        )
        self.unit = [self.index[tuple(int(i == j) for j in range(n))] for i in range(n)] if order >= 1 else []

        ia, ib, ic = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if self.degree[i] + self.degree[j] > order:
                    continue
                ia.append(i)
                ib.append(j)
                ic.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._ia = np.array(ia, dtype=np.intp)
        self._ib = np.array(ib, dtype=np.intp)
        self._gather = sp.csr_matrix(
            (np.ones(len(ic)), (np.array(ic), np.arange(len(ic)))),
            shape=(self.size, len(ic)),
        )

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self._gather @ (a[self._ia] * b[self._ib])

    @lru_cache(maxsize=None)
    def tensor_index(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Monomial index and ``alpha!`` for every entry of the order-``j`` tensor."""
        shape = (self.n,) * j
        idx = np.empty(shape, dtype=np.intp)
        fac = np.empty(shape)
        for entry in itertools.product(range(self.n), repeat=j):
            alpha = [0] * self.n
            for i in entry:
                alpha[i] += 1
            k = self.index[tuple(alpha)]
            idx[entry] = k
            fac[entry] = self.factorial[k]
        return idx, fac


@lru_cache(maxsize=64)
def jet_space(n: int, order: int) -> JetSpace:
    return JetSpace(n, order)


class Jet:
    """Truncated Taylor expansions at ``P`` points; ``c`` has shape ``(M, P)``."""

    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, c: np.ndarray):
        self.space = space
        self.c = c

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value, npts: int) -> "Jet":
        c = np.zeros((space.size, npts))
        c[0] = value
        return cls(space, c)

    @classmethod
    def variables(cls, space: JetSpace, points: np.ndarray) -> list["Jet"]:
        """Coordinate jets ``x_i`` expanded around each row of ``points``."""
        points = np.atleast_2d(points)
        out = []
        for i in range(space.n):
            c = np.zeros((space.size, points.shape[0]))
            c[0] = points[:, i]
            if space.order >= 1:
                c[space.unit[i]] = 1.0
            out.append(cls(space, c))
        return out

    @property
    def npts(self) -> int:
        return self.c.shape[1]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def copy(self) -> "Jet":
        return Jet(self.space, self.c.copy())

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            return other.c
        out = np.zeros_like(self.c)
        out[0] = other
        return out

    def __add__(self, other):
        return Jet(self.space, self.c + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.c - self._coerce(other))

    def __rsub__(self, other):
        return Jet(self.space, self._coerce(other) - self.c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.multiply(self.c, other.c))
        return Jet(self.space, self.c * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.space, self.c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p: int):
        if int(p) != p:
            raise TypeError("jets only support integer powers")
        p = int(p)
        if p < 0:
            return self.reciprocal() ** (-p)
        result = Jet.constant(self.space, 1.0, self.npts)
        base = self
        while p:
            if p & 1:
                result = result * base
            p >>= 1
            if p:
                base = base * base
        return result

    # composition with univariate series ----------------------------------
    def compose(self, taylor: list[np.ndarray]) -> "Jet":
        """Apply ``g`` given ``taylor[j] = g^(j)(a0) / j!`` for ``j <= order``."""
        nil = self.c.copy()
        nil[0] = 0.0
        out = np.zeros_like(self.c)
        out[0] = taylor[0]
        power = None
        for j in range(1, self.space.order + 1):
            power = nil if power is None else self.space.multiply(power, nil)
            out += taylor[j] * power
        return Jet(self.space, out)

    def _fact(self):
        return [math.factorial(j) for j in range(self.space.order + 1)]

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose([e / f for f in self._fact()])

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [s, c, -s, -c]
        return self.compose([cyc[j % 4] / f for j, f in enumerate(self._fact())])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [c, -s, -c, s]
        return self.compose([cyc[j % 4] / f for j, f in enumerate(self._fact())])

    def reciprocal(self) -> "Jet":
        a0 = self.value
        return self.compose([(-1.0) ** j / a0 ** (j + 1) for j in range(self.space.order + 1)])

    def sqrt(self) -> "Jet":
        a0 = self.value
        coeffs = []
        for j in range(self.space.order + 1):
            binom = math.prod(0.5 - i for i in range(j)) / math.factorial(j)
            coeffs.append(binom * a0 ** (0.5 - j))
        return self.compose(coeffs)

    # derivatives --------------------------------------------------------
    def derivative(self, j: int) -> np.ndarray:
        """Order-``j`` derivative tensor, shape ``(P,) + (n,) * j``."""
        if j > self.space.order:
            raise ValueError(f"jet truncated at order {self.space.order}, asked for {j}")
        if j == 0:
            return self.c[0].copy()
        idx, fac = self.space.tensor_index(j)
        t = self.c[idx] * fac[..., None]
        return np.moveaxis(t, -1, 0)

    def truncate(self, order: int) -> "Jet":
        space = jet_space(self.space.n, order)
        keep = [self.space.index[a] for a in space.monomials]
        return Jet(space, self.c[keep])

    def masked(self, mask: np.ndarray) -> "Jet":
        return Jet(self.space, self.c[:, mask])
