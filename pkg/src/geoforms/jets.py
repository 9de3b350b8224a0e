"""Truncated multivariate Taylor jets of tensor fields at a point.

A jet stores, for every multi-index alpha with |alpha| <= order, the Taylor
coefficient d^alpha f(p) / alpha!. The last array axis runs over monomials in
graded order, so the coefficients of a lower-order jet are a prefix of those
of a higher-order one. Products, partial derivatives and matrix inverses are
exact up to rounding; nothing here is a finite difference.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def monomials(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    # graded, and within a degree reverse-lex so (deg,0,..) comes first
    out.sort(key=lambda a: (sum(a), [-x for x in a]))
    return tuple(out)


class _Space:
    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.monos = monomials(nvars, order)
        self.size = len(self.monos)
        self.index = {a: i for i, a in enumerate(self.monos)}
        self.degree = np.array([sum(a) for a in self.monos])
        self._mult = None
        self._deriv = {}
        self._mat_index = None

    def mult_table(self):
        if self._mult is None:
            I, J, K = [], [], []
            for i, a in enumerate(self.monos):
                da = sum(a)
                for j, b in enumerate(self.monos):
                    if da + sum(b) > self.order:
                        continue
                    I.append(i)
                    J.append(j)
                    K.append(self.index[tuple(x + y for x, y in zip(a, b))])
            I, J, K = np.array(I), np.array(J), np.array(K)
            perm = np.argsort(K, kind="stable")
            I, J, K = I[perm], J[perm], K[perm]
            starts = np.searchsorted(K, np.arange(self.size))
            self._mult = (I, J, starts)
        return self._mult

    def mat_index(self):
        """idx[K, J] = I with mono_I * mono_J = mono_K, else `size` (a zero pad)."""
        if self._mat_index is None:
            I, J, starts = self.mult_table()
            K = np.repeat(np.arange(self.size), np.diff(np.append(starts, len(I))))
            idx = np.full((self.size, self.size), self.size, dtype=np.intp)
            idx[K, J] = I
            self._mat_index = idx
        return self._mat_index

    def deriv_map(self, i: int):
        """Source indices and factors for d/dx_i into the order-1 space."""
        if i not in self._deriv:
            lower = space(self.nvars, self.order - 1)
            src = np.empty(lower.size, dtype=int)
            fac = np.empty(lower.size)
            for k, a in enumerate(lower.monos):
                b = list(a)
                b[i] += 1
                src[k] = self.index[tuple(b)]
                fac[k] = b[i]
            self._deriv[i] = (src, fac)
        return self._deriv[i]


@lru_cache(maxsize=None)
def space(nvars: int, order: int) -> _Space:
    if order < 0:
        raise ValueError("jet order must be non-negative")
    return _Space(nvars, order)


class Jet:
    """Tensor-valued truncated Taylor jet; `coef` has shape tensor_shape + (M,)."""

    __slots__ = ("sp", "coef", "_mat")

    def __init__(self, sp: _Space, coef: np.ndarray):
        self.sp = sp
        self.coef = coef
        self._mat = None

    def series_matrix(self) -> np.ndarray:
        """Multiplication by this series as a (K, J) matrix per tensor entry."""
        if self._mat is None:
            pad = np.concatenate([self.coef, np.zeros(self.shape + (1,))], axis=-1)
            self._mat = pad[..., self.sp.mat_index()]
        return self._mat

    @property
    def order(self) -> int:
        return self.sp.order

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.coef[..., 0]

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        sp = space(self.sp.nvars, order)
        return Jet(sp, self.coef[..., : sp.size])

    def d(self, i: int) -> "Jet":
        src, fac = self.sp.deriv_map(i)
        return Jet(space(self.sp.nvars, self.order - 1), self.coef[..., src] * fac)

    def grad(self) -> "Jet":
        """Partial derivatives stacked on a new leading axis."""
        parts = [self.d(i).coef for i in range(self.sp.nvars)]
        return Jet(space(self.sp.nvars, self.order - 1), np.stack(parts, axis=0))

    def __add__(self, other: "Jet") -> "Jet":
        a, b = _common(self, other)
        return Jet(a.sp, a.coef + b.coef)

    def __sub__(self, other: "Jet") -> "Jet":
        a, b = _common(self, other)
        return Jet(a.sp, a.coef - b.coef)

    def __neg__(self) -> "Jet":
        return Jet(self.sp, -self.coef)

    def scale(self, c) -> "Jet":
        return Jet(self.sp, self.coef * c)

    def transpose(self, *axes) -> "Jet":
        return Jet(self.sp, np.transpose(self.coef, tuple(axes) + (len(axes),)))


def _common(a: Jet, b: Jet):
    n = min(a.order, b.order)
    return a.truncate(n), b.truncate(n)


def constant(value, nvars: int, order: int) -> Jet:
    sp = space(nvars, order)
    value = np.asarray(value, dtype=float)
    coef = np.zeros(value.shape + (sp.size,))
    coef[..., 0] = value
    return Jet(sp, coef)


def einsum(spec: str, a: Jet, b: Jet) -> Jet:
    """Tensor contraction of two jets, multiplying their Taylor series."""
    a, b = _common(a, b)
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    if a.sp.size == 1:
        return Jet(a.sp, np.einsum(f"{sa}p,{sb}p->{out}p", a.coef, b.coef))
    # the smaller operand becomes a dense multiplication matrix so the
    # contraction runs as a matrix product
    if a.coef.size <= b.coef.size:
        res = np.einsum(f"{sa}KJ,{sb}J->{out}K", a.series_matrix(), b.coef, optimize=True)
    else:
        res = np.einsum(f"{sa}J,{sb}KJ->{out}K", a.coef, b.series_matrix(), optimize=True)
    return Jet(a.sp, res)


def contract_const(spec: str, a: Jet, c: np.ndarray) -> Jet:
    """Contract a jet with a constant array (no series product needed)."""
    ins, out = spec.split("->")
    sa, sc = ins.split(",")
    return Jet(a.sp, np.einsum(f"{sa}p,{sc}->{out}p", a.coef, c, optimize=True))


def mat_inverse(a: Jet) -> Jet:
    """Inverse of a square-matrix jet (last two tensor axes)."""
    a0inv = np.linalg.inv(a.value)
    nil = Jet(a.sp, a.coef.copy())
    nil.coef[..., 0] = 0.0
    base = constant(a0inv, a.sp.nvars, a.order)
    result = base
    term = base
    # (A0 + N)^-1 = sum_k (-A0^-1 N)^k A0^-1, N nilpotent at this order
    minus_a0inv_n = Jet(a.sp, np.einsum("ki,ijp->kjp", -a0inv, nil.coef))
    for _ in range(a.order):
        term = einsum("ij,jk->ik", minus_a0inv_n, term)
        result = result + term
    return result


def reciprocal(a: Jet) -> Jet:
    """1/a for a scalar-field jet (elementwise over tensor axes)."""
    a0 = a.value
    if np.any(a0 == 0):
        raise ZeroDivisionError("reciprocal of a jet with zero value")
    nil = Jet(a.sp, a.coef / a0[..., None])
    nil.coef[..., 0] = 0.0
    # 1/(a0 (1 + u)) = (1/a0) sum (-u)^k
    result = constant(np.ones_like(a0), a.sp.nvars, a.order)
    term = result
    idx = "".join(chr(ord("a") + i) for i in range(a0.ndim))
    spec = f"{idx},{idx}->{idx}"
    for _ in range(a.order):
        term = -einsum(spec, term, nil)
        result = result + term
    return Jet(a.sp, result.coef / a0[..., None])


def from_derivatives(values: dict[tuple[int, ...], np.ndarray], nvars: int, order: int) -> Jet:
    """Build a jet from partial derivatives keyed by multi-index."""
    sp = space(nvars, order)
    first = next(iter(values.values()))
    coef = np.zeros(np.shape(first) + (sp.size,))
    for k, alpha in enumerate(sp.monos):
        fact = 1
        for x in alpha:
            fact *= factorial(x)
        coef[..., k] = np.asarray(values[alpha]) / fact
    return Jet(sp, coef)


def derivative_at(jet: Jet, alpha: tuple[int, ...]) -> np.ndarray:
    """Recover the partial derivative d^alpha at the base point."""
    fact = 1
    for x in alpha:
        fact *= factorial(x)
    return jet.coef[..., jet.sp.index[tuple(alpha)]] * fact
