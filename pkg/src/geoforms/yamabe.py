"""Singular Yamabe expansion on product manifolds ds^2 + gbar.

Series coefficients are Expressions over the hypersurface coordinates. The
transverse variable s never appears inside them; it is the series index.
J always means the ambient J of the product, which equals
Sc(gbar) / (2(d-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .geometry import (
    CurvaturePipeline,
    MetricField,
    _lowering_sign,
    christoffel_symbols,
    symbolic_inverse,
)
from .tensor import DOWN, TensorValue

__all__ = [
    "SeriesInS",
    "SigmaCalculus",
    "yamabe_residual",
    "solve_series",
    "solve_series_full",
    "closed_form_sigma",
    "ClosedForm",
    "willmore_formula",
    "pe_residual",
    "PEResult",
    "recognize_rational",
    "product_metric",
]


class TruncationError(ValueError):
    pass


class SeriesInS:
    """sum_j c_j s^j for j <= order, plus O(s^(order+1)) unless `exact`."""

    __slots__ = ("coeffs", "order", "exact")

    def __init__(self, coeffs: Sequence, order: int | None = None, exact: bool = False):
        cs = [c if isinstance(c, ex.Expr) else ex.const(c) for c in coeffs]
        if order is None:
            order = len(cs) - 1
        if order < 0:
            raise TruncationError("series order must be non-negative")
        if exact:
            extra = [c for c in cs[order + 1 :] if not c.is_zero]
            if extra:
                raise TruncationError("exact series has terms past its order")
        cs = (cs + [ex.ZERO] * (order + 1))[: order + 1]
        self.coeffs = tuple(cs)
        self.order = order
        self.exact = exact

    def __repr__(self) -> str:
        terms = [f"({c})*s^{j}" for j, c in enumerate(self.coeffs) if not c.is_zero]
        tail = "" if self.exact else f" + O(s^{self.order + 1})"
        return "SeriesInS(" + (" + ".join(terms) or "0") + tail + ")"

    def coeff(self, j: int) -> ex.Expr:
        if j > self.order:
            raise TruncationError(f"coefficient s^{j} is past truncation order {self.order}")
        return self.coeffs[j]

    def _pair(self, other: "SeriesInS"):
        if self.exact and other.exact:
            n = max(self.order, other.order)
            return self.padded(n), other.padded(n), n, True
        n = min(o.order for o in (self, other) if not o.exact)
        return self, other, n, False

    def padded(self, n: int) -> "SeriesInS":
        if n <= self.order:
            return self
        if not self.exact:
            raise TruncationError("cannot extend an inexact series")
        return SeriesInS(self.coeffs, n, exact=True)

    def _c(self, j):
        return self.coeffs[j] if j <= self.order else ex.ZERO

    def __add__(self, other: "SeriesInS") -> "SeriesInS":
        a, b, n, exact = self._pair(other)
        return SeriesInS([ex.add(a._c(j), b._c(j)) for j in range(n + 1)], n, exact)

    def __sub__(self, other: "SeriesInS") -> "SeriesInS":
        a, b, n, exact = self._pair(other)
        return SeriesInS([ex.sub(a._c(j), b._c(j)) for j in range(n + 1)], n, exact)

    def __mul__(self, other: "SeriesInS") -> "SeriesInS":
        """Cauchy product truncated at the smaller order (result is inexact)."""
        if self.exact and other.exact:
            n = max(self.order, other.order)
        else:
            n = min(o.order for o in (self, other) if not o.exact)
        out = []
        for k in range(n + 1):
            acc = ex.ZERO
            for i in range(k + 1):
                a, b = self._c(i), other._c(k - i)
                if a.is_zero or b.is_zero:
                    continue
                acc = ex.add(acc, ex.mul(a, b))
            out.append(acc)
        return SeriesInS(out, n, exact=False)

    def truncate(self, n: int) -> "SeriesInS":
        if n > self.order and not self.exact:
            raise TruncationError(f"series known only through s^{self.order}")
        return SeriesInS([self._c(j) for j in range(n + 1)], n, exact=False)

    def scale(self, c) -> "SeriesInS":
        c = c if isinstance(c, ex.Expr) else ex.const(c)
        return SeriesInS([ex.mul(c, x) for x in self.coeffs], self.order, self.exact)

    def ds(self) -> "SeriesInS":
        cs = [ex.mul(ex.const(j + 1), self._c(j + 1)) for j in range(self.order)]
        if self.exact:
            return SeriesInS(cs + [ex.ZERO], self.order, True)
        return SeriesInS(cs or [ex.ZERO], max(self.order - 1, 0), False)

    def map(self, fn: Callable[[ex.Expr], ex.Expr]) -> "SeriesInS":
        """Apply a hypersurface operator coefficientwise."""
        return SeriesInS([fn(c) for c in self.coeffs], self.order, self.exact)

    def with_coeff(self, j: int, value: ex.Expr) -> "SeriesInS":
        n = max(self.order, j)
        cs = [self._c(i) for i in range(n + 1)]
        cs[j] = value
        return SeriesInS(cs, n, self.exact)

    def is_odd(self) -> bool:
        return all(c.is_zero for c in self.coeffs[0::2])

    def to_expr(self, svar: str) -> ex.Expr:
        s = ex.var(svar)
        acc = ex.ZERO
        for j, c in enumerate(self.coeffs):
            if not c.is_zero:
                acc = ex.add(acc, ex.mul(c, ex.power(s, j)) if j else c)
        return acc

    def evaluate(self, bindings, s: float) -> float:
        ev = ex.Evaluator(bindings)
        return float(sum(ev(c) * s**j for j, c in enumerate(self.coeffs) if not c.is_zero))


class SigmaCalculus:
    """Symbolic gradient, Laplacian and curvature of gbar on Sigma."""

    def __init__(self, gbar: MetricField):
        self.g = gbar
        self.coords = gbar.coords
        n = gbar.dims
        self.n = n
        self.inv = symbolic_inverse(gbar.matrix())
        self.gamma = christoffel_symbols(gbar)
        # contracted Christoffels g^ij Gamma^k_ij for the Laplacian
        self._lap_gamma = []
        for k in range(n):
            acc = ex.ZERO
            for i in range(n):
                for j in range(n):
                    if self.inv[i][j].is_zero or self.gamma[k, i, j].is_zero:
                        continue
                    acc = ex.add(acc, ex.mul(self.inv[i][j], self.gamma[k, i, j]))
            self._lap_gamma.append(acc)
        self._sc = None

    def d(self, u: ex.Expr, i: int) -> ex.Expr:
        return ex.differentiate(u, self.coords[i])

    def grad_dot(self, u: ex.Expr, v: ex.Expr) -> ex.Expr:
        if u.is_const or v.is_const:
            return ex.ZERO
        du = [self.d(u, i) for i in range(self.n)]
        dv = du if u is v else [self.d(v, i) for i in range(self.n)]
        acc = ex.ZERO
        for i, j in product(range(self.n), repeat=2):
            if self.inv[i][j].is_zero or du[i].is_zero or dv[j].is_zero:
                continue
            acc = ex.add(acc, ex.mul(self.inv[i][j], ex.mul(du[i], dv[j])))
        return acc

    def laplacian(self, u: ex.Expr) -> ex.Expr:
        if u.is_const:
            return ex.ZERO
        acc = ex.ZERO
        du = [self.d(u, k) for k in range(self.n)]
        for i, j in product(range(self.n), repeat=2):
            if self.inv[i][j].is_zero:
                continue
            acc = ex.add(acc, ex.mul(self.inv[i][j], self.d(du[i], j)))
        for k in range(self.n):
            if du[k].is_zero or self._lap_gamma[k].is_zero:
                continue
            acc = ex.sub(acc, ex.mul(self._lap_gamma[k], du[k]))
        return acc

    @property
    def scalar_curvature(self) -> ex.Expr:
        if self._sc is None:
            n, G = self.n, self.gamma
            sc = ex.ZERO
            for b, dd in product(range(n), repeat=2):
                if self.inv[b][dd].is_zero:
                    continue
                ric = ex.ZERO
                for a in range(n):
                    ric = ex.add(ric, self.d(G[a, b, dd], a))
                    ric = ex.sub(ric, self.d(G[a, a, dd], b))
                    for e in range(n):
                        ric = ex.add(ric, ex.mul(G[a, a, e], G[e, b, dd]))
                        ric = ex.sub(ric, ex.mul(G[a, b, e], G[e, a, dd]))
                sc = ex.add(sc, ex.mul(self.inv[b][dd], ric))
            self._sc = sc
        return self._sc

    def ambient_J(self, d: int) -> ex.Expr:
        return ex.mul(ex.const(Fraction(1, 2 * (d - 1))), self.scalar_curvature)


def _as_calc(gbar) -> SigmaCalculus:
    return gbar if isinstance(gbar, SigmaCalculus) else SigmaCalculus(gbar)


def _box(calc: SigmaCalculus, J: ex.Expr, v: SeriesInS) -> SeriesInS:
    """(d_s^2 + Delta_bar + J) v."""
    return v.ds().ds() + v.map(calc.laplacian) + v.map(lambda c: ex.mul(J, c))


def _bilinear(calc: SigmaCalculus, J: ex.Expr, d: int, u: SeriesInS, v: SeriesInS) -> SeriesInS:
    """Polarization of |I_sigma|^2: B(s, s) = |I_sigma|^2."""
    grad = _series_grad_dot(calc, u, v)
    lead = u.ds() * v.ds() + grad
    cross = u * _box(calc, J, v) + v * _box(calc, J, u)
    return lead - cross.scale(ex.const(Fraction(1, d)))


def _series_grad_dot(calc: SigmaCalculus, u: SeriesInS, v: SeriesInS) -> SeriesInS:
    n = min(u.order, v.order)
    out = []
    for k in range(n + 1):
        acc = ex.ZERO
        for i in range(k + 1):
            a, b = u._c(i), v._c(k - i)
            if a.is_const or b.is_const:
                continue
            acc = ex.add(acc, calc.grad_dot(a, b))
        out.append(acc)
    return SeriesInS(out, n, exact=False)


def yamabe_residual(sigma: SeriesInS, gbar, d: int, through: int | None = None) -> SeriesInS:
    """|I_sigma|^2 - 1 for g = ds^2 + gbar, truncated at sigma's order."""
    calc = _as_calc(gbar)
    if calc.n != d - 1:
        raise ValueError(f"gbar has dimension {calc.n}, expected d - 1 = {d - 1}")
    if through is not None and through > sigma.order:
        raise TruncationError(f"residual through s^{through} needs sigma of order >= {through}")
    J = calc.ambient_J(d)
    res = _bilinear(calc, J, d, sigma, sigma) - SeriesInS([ex.ONE], sigma.order, exact=True)
    return res if through is None else res.truncate(through)


def default_order(d: int) -> int:
    return d + 2 if d % 2 == 0 else 9


def solve_series(gbar, d: int, order: int | None = None):
    """Order-by-order odd solution sigma = s + phi_3 s^3 + ...

    Returns ``(sigma, willmore)``. For even d the recursion stops at the
    obstruction psi_d, returned as an Expression; for odd d `willmore` is None
    and sigma is determined through `order`.
    """
    sigma, willmore, _ = solve_series_full(gbar, d, order)
    return sigma, willmore


def solve_series_full(gbar, d: int, order: int | None = None):
    """Like :func:`solve_series` but also returns the solver's residual series.

    The residual is updated incrementally, so every coefficient the recursion
    cancelled is the literal zero Expression.
    """
    if d < 3:
        raise ValueError("d must be >= 3")
    calc = _as_calc(gbar)
    N = default_order(d) if order is None else order
    if d % 2 == 0 and N < d:
        raise TruncationError(f"order {N} cannot reach the obstruction at s^{d}")
    if N < 1:
        raise TruncationError("order must be >= 1")
    J = calc.ambient_J(d)
    sigma = SeriesInS([ex.ZERO, ex.ONE], N, exact=True)
    residual = yamabe_residual(sigma, calc, d)
    willmore = None
    ell = 0
    while 2 * ell + 3 <= N:
        k = 2 * ell + 2
        psi = residual.coeff(k)
        if d % 2 == 0 and k == d:
            willmore = psi
            break
        factor = Fraction(-d, 2 * (2 * ell + 3) * (d - 2 * ell - 2))
        phi = ex.mul(ex.const(factor), psi)
        delta = SeriesInS([ex.ZERO] * (2 * ell + 3) + [phi], N, exact=True)
        # incremental update keeps the cancelled coefficient structurally zero
        step = _bilinear(calc, J, d, sigma, delta).scale(ex.const(2)) + _bilinear(calc, J, d, delta, delta)
        residual = residual + step
        sigma = sigma + delta
        ell += 1
    if d % 2 == 0 and willmore is None and N >= d:
        willmore = residual.coeff(d)
    return sigma, willmore, residual


def willmore_formula(gbar, d: int) -> ex.Expr:
    """Closed forms: psi_4 = -Delta J / 12, psi_6 = (J Delta J + |grad J|^2 - Delta^2 J / 2) / 180."""
    calc = _as_calc(gbar)
    J = calc.ambient_J(d)
    if d % 2:
        return ex.ZERO
    if d == 4:
        return ex.mul(ex.const(Fraction(-1, 12)), calc.laplacian(J))
    if d == 6:
        lapJ = calc.laplacian(J)
        inner = ex.add(ex.mul(J, lapJ), calc.grad_dot(J, J))
        inner = ex.sub(inner, ex.mul(ex.const(Fraction(1, 2)), calc.laplacian(lapJ)))
        return ex.mul(ex.const(Fraction(1, 180)), inner)
    raise ValueError("closed Willmore formulas are known here only for d = 4 and d = 6")


@dataclass(frozen=True)
class ClosedForm:
    branch: str  # "sin" | "linear" | "sinh"
    A: float
    r: float
    r_squared: Fraction | float
    d: int

    def expr(self, svar: str = "t") -> ex.Expr:
        s = ex.var(svar)
        if self.branch == "linear":
            return s
        fn = "sin" if self.branch == "sin" else "sinh"
        return ex.mul(ex.const(self.A), ex.func(fn, ex.mul(ex.const(self.r), s)))

    def series(self, order: int) -> SeriesInS:
        """Exact coefficients (A r = 1): sinh -> r^2k/(2k+1)!, sin alternates."""
        cs = [ex.ZERO] * (order + 1)
        if order >= 1:
            cs[1] = ex.ONE
        if self.branch != "linear":
            sgn = -1 if self.branch == "sin" else 1
            for k in range(1, (order - 1) // 2 + 1):
                c = (sgn * self.r_squared) ** k / math.factorial(2 * k + 1)
                cs[2 * k + 1] = ex.const(c)
        return SeriesInS(cs, order, exact=False)


def _as_fraction(x) -> Fraction | float:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    f = Fraction(x).limit_denominator(10**6)
    return f if abs(float(f) - x) <= 1e-14 * max(1.0, abs(x)) else float(x)


def closed_form_sigma(Sc, d: int) -> ClosedForm:
    """The sin / s / sinh solution for constant hypersurface scalar curvature."""
    if d < 3:
        raise ValueError("d must be >= 3")
    sc = _as_fraction(Sc)
    if sc == 0:
        return ClosedForm("linear", 1.0, 0.0, Fraction(0), d)
    if sc < 0:
        r2 = sc / ((d - 1) * (2 - d))
        branch = "sin"
    else:
        r2 = sc / ((d - 1) * (d - 2))
        branch = "sinh"
    r = math.sqrt(float(r2))
    return ClosedForm(branch, 1.0 / r, r, r2, d)


def recognize_rational(e: ex.Expr, coords: Sequence[str], points: Sequence[Sequence[float]],
                       tol: float = 1e-12, max_den: int = 10**6):
    """A Fraction if `e` takes one rational value at every point, else None."""
    if e.is_const:
        v = e.value
        return v if isinstance(v, Fraction) else _maybe_fraction(float(v), tol, max_den)
    vals = [float(ex.evaluate(e, dict(zip(coords, p)))) for p in points]
    if not vals or max(vals) - min(vals) > tol * max(1.0, abs(vals[0])):
        return None
    return _maybe_fraction(float(np.mean(vals)), tol, max_den)


def _maybe_fraction(v: float, tol: float, max_den: int):
    f = Fraction(v).limit_denominator(max_den)
    return f if abs(float(f) - v) <= tol * max(1.0, abs(v)) else None


# --------------------------------------------------------------- PE residual


def product_metric(svar: str, gbar: MetricField) -> MetricField:
    coords = (svar,) + gbar.coords
    comps = {(0, 0): ex.ONE}
    for i in range(gbar.dims):
        for j in range(i, gbar.dims):
            comps[(i + 1, j + 1)] = gbar.component(i, j)
    return MetricField(coords, comps)


@dataclass(frozen=True)
class PEResult:
    residual: TensorValue
    max_abs: float
    schouten_formula_gap: float | None


def _sigma_expr(sigma, svar: str, coords) -> ex.Expr:
    if isinstance(sigma, SeriesInS):
        return sigma.to_expr(svar)
    if isinstance(sigma, ClosedForm):
        return sigma.expr(svar)
    if isinstance(sigma, ex.Expr):
        return sigma
    return ex.parse(str(sigma), coords)


def pe_residual(gbar: MetricField, sigma, point: Sequence[float], svar: str = "t",
                constant_sc: float | None = None) -> PEResult:
    """nabla_(a nabla_b)o sigma + sigma Po_ab on ds^2 + gbar at (s, x).

    When `constant_sc` is given the ambient trace-free Schouten is also
    compared with (gbar/(d-1) - n n) Sc / (d(d-2)).
    """
    g = product_metric(svar, gbar)
    d = g.dims
    p = tuple(float(v) for v in point)
    sig = _sigma_expr(sigma, svar, g.coords)
    pipe = CurvaturePipeline(g.jet(p, 2), _lowering_sign())
    ev = ex.Evaluator(dict(zip(g.coords, p)))
    dsig = [ex.differentiate(sig, c) for c in g.coords]
    grad = np.array([ev(e) for e in dsig])
    hess = np.array([[ev(ex.differentiate(dsig[a], c)) for c in g.coords] for a in range(d)])
    G = pipe.gamma.value
    H = hess - np.einsum("cab,c->ab", G, grad)
    H = 0.5 * (H + H.T)
    gv, gi = pipe.g.value, pipe.ginv.value
    P = pipe.schouten.value
    J = float(np.einsum("ab,ab->", gi, P))
    Po = P - J / d * gv
    Ho = H - float(np.einsum("ab,ab->", gi, H)) / d * gv
    res = Ho + ev(sig) * Po
    gap = None
    if constant_sc is not None:
        nn = np.zeros((d, d))
        nn[0, 0] = 1.0
        gbar_block = np.zeros((d, d))
        gbar_block[1:, 1:] = gv[1:, 1:]
        formula = (gbar_block / (d - 1) - nn) * constant_sc / (d * (d - 2))
        gap = float(np.max(np.abs(formula - Po)))
    return PEResult(TensorValue(d, (DOWN, DOWN), res), float(np.max(np.abs(res))), gap)
