"""Curvature of a symbolic metric at points.

Conventions (index order as written)::

    Gamma^c_ab   = 1/2 g^cd (d_a g_bd + d_b g_ad - d_d g_ab)
    R_ab^c_d     = d_a Gamma^c_bd - d_b Gamma^c_ad + Gamma^c_ae Gamma^e_bd - Gamma^c_be Gamma^e_ad
                   (so x^a y^b R_ab^c_d z^d = x^a y^b [nabla_a, nabla_b] z^c)
    R_abcd       = g_ce R_ab^e_d
    Ric_ab       = R_ca^c_b,  Sc = g^ab Ric_ab
    P_ab         = (Ric_ab - Sc g_ab / (2(d-1))) / (d-2),  J = g^ab P_ab
    W_abcd       = R_abcd - g_ac P_bd + g_ad P_bc + g_bc P_ad - g_bd P_ac
    C_abc        = nabla_a P_bc - nabla_b P_ac
    B_ab         = Delta P_ab - nabla^c nabla_a P_bc + P^cd W_acbd

With this lowering the unit 3-sphere has Sc = +6 and W is trace-free; the
sign is re-derived at import time by :mod:`geoforms.conventions`.

Metric components are differentiated symbolically; the resulting partial
derivatives seed Taylor jets (:mod:`geoforms.jets`) through which every
curvature quantity and iterated covariant derivative is assembled exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from . import jets
from .jets import Jet
from .tensor import DOWN, UP, TensorValue

__all__ = [
    "MetricField",
    "CurvatureStack",
    "CurvaturePipeline",
    "SingularMetricError",
    "SymbolicTensor",
    "curvature_stack",
    "covariant_derivative",
    "christoffel_symbols",
    "riemann_derivatives",
    "fd_check",
    "STACK_MEMBERS",
]


class SingularMetricError(ValueError):
    pass


def _as_expr(e, coords) -> ex.Expr:
    if isinstance(e, ex.Expr):
        return e
    if isinstance(e, str):
        return ex.parse(e, coords)
    return ex.const(e)


class MetricField:
    """Symmetric metric with Expression components over named coordinates.

    `components` maps index pairs ``(i, j)`` (either order) to expressions or
    DSL strings; omitted pairs are zero.
    """

    def __init__(self, coords: Sequence[str], components: Mapping[tuple[int, int], object]):
        self.coords = tuple(coords)
        d = len(self.coords)
        if len(set(self.coords)) != d:
            raise ValueError("coordinate names must be distinct")
        self.dims = d
        comp: dict[tuple[int, int], ex.Expr] = {}
        for (i, j), e in components.items():
            if not (0 <= i < d and 0 <= j < d):
                raise ValueError(f"component index {(i, j)} out of range")
            key = (min(i, j), max(i, j))
            if key in comp:
                raise ValueError(f"component {key} given twice")
            node = _as_expr(e, self.coords)
            stray = node.free - set(self.coords)
            if stray:
                raise ValueError(f"component {key} uses undeclared coordinates {sorted(stray)}")
            comp[key] = node
        self._upper = {
            (i, j): comp.get((i, j), ex.ZERO) for i in range(d) for j in range(i, d)
        }
        self._deriv: dict[tuple[int, int, tuple[int, ...]], ex.Expr] = {}

    def __repr__(self) -> str:
        nz = {k: str(v) for k, v in self._upper.items() if not v.is_zero}
        return f"MetricField(coords={self.coords!r}, components={nz!r})"

    def component(self, i: int, j: int) -> ex.Expr:
        return self._upper[(min(i, j), max(i, j))]

    def matrix(self) -> list[list[ex.Expr]]:
        return [[self.component(i, j) for j in range(self.dims)] for i in range(self.dims)]

    def bindings(self, point: Sequence[float]) -> dict[str, float]:
        if len(point) != self.dims:
            raise ValueError(f"point has {len(point)} coordinates, metric has {self.dims}")
        return dict(zip(self.coords, (float(x) for x in point)))

    def values(self, point: Sequence[float], evaluator: ex.Evaluator | None = None) -> np.ndarray:
        ev = evaluator or ex.Evaluator(self.bindings(point))
        d = self.dims
        out = np.empty((d, d))
        for (i, j), e in self._upper.items():
            out[i, j] = out[j, i] = ev(e)
        return out

    def derivative_expr(self, i: int, j: int, alpha: tuple[int, ...]) -> ex.Expr:
        """Symbolic partial derivative d^alpha g_ij, cached per metric."""
        i, j = min(i, j), max(i, j)
        key = (i, j, alpha)
        hit = self._deriv.get(key)
        if hit is not None:
            return hit
        if not any(alpha):
            out = self._upper[(i, j)]
        else:
            k = next(n for n, a in enumerate(alpha) if a)
            prev = list(alpha)
            prev[k] -= 1
            base = self.derivative_expr(i, j, tuple(prev))
            out = ex.differentiate(base, self.coords[k])
        self._deriv[key] = out
        return out

    def jet(self, point: Sequence[float], order: int) -> Jet:
        """Exact Taylor jet of the component matrix at `point`."""
        d = self.dims
        ev = ex.Evaluator(self.bindings(point))
        sp = jets.space(d, order)
        coef = np.zeros((d, d, sp.size))
        from math import factorial

        for k, alpha in enumerate(sp.monos):
            fact = 1
            for a in alpha:
                fact *= factorial(a)
            for i in range(d):
                for j in range(i, d):
                    e = self.derivative_expr(i, j, alpha)
                    if e.is_zero:
                        continue
                    v = ev(e) / fact
                    coef[i, j, k] = v
                    coef[j, i, k] = v
        g0 = coef[..., 0]
        if not np.all(np.isfinite(g0)):
            raise SingularMetricError(f"non-finite metric components at {tuple(point)}")
        cond = np.linalg.cond(g0)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularMetricError(
                f"metric is singular at {tuple(point)} (condition number {cond:.3g})"
            )
        return Jet(sp, coef)

    def condition_number(self, point: Sequence[float]) -> float:
        return float(np.linalg.cond(self.values(point)))

    def scaled(self, factor) -> "MetricField":
        """The metric factor * g with factor an expression or number."""
        f = _as_expr(factor, self.coords)
        return MetricField(self.coords, {k: ex.mul(f, v) for k, v in self._upper.items()})

    def substituted(self, repl: Mapping[str, object], coords: Sequence[str] | None = None,
                    keep: Sequence[int] | None = None) -> "MetricField":
        """Substitute coordinates in every component, optionally keeping a sub-block."""
        repl = {k: _as_expr(v, self.coords) for k, v in repl.items()}
        idx = list(range(self.dims)) if keep is None else list(keep)
        new_coords = coords if coords is not None else [self.coords[i] for i in idx]
        comps = {}
        for a, i in enumerate(idx):
            for b in range(a, len(idx)):
                j = idx[b]
                comps[(a, b)] = ex.substitute(self.component(i, j), repl)
        return MetricField(new_coords, comps)


# ----------------------------------------------------------------- pipeline


def _cov_down(T: Jet, gamma: Jet) -> Jet:
    """nabla_a T_{b1..br} for an all-lower tensor jet; new slot leads."""
    r = len(T.shape)
    dT = T.grad()
    out = dT
    # everything lives at the order of dT; truncate once so the multiplication
    # matrix of gamma is built a single time
    gamma = gamma.truncate(dT.order)
    T = T.truncate(dT.order)
    letters = "bcdefghijklm"[:r]
    for s in range(r):
        src = letters[:s] + "z" + letters[s + 1 :]
        spec = f"za{letters[s]},{src}->a{letters}"
        out = out - jets.einsum(spec, gamma, T)
    return out


class CurvaturePipeline:
    """Curvature jets of a metric jet, built lazily and truncated as needed."""

    def __init__(self, gjet: Jet, lowering_sign: int = 1):
        self.d = gjet.shape[0]
        if self.d < 3:
            raise ValueError("curvature stack needs d >= 3")
        self.g = gjet
        self.sign = lowering_sign
        self._cache: dict = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def ginv(self) -> Jet:
        return self._get("ginv", lambda: jets.mat_inverse(self.g))

    @property
    def gamma(self) -> Jet:
        def build():
            dg = self.g.grad().coef  # [k, i, j] = d_k g_ij
            first = 0.5 * (
                np.einsum("abdp->dabp", dg) + np.einsum("badp->dabp", dg) - dg
            )
            lower = Jet(jets.space(self.d, self.g.order - 1), first)
            return jets.einsum("cd,dab->cab", self.ginv, lower)

        return self._get("gamma", build)

    @property
    def riemann_mixed(self) -> Jet:
        def build():
            G = self.gamma
            dG = G.grad().coef  # [a, c, b, d] = d_a Gamma^c_bd
            t1 = np.einsum("acbdp->abcdp", dG)
            t2 = np.einsum("bcadp->abcdp", dG)
            GG = jets.einsum("cae,ebd->abcd", G, G)
            sp = jets.space(self.d, G.order - 1)
            n = sp.size
            gg = GG.coef[..., :n]
            coef = t1 - t2 + gg - np.swapaxes(gg, 0, 1)
            return Jet(sp, coef)

        return self._get("Rm", build)

    @property
    def riemann(self) -> Jet:
        return self._get(
            "R",
            lambda: jets.einsum("ce,abed->abcd", self.g, self.riemann_mixed).scale(self.sign),
        )

    @property
    def ricci(self) -> Jet:
        return self._get("Ric", lambda: Jet(self.riemann_mixed.sp, np.einsum("cacbp->abp", self.riemann_mixed.coef)))

    @property
    def scalar(self) -> Jet:
        return self._get("Sc", lambda: jets.einsum("ab,ab->", self.ginv, self.ricci))

    @property
    def schouten(self) -> Jet:
        def build():
            d = self.d
            ric, sc = self.ricci, self.scalar
            g = self.g.truncate(ric.order)
            sg = jets.einsum(",ab->ab", sc, g)
            return (ric - sg.scale(1.0 / (2 * (d - 1)))).scale(1.0 / (d - 2))

        return self._get("P", build)

    @property
    def J(self) -> Jet:
        return self._get("J", lambda: jets.einsum("ab,ab->", self.ginv, self.schouten))

    @property
    def weyl(self) -> Jet:
        def build():
            P = self.schouten
            g = self.g
            gP = jets.einsum("ac,bd->abcd", g, P)  # g_ac P_bd
            c = gP.coef
            corr = (
                c
                - np.einsum("abdcp->abcdp", c)  # g_ad P_bc
                - np.einsum("bacdp->abcdp", c)  # g_bc P_ad
                + np.einsum("badcp->abcdp", c)  # g_bd P_ac
            )
            R = self.riemann.truncate(gP.order)
            return Jet(gP.sp, R.coef - corr)

        return self._get("W", build)

    def nabla(self, T: Jet) -> Jet:
        return _cov_down(T, self.gamma)

    @property
    def nabla_schouten(self) -> Jet:
        return self._get("dP", lambda: self.nabla(self.schouten))

    @property
    def cotton(self) -> Jet:
        def build():
            dP = self.nabla_schouten.coef  # [a, b, c]
            return Jet(self.nabla_schouten.sp, dP - np.swapaxes(dP, 0, 1))

        return self._get("C", build)

    @property
    def bach(self) -> Jet:
        def build():
            ddP = self.nabla(self.nabla_schouten)  # [e, c, a, b] = nabla_e nabla_c P_ab
            ginv = self.ginv
            lap = jets.einsum("ec,ecab->ab", ginv, ddP)
            # nabla^c nabla_a P_bc = g^ce nabla_e nabla_a P_bc
            mixed = jets.einsum("ce,eabc->ab", ginv, ddP)
            Pup = jets.einsum("ca,ab->cb", ginv, jets.einsum("ab,bd->ad", self.schouten, ginv))
            PW = jets.einsum("cd,acbd->ab", Pup, self.weyl)
            return lap - mixed + PW

        return self._get("B", build)

    def riemann_derivatives(self, m: int) -> list[Jet]:
        """[R, nabla R, ..., nabla^m R], all-lower, derivative slots leading."""
        out = [self.riemann]
        for _ in range(m):
            out.append(self.nabla(out[-1]))
        return out


# ------------------------------------------------------------------- stack


@dataclass(frozen=True)
class CurvatureStack:
    point: tuple[float, ...]
    g: TensorValue
    g_inv: TensorValue
    christoffel: TensorValue
    riemann_mixed: TensorValue
    riemann: TensorValue
    ricci: TensorValue
    scalar: float
    schouten: TensorValue
    J: float
    weyl: TensorValue
    cotton: TensorValue | None
    bach: TensorValue | None

    def member(self, name: str):
        return getattr(self, name)


STACK_MEMBERS = (
    "christoffel",
    "riemann_mixed",
    "riemann",
    "ricci",
    "scalar",
    "schouten",
    "J",
    "weyl",
    "cotton",
    "bach",
)


def _lowering_sign() -> int:
    from .conventions import riemann_lowering_sign

    return riemann_lowering_sign()


def _stack_from_pipeline(pipe: CurvaturePipeline, point, with_cotton: bool, with_bach: bool) -> CurvatureStack:
    d = pipe.d

    def tv(jet, valence):
        return TensorValue(d, valence, jet.value)

    return CurvatureStack(
        point=tuple(float(x) for x in point),
        g=tv(pipe.g, (DOWN, DOWN)),
        g_inv=tv(pipe.ginv, (UP, UP)),
        christoffel=tv(pipe.gamma, (UP, DOWN, DOWN)),
        riemann_mixed=tv(pipe.riemann_mixed, (DOWN, DOWN, UP, DOWN)),
        riemann=tv(pipe.riemann, (DOWN,) * 4),
        ricci=tv(pipe.ricci, (DOWN, DOWN)),
        scalar=float(pipe.scalar.value),
        schouten=tv(pipe.schouten, (DOWN, DOWN)),
        J=float(pipe.J.value),
        weyl=tv(pipe.weyl, (DOWN,) * 4),
        cotton=tv(pipe.cotton, (DOWN,) * 3) if with_cotton else None,
        bach=tv(pipe.bach, (DOWN, DOWN)) if with_bach else None,
    )


def curvature_stack(g: MetricField, p: Sequence[float], bach: bool | None = None,
                    force_bach: bool = False) -> CurvatureStack:
    """Every curvature tensor of `g` at `p`.

    Bach is computed by default only for d >= 4; asking for it in d = 3
    raises unless `force_bach` is set.
    """
    d = g.dims
    if d < 3:
        raise ValueError("curvature stack needs d >= 3")
    if bach is None:
        bach = d >= 4
    if bach and d == 3 and not force_bach:
        raise ValueError("Bach tensor requested in d = 3; pass force_bach=True to override")
    order = 4 if bach else 3
    pipe = CurvaturePipeline(g.jet(p, order), _lowering_sign())
    return _stack_from_pipeline(pipe, p, True, bach)


def pipeline(g: MetricField, p: Sequence[float], order: int) -> CurvaturePipeline:
    return CurvaturePipeline(g.jet(p, order), _lowering_sign())


def riemann_derivatives(g: MetricField, p: Sequence[float], m: int) -> list[np.ndarray]:
    """Point values of R, nabla R, ..., nabla^m R (all lower indices)."""
    pipe = pipeline(g, p, m + 2)
    return [j.truncate(0).value for j in pipe.riemann_derivatives(m)]


# --------------------------------------------------- symbolic tensor fields


def _det(mat, rows, cols, memo):
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        out = mat[rows[0]][cols[0]]
    else:
        r0, rest = rows[0], rows[1:]
        out = ex.ZERO
        for k, c in enumerate(cols):
            entry = mat[r0][c]
            if entry.is_zero:
                continue
            minor = _det(mat, rest, cols[:k] + cols[k + 1 :], memo)
            term = ex.mul(entry, minor)
            out = ex.add(out, term) if k % 2 == 0 else ex.sub(out, term)
    memo[key] = out
    return out


def symbolic_inverse(mat: list[list[ex.Expr]]) -> list[list[ex.Expr]]:
    """Inverse of a symbolic matrix via the adjugate."""
    n = len(mat)
    offdiag_zero = all(mat[i][j].is_zero for i in range(n) for j in range(n) if i != j)
    if offdiag_zero:
        return [[ex.div(ex.ONE, mat[i][i]) if i == j else ex.ZERO for j in range(n)] for i in range(n)]
    memo: dict = {}
    rows = tuple(range(n))
    det = _det(mat, rows, rows, memo)
    inv = [[ex.ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            # (A^-1)_ij = cofactor_ji / det
            r = tuple(k for k in rows if k != j)
            c = tuple(k for k in rows if k != i)
            minor = _det(mat, r, c, memo) if n > 1 else ex.ONE
            cof = minor if (i + j) % 2 == 0 else ex.neg(minor)
            inv[i][j] = ex.div(cof, det)
    return inv


@dataclass(frozen=True)
class SymbolicTensor:
    """Tensor field whose components are expressions (object ndarray)."""

    coords: tuple[str, ...]
    valence: tuple[str, ...]
    components: np.ndarray

    @property
    def dims(self) -> int:
        return len(self.coords)

    def at(self, point: Sequence[float]) -> TensorValue:
        ev = ex.Evaluator(dict(zip(self.coords, (float(x) for x in point))))
        vals = np.vectorize(lambda e: float(ev(e)), otypes=[float])(self.components)
        return TensorValue(self.dims, self.valence, vals)

    @classmethod
    def scalar(cls, coords, e) -> "SymbolicTensor":
        arr = np.empty((), dtype=object)
        arr[()] = _as_expr(e, coords)
        return cls(tuple(coords), (), arr)


def christoffel_symbols(g: MetricField) -> np.ndarray:
    """Symbolic Gamma^c_ab as an object array indexed [c, a, b]."""
    d = g.dims
    ginv = symbolic_inverse(g.matrix())
    dg = [[[ex.differentiate(g.component(i, j), g.coords[k]) for j in range(d)] for i in range(d)] for k in range(d)]
    out = np.empty((d, d, d), dtype=object)
    for c, a, b in product(range(d), repeat=3):
        acc = ex.ZERO
        for e in range(d):
            if ginv[c][e].is_zero:
                continue
            bracket = ex.sub(ex.add(dg[a][b][e], dg[b][a][e]), dg[e][a][b])
            if bracket.is_zero:
                continue
            acc = ex.add(acc, ex.mul(ginv[c][e], bracket))
        out[c, a, b] = ex.mul(ex.const(Fraction(1, 2)), acc)
    return out


def covariant_derivative(g: MetricField, T: SymbolicTensor, m: int = 1) -> SymbolicTensor:
    """m-fold nabla T as a symbolic field; each step prepends a lower slot."""
    if m < 1:
        raise ValueError("order m must be >= 1")
    if T.coords != g.coords:
        raise ValueError("tensor and metric use different coordinates")
    gamma = christoffel_symbols(g)
    d = g.dims
    cur = T
    for _ in range(m):
        r = len(cur.valence)
        comps = cur.components
        out = np.empty((d,) + (d,) * r, dtype=object)
        for a in range(d):
            for idx in product(range(d), repeat=r):
                acc = ex.differentiate(comps[idx], g.coords[a])
                for s, kind in enumerate(cur.valence):
                    for e in range(d):
                        swapped = idx[:s] + (e,) + idx[s + 1 :]
                        if kind == UP:
                            coeff = gamma[idx[s], a, e]
                        else:
                            coeff = gamma[e, a, idx[s]]
                        if coeff.is_zero or comps[swapped].is_zero:
                            continue
                        term = ex.mul(coeff, comps[swapped])
                        acc = ex.add(acc, term) if kind == UP else ex.sub(acc, term)
                out[(a,) + idx] = acc
        cur = SymbolicTensor(cur.coords, (DOWN,) + cur.valence, out)
    return cur


# ----------------------------------------------------------- fd oracle


def _fd_weights(deriv: int, offsets: Sequence[int]) -> list[Fraction]:
    """Exact finite-difference weights on integer offsets (unit step)."""
    n = len(offsets)
    # rows k: sum_j w_j x_j^k = k! delta_{k, deriv}
    A = [[Fraction(x) ** k for x in offsets] for k in range(n)]
    rhs = [Fraction(0)] * n
    from math import factorial

    rhs[deriv] = Fraction(factorial(deriv))
    # Gaussian elimination over the rationals
    M = [row[:] + [rhs[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _central_stencil(deriv: int, accuracy: int = 6):
    half = (deriv + 1) // 2 - 1 + accuracy // 2
    offsets = list(range(-half, half + 1))
    w = _fd_weights(deriv, offsets)
    return [(o, float(c)) for o, c in zip(offsets, w) if c != 0]


def fd_metric_jet(g: MetricField, p: Sequence[float], order: int, h: float) -> Jet:
    """Metric jet whose derivatives come from central finite differences."""
    d = g.dims
    sp = jets.space(d, order)
    p = np.asarray(p, dtype=float)
    g0 = g.values(p)
    coef = np.zeros((d, d, sp.size))
    coef[..., 0] = g0
    from math import factorial

    for k, alpha in enumerate(sp.monos):
        deg = sum(alpha)
        if deg == 0:
            continue
        step = h if deg <= 2 else h ** (2.0 / deg)
        stencils = [(_central_stencil(a) if a else [(0, 1.0)]) for a in alpha]
        pts, wts = [], []
        for combo in product(*stencils):
            off = np.array([o for o, _ in combo], dtype=float)
            w = 1.0
            for _, c in combo:
                w *= c
            pts.append(p + step * off)
            wts.append(w)
        pts = np.array(pts)
        wts = np.array(wts)
        ev = ex.Evaluator({name: pts[:, i] for i, name in enumerate(g.coords)})
        fact = 1
        for a in alpha:
            fact *= factorial(a)
        for i in range(d):
            for j in range(i, d):
                vals = np.broadcast_to(ev(g.component(i, j)), (len(pts),))
                # subtracting the centre value makes constant components exact
                der = float(np.dot(wts, vals - g0[i, j])) / step**deg
                coef[i, j, k] = coef[j, i, k] = der / fact
    return Jet(sp, coef)


def fd_check(g: MetricField, quantity: str, p: Sequence[float], h: float = 1e-3) -> float:
    """Max relative deviation between the exact and a finite-difference stack.

    `quantity` is a :data:`STACK_MEMBERS` name or ``"all"``. Deviation is
    max |fd - exact| / max(1, max |exact|), taken over entries.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    names = STACK_MEMBERS if quantity == "all" else (quantity,)
    for n in names:
        if n not in STACK_MEMBERS:
            raise ValueError(f"unknown stack member {n!r}")
    need_bach = "bach" in names and g.dims >= 4
    order = 4 if need_bach else 3
    sign = _lowering_sign()
    exact = _stack_from_pipeline(CurvaturePipeline(g.jet(p, order), sign), p, True, need_bach)
    approx = _stack_from_pipeline(CurvaturePipeline(fd_metric_jet(g, p, order, h), sign), p, True, need_bach)
    worst = 0.0
    for n in names:
        a, b = exact.member(n), approx.member(n)
        if a is None:
            continue
        ea = np.asarray(a if not isinstance(a, TensorValue) else a.entries, dtype=float)
        eb = np.asarray(b if not isinstance(b, TensorValue) else b.entries, dtype=float)
        diff = float(np.max(np.abs(ea - eb), initial=0.0))
        if diff == 0.0:
            continue
        scale = max(1.0, float(np.max(np.abs(ea), initial=0.0)))
        worst = max(worst, diff / scale)
    return worst
