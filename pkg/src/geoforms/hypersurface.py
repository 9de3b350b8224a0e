"""Hypersurfaces Sigma = {t = 0} and their Riemannian fundamental forms.

Two chart shapes are accepted. A :class:`NormalFormMetric` is
dt^2 + gbar(t, x) with the unit conormal dt. A :class:`GeneralizedChart`
allows g_tt = N(t, x)^2 (still with g_ti = 0); this covers base-like warped
products f(x)^2 dt^2 + gbar(x) and conformal rescalings of normal-form
metrics. In both cases the unit normal at a point is
n^a = g^{at} / sqrt(g^{tt}) and tangential projection is restriction to the
x slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from . import jets
from .geometry import CurvaturePipeline, MetricField, _lowering_sign
from .tensor import DOWN, TensorValue

K_MAX = 7

__all__ = [
    "K_MAX",
    "NormalFormMetric",
    "GeneralizedChart",
    "FundamentalFormSet",
    "base_like_normal_form",
    "induced_metric",
    "second_ff",
    "mean_curvature",
    "fundamental_form",
    "fundamental_forms",
    "third_ff_direct",
    "lie_pullback",
    "o1f_fifth_form",
    "perturb_transverse",
    "transverse_order_probe",
]


class ChartError(ValueError):
    pass


class _Chart:
    """Shared plumbing: full metric, transverse coordinate first."""

    metric: MetricField
    normal_form: bool
    fiber_warp: ex.Expr | None = None
    base_warp: ex.Expr | None = None

    @property
    def dims(self) -> int:
        return self.metric.dims

    @property
    def coords(self) -> tuple[str, ...]:
        return self.metric.coords

    @property
    def transverse(self) -> str:
        return self.coords[0]

    @property
    def sigma_coords(self) -> tuple[str, ...]:
        return self.coords[1:]

    def gbar(self, i: int, j: int) -> ex.Expr:
        return self.metric.component(i + 1, j + 1)

    def sigma_metric(self) -> MetricField:
        """The induced metric gbar(0, x) as a metric on Sigma."""
        n = self.dims - 1
        comps = {
            (i, j): ex.substitute(self.gbar(i, j), {self.transverse: ex.ZERO})
            for i in range(n)
            for j in range(i, n)
        }
        return MetricField(self.sigma_coords, comps)

    def ambient_point(self, x: Sequence[float], t: float = 0.0) -> tuple[float, ...]:
        if len(x) != self.dims - 1:
            raise ChartError(f"Sigma point needs {self.dims - 1} coordinates, got {len(x)}")
        return (float(t),) + tuple(float(v) for v in x)


class NormalFormMetric(_Chart):
    """g = dt^2 + gbar_ij(t, x) dx^i dx^j.

    `gbar` maps index pairs over the hypersurface coordinates (0-based, so
    (0, 0) is the first x coordinate) to expressions; omitted pairs are 0.
    """

    normal_form = True

    def __init__(self, coords: Sequence[str], gbar: Mapping[tuple[int, int], object],
                 fiber_warp=None, base_warp=None):
        coords = tuple(coords)
        if len(coords) < 3:
            raise ChartError("need d >= 3 coordinates (transverse first)")
        comps = {(0, 0): ex.ONE}
        for (i, j), e in gbar.items():
            comps[(i + 1, j + 1)] = e
        self.metric = MetricField(coords, comps)
        self.fiber_warp = _opt_expr(fiber_warp, coords)
        self.base_warp = _opt_expr(base_warp, coords)

    def __repr__(self) -> str:
        return f"NormalFormMetric({self.metric!r})"


class GeneralizedChart(_Chart):
    """Metric with g_ti = 0 but g_tt not identically 1."""

    normal_form = False

    def __init__(self, metric: MetricField, base_warp=None, fiber_warp=None, origin: str = "generic"):
        d = metric.dims
        for i in range(1, d):
            if not metric.component(0, i).is_zero:
                raise ChartError("generalized chart requires g_ti = 0")
        self.metric = metric
        self.base_warp = _opt_expr(base_warp, metric.coords)
        self.fiber_warp = _opt_expr(fiber_warp, metric.coords)
        self.origin = origin

    def __repr__(self) -> str:
        return f"GeneralizedChart({self.origin}, {self.metric!r})"


def _opt_expr(e, coords):
    if e is None:
        return None
    return e if isinstance(e, ex.Expr) else ex.parse(str(e), coords)


def base_like_normal_form(coords: Sequence[str], f, gbar0: Mapping[tuple[int, int], object]) -> GeneralizedChart:
    """The chart for f(x)^2 dt^2 + gbar0(x); f must not depend on t.

    Positivity of f is checked wherever forms are evaluated.
    """
    coords = tuple(coords)
    fe = _opt_expr(f, coords)
    if coords[0] in fe.free:
        raise ChartError("base warp f must not depend on the transverse coordinate")
    comps = {(0, 0): ex.power(fe, 2)}
    for (i, j), e in gbar0.items():
        node = _opt_expr(e, coords)
        if coords[0] in node.free:
            raise ChartError("base-like gbar must not depend on the transverse coordinate")
        comps[(i + 1, j + 1)] = node
    return GeneralizedChart(MetricField(coords, comps), base_warp=fe, origin="base-like")


def _check_base_warp(m: _Chart, x: Sequence[float]):
    if m.base_warp is None:
        return
    val = ex.evaluate(m.base_warp, dict(zip(m.coords, m.ambient_point(x))))
    if not val > 0:
        raise ChartError(f"base warp f = {val:.6g} <= 0 at {tuple(x)}")


# --------------------------------------------------------------- basic forms


def induced_metric(m: _Chart, x: Sequence[float]) -> TensorValue:
    g = m.metric.values(m.ambient_point(x))
    return TensorValue(m.dims - 1, (DOWN, DOWN), g[1:, 1:])


def _normal(pipe: CurvaturePipeline):
    ginv = pipe.ginv.value
    gtt = ginv[0, 0]
    if not gtt > 0:
        raise ChartError("t is not a spacelike defining function here")
    n_up = ginv[:, 0] / np.sqrt(gtt)
    n_dn = np.zeros(pipe.d)
    n_dn[0] = 1.0 / np.sqrt(gtt)
    return n_up, n_dn


def _second_from_pipe(pipe: CurvaturePipeline) -> np.ndarray:
    _, n_dn = _normal(pipe)
    # II_ab = nabla_a n_b restricted = -Gamma^c_ab n_c (n_c = N dt)
    G = pipe.gamma.value
    return -np.einsum("cab,c->ab", G, n_dn)[1:, 1:]


def second_ff(m: _Chart, x: Sequence[float]) -> TensorValue:
    """II = 1/2 L_n g on Sigma; in normal form this is 1/2 d_t gbar(0, x)."""
    _check_base_warp(m, x)
    pipe = CurvaturePipeline(m.metric.jet(m.ambient_point(x), 1), _lowering_sign())
    return TensorValue(m.dims - 1, (DOWN, DOWN), _sym(_second_from_pipe(pipe)))


def mean_curvature(m: _Chart, x: Sequence[float]) -> float:
    II = second_ff(m, x).entries
    gbar_inv = np.linalg.inv(induced_metric(m, x).entries)
    return float(np.einsum("ab,ab->", gbar_inv, II)) / (m.dims - 1)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _ff_from_pipe(pipe: CurvaturePipeline, k: int, sign: int) -> np.ndarray:
    if k == 2:
        return _second_from_pipe(pipe)
    n_up, _ = _normal(pipe)
    T = pipe.riemann
    for _ in range(k - 3):
        T = pipe.nabla(T)
    val = T.truncate(0).value if T.order > 0 else T.value
    # slots: derivative slots..., c, a, b, d
    for _ in range(k - 3):
        val = np.tensordot(n_up, val, axes=([0], [0]))
    val = np.einsum("c,cabd,d->ab", n_up, val, n_up)
    return sign * val[1:, 1:]


def _raw_fundamental_form(m: _Chart, k: int, x: Sequence[float]) -> np.ndarray:
    pipe = CurvaturePipeline(m.metric.jet(m.ambient_point(x), max(k - 1, 1)), _lowering_sign())
    return _ff_from_pipe(pipe, k, 1)


def _ff_sign() -> int:
    from .conventions import ff_sign

    return ff_sign()


def fundamental_form(m: _Chart, k: int, x: Sequence[float], k_max: int = K_MAX) -> TensorValue:
    """FF^(k) at a Sigma point by the definition route (n contracted into nabla^{k-3} R)."""
    if k < 2:
        raise ValueError("fundamental forms start at order 2")
    if k > k_max:
        raise ValueError(f"order {k} exceeds K_max = {k_max}")
    _check_base_warp(m, x)
    if k == 2:
        return second_ff(m, x)
    pipe = CurvaturePipeline(m.metric.jet(m.ambient_point(x), k - 1), _lowering_sign())
    return TensorValue(m.dims - 1, (DOWN, DOWN), _ff_from_pipe(pipe, k, _ff_sign()))


@dataclass
class FundamentalFormSet:
    """FF^(k) for k = 2..K at each sample point, with provenance per order."""

    orders: tuple[int, ...]
    points: list[tuple[float, ...]]
    forms: dict[int, list[np.ndarray]] = field(default_factory=dict)
    provenance: dict[int, str] = field(default_factory=dict)

    def max_abs(self, k: int) -> float:
        return max((float(np.max(np.abs(a))) for a in self.forms[k]), default=0.0)

    def at(self, k: int, i: int) -> TensorValue:
        a = self.forms[k][i]
        return TensorValue(a.shape[0], (DOWN, DOWN), a)


def _forms_at_point(m: _Chart, K: int, x) -> dict[int, np.ndarray]:
    _check_base_warp(m, x)
    pipe = CurvaturePipeline(m.metric.jet(m.ambient_point(x), max(K - 1, 1)), _lowering_sign())
    sign = _ff_sign()
    out = {2: _sym(_second_from_pipe(pipe))}
    if K >= 3:
        n_up, _ = _normal(pipe)
        T = pipe.riemann
        for k in range(3, K + 1):
            if k > 3:
                T = pipe.nabla(T)
            val = T.value
            for _ in range(k - 3):
                val = np.tensordot(n_up, val, axes=([0], [0]))
            out[k] = sign * np.einsum("c,cabd,d->ab", n_up, val, n_up)[1:, 1:]
    return out


def fundamental_forms(m: _Chart, K: int, points: Iterable[Sequence[float]], k_max: int = K_MAX,
                      workers: int | None = None) -> FundamentalFormSet:
    """All forms of order 2..K at each point, sharing one jet per point."""
    if K > k_max:
        raise ValueError(f"order {K} exceeds K_max = {k_max}")
    if K < 2:
        raise ValueError("K must be >= 2")
    pts = [tuple(float(v) for v in p) for p in points]
    from .parallel import pmap

    results = pmap(lambda x: _forms_at_point(m, K, x), pts, workers)
    fs = FundamentalFormSet(tuple(range(2, K + 1)), pts)
    for k in fs.orders:
        fs.forms[k] = [r[k] for r in results]
        fs.provenance[k] = "definition"
    return fs


def third_ff_direct(m: _Chart, x: Sequence[float]) -> TensorValue:
    """III_ab = g(R(n, e_a) n, e_b) from the mixed Riemann tensor.

    Independent of the lowering convention, so it cross-checks the rank-4
    route of :func:`fundamental_form`.
    """
    pipe = CurvaturePipeline(m.metric.jet(m.ambient_point(x), 2), _lowering_sign())
    n_up, _ = _normal(pipe)
    Rm = pipe.riemann_mixed.value  # [c, a, e, d] = R_ca^e_d
    g = pipe.g.value
    val = np.einsum("c,caed,d,eb->ab", n_up, Rm, n_up, g)
    return TensorValue(m.dims - 1, (DOWN, DOWN), val[1:, 1:])


def lie_pullback(m: _Chart, j: int, x: Sequence[float]) -> TensorValue:
    """iota^* L_n^j g = d_t^j gbar at t = 0 (normal form only)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if not m.normal_form:
        raise ChartError(
            "lie_pullback needs strict normal form; the conormal of a generalized chart is not "
            "geodesic off Sigma, so use fundamental_form instead"
        )
    n = m.dims - 1
    ev = ex.Evaluator(dict(zip(m.coords, m.ambient_point(x))))
    alpha = (j,) + (0,) * n
    out = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            out[a, b] = out[b, a] = ev(m.metric.derivative_expr(a + 1, b + 1, alpha))
    return TensorValue(n, (DOWN, DOWN), out)


# --------------------------------------------------------- base-like extras


def _third_form_jet(pipe: CurvaturePipeline) -> jets.Jet:
    """III_ab as a jet in all coordinates: g^{ct} g^{dt} R_cabd / g^tt."""
    gi = pipe.ginv
    col = jets.Jet(gi.sp, gi.coef[:, 0, :])
    nn = jets.einsum("c,d->cd", col, col)
    raw = jets.einsum("cd,cabd->ab", nn, pipe.riemann)
    gtt = jets.Jet(gi.sp, gi.coef[0, 0, :])
    inv = jets.reciprocal(gtt)
    return jets.einsum(",ab->ab", inv, raw).scale(_ff_sign())


def o1f_fifth_form(m: _Chart, x: Sequence[float]) -> TensorValue:
    """V_ab = f^-1 (grad^c f)(-3 nabla_c III_ab + 2 nabla_(a III_b)c) on Sigma.

    The closed formula for the fifth form of a base-like embedding. nabla is
    the Levi-Civita connection of gbar(0, x); III is obtained along Sigma from
    jets of the ambient curvature.
    """
    if m.base_warp is None:
        raise ChartError("O1 formula needs a declared base warp f")
    _check_base_warp(m, x)
    p = m.ambient_point(x)
    pipe = CurvaturePipeline(m.metric.jet(p, 3), _lowering_sign())
    III = _third_form_jet(pipe)  # order 1
    n = m.dims - 1
    xs = range(1, n + 1)
    III_val = III.value[1:, 1:]
    dIII = np.stack([III.d(i).value[1:, 1:] for i in xs])  # [c, a, b]
    # intrinsic Christoffels of gbar(0, x) from the x-block of the metric jet
    g = pipe.g
    gb = g.value[1:, 1:]
    dgb = np.stack([g.d(i).value[1:, 1:] for i in xs])  # [k, i, j]
    gbi = np.linalg.inv(gb)
    first = 0.5 * (np.einsum("abd->dab", dgb) + np.einsum("bad->dab", dgb) - dgb)
    Gb = np.einsum("cd,dab->cab", gbi, first)
    nabla = dIII - np.einsum("eca,eb->cab", Gb, III_val) - np.einsum("ecb,ae->cab", Gb, III_val)
    ev = ex.Evaluator(dict(zip(m.coords, p)))
    f = ev(m.base_warp)
    df = np.array([ev(ex.differentiate(m.base_warp, m.coords[i])) for i in xs])
    grad_f = gbi @ df
    term1 = -3.0 * np.einsum("c,cab->ab", grad_f, nabla)
    # nabla_a III_bc: nabla[a, b, c]
    t2 = np.einsum("c,abc->ab", grad_f, nabla)
    term2 = t2 + t2.T  # 2 * symmetrization
    return TensorValue(n, (DOWN, DOWN), (term1 + term2) / f)


# ------------------------------------------------------------- probes


def perturb_transverse(m: NormalFormMetric, k: int, eps: float, bump) -> NormalFormMetric:
    """gbar + eps * t^k * bump(x) * delta, keeping the normal form."""
    if not m.normal_form:
        raise ChartError("perturbation probe needs a normal-form metric")
    coords = m.coords
    b = _opt_expr(bump, coords)
    t = ex.var(m.transverse)
    pert = ex.mul(ex.mul(ex.const(eps), ex.power(t, k)), b)
    n = m.dims - 1
    comps = {}
    for i in range(n):
        for j in range(i, n):
            e = m.gbar(i, j)
            comps[(i, j)] = ex.add(e, pert) if i == j else e
    return NormalFormMetric(coords, comps)


def transverse_order_probe(m: NormalFormMetric, k: int, points, eps: float = 1e-6,
                           bump="exp(-(x^2))", K: int | None = None) -> dict[int, float]:
    """Max change of FF^(j), j = 2..K, after a t^k perturbation of gbar."""
    K = k + 1 if K is None else K
    if isinstance(bump, str) and "x" not in m.sigma_coords:
        bump = f"exp(-({m.sigma_coords[0]}^2))"
    other = perturb_transverse(m, k, eps, bump)
    a = fundamental_forms(m, K, points)
    b = fundamental_forms(other, K, points)
    return {
        j: max(float(np.max(np.abs(u - v))) for u, v in zip(a.forms[j], b.forms[j]))
        for j in range(2, K + 1)
    }
