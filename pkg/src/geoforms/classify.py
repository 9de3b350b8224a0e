"""Product / fiber-like / base-like decisions by reference-metric comparison.

A warped structure is accepted at order K when the fundamental forms of the
input agree, order by order, with those of a synthesized reference metric
carrying the declared warp. Residuals are entrywise maxima divided by the
scale max(1, |gbar|).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import product as cartesian
from typing import Sequence

import numpy as np

from . import expr as ex
from .geometry import MetricField
from .hypersurface import (
    K_MAX,
    ChartError,
    GeneralizedChart,
    NormalFormMetric,
    _Chart,
    fundamental_forms,
    o1f_fifth_form,
)

DEFAULT_TOL = 1e-8

__all__ = [
    "ClassificationReport",
    "check_product",
    "check_fiber_like",
    "check_base_like",
    "fiber_warp_hint",
    "sample_grid",
    "fiber_reference",
    "base_reference",
]


@dataclass
class ClassificationReport:
    verdict: str
    checked_order: int
    residuals: dict[int, float]
    points: list[tuple[float, ...]]
    tol: float
    failed_order: int | None = None
    failed_stage: str | None = None
    sub_verdict: str | None = None
    warp: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.verdict.startswith("rejected") and self.verdict != "inconclusive"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["residuals"] = {str(k): v for k, v in self.residuals.items()}
        out["points"] = [list(p) for p in self.points]
        return out


def sample_grid(ranges: Sequence[tuple[float, float]], counts: int | Sequence[int] = 3,
                margin: float = 0.1) -> list[tuple[float, ...]]:
    """Tensor grid strictly inside each range, `margin` away from both ends."""
    if isinstance(counts, int):
        counts = [counts] * len(ranges)
    axes = []
    for (lo, hi), n in zip(ranges, counts):
        a, b = lo + margin, hi - margin
        if not a < b:
            raise ValueError(f"margin {margin} leaves nothing of range [{lo}, {hi}]")
        axes.append([a] if n == 1 else list(np.linspace(a, b, n)))
    return [tuple(float(v) for v in p) for p in cartesian(*axes)]


def _scale(m: _Chart, points) -> float:
    s = 1.0
    for x in points:
        s = max(s, float(np.max(np.abs(m.metric.values(m.ambient_point(x))[1:, 1:]))))
    return s


def _order_residual(a, b) -> float:
    worst = 0.0
    for u, v in zip(a, b):
        worst = max(worst, float(np.max(np.abs(u - v))))
    return worst


def _verdict_from(residuals: dict[int, float], tol: float, ok: str):
    for k in sorted(residuals):
        r = residuals[k]
        if not np.isfinite(r):
            return "inconclusive", k
        if r > tol:
            return f"rejected-at-order-{k}", k
    return ok, None


def check_product(m: _Chart, K: int, points, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """All forms of order 2..K vanish at every point."""
    pts = [tuple(p) for p in points]
    fs = fundamental_forms(m, K, pts)
    scale = _scale(m, pts)
    res = {k: fs.max_abs(k) / scale for k in fs.orders}
    verdict, bad = _verdict_from(res, tol, "product")
    return ClassificationReport(verdict, K, res, pts, tol, failed_order=bad)


def fiber_reference(m: _Chart, h) -> NormalFormMetric:
    """dt^2 + (h(t)/h(0)) gbar(0, x), so the induced metric is unchanged."""
    he = h if isinstance(h, ex.Expr) else ex.parse(str(h), m.coords)
    stray = he.free - {m.transverse}
    if stray:
        raise ChartError(f"fiber warp may depend only on {m.transverse}, found {sorted(stray)}")
    h0 = ex.evaluate(he, {m.transverse: 0.0})
    if not h0 > 0:
        raise ChartError(f"h(0) = {h0:.6g} must be positive")
    ratio = ex.div(he, ex.const(h0)) if h0 != 1 else he
    base = m.sigma_metric()
    n = m.dims - 1
    comps = {(i, j): ex.mul(ratio, base.component(i, j)) for i in range(n) for j in range(i, n)}
    return NormalFormMetric(m.coords, comps, fiber_warp=he)


def fiber_warp_hint(m: _Chart, points, h0: float = 1.0) -> float:
    """Non-authoritative diagnostic: h'(0) = 2 tr FF2 / ((d-1) h(0)), averaged."""
    fs = fundamental_forms(m, 2, points)
    vals = []
    for x, II in zip(fs.points, fs.forms[2]):
        gi = np.linalg.inv(m.metric.values(m.ambient_point(x))[1:, 1:])
        vals.append(2.0 * float(np.einsum("ab,ab->", gi, II)) / ((m.dims - 1) * h0))
    return float(np.mean(vals)) if vals else float("nan")


def check_fiber_like(m: _Chart, h, K: int, points, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """Forms of order 2..K agree with those of the fiber-like reference."""
    pts = [tuple(p) for p in points]
    ref = fiber_reference(m, h)
    a = fundamental_forms(m, K, pts)
    b = fundamental_forms(ref, K, pts)
    scale = _scale(m, pts)
    res = {k: _order_residual(a.forms[k], b.forms[k]) / scale for k in a.orders}
    verdict, bad = _verdict_from(res, tol, "fiber-like")
    rep = ClassificationReport(verdict, K, res, pts, tol, failed_order=bad)
    he = ref.fiber_warp
    rep.warp = {
        "h": str(he),
        "h0": ex.evaluate(he, {m.transverse: 0.0}),
        "h_prime0": ex.evaluate(ex.differentiate(he, m.transverse), {m.transverse: 0.0}),
        "h_prime0_hint": fiber_warp_hint(m, pts[:1], 1.0) if pts else None,
    }
    if rep.passed and he.free == frozenset():
        rep.sub_verdict = "product"
    return rep


def base_reference(m: _Chart, f) -> GeneralizedChart:
    fe = f if isinstance(f, ex.Expr) else ex.parse(str(f), m.coords)
    if m.transverse in fe.free:
        raise ChartError("base warp f must not depend on the transverse coordinate")
    base = m.sigma_metric()
    comps = {(0, 0): ex.power(fe, 2)}
    n = m.dims - 1
    for i in range(n):
        for j in range(i, n):
            comps[(i + 1, j + 1)] = base.component(i, j)
    return GeneralizedChart(MetricField(m.coords, comps), base_warp=fe, origin="base-like reference")


def _hessian_f(m: _Chart, fe: ex.Expr, x) -> np.ndarray:
    """Hessian of f with respect to gbar(0, x)."""
    base = m.sigma_metric()
    ev = ex.Evaluator(dict(zip(m.coords, m.ambient_point(x))))
    xs = m.sigma_coords
    df = np.array([ev(ex.differentiate(fe, v)) for v in xs])
    ddf = np.array([[ev(ex.differentiate(ex.differentiate(fe, u), v)) for v in xs] for u in xs])
    jet = base.jet(x, 1)
    dg = jet.grad().value
    first = 0.5 * (np.einsum("abd->dab", dg) + np.einsum("bad->dab", dg) - dg)
    G = np.einsum("cd,dab->cab", np.linalg.inv(jet.value), first)
    return ddf - np.einsum("kij,k->ij", G, df)


def check_base_like(m: _Chart, f, K: int, points, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """Three stages: even forms vanish; Hess f = f III; odd orders match the reference."""
    pts = [tuple(p) for p in points]
    ref = base_reference(m, f)
    fe = ref.base_warp
    for x in pts:
        val = ex.evaluate(fe, dict(zip(m.coords, m.ambient_point(x))))
        if not val > 0:
            raise ChartError(f"base warp f = {val:.6g} <= 0 at {x}")
    scale = _scale(m, pts)
    fs = fundamental_forms(m, max(K, 3), pts)
    res: dict[int, float] = {}
    stages: dict = {}
    rep = ClassificationReport("base-like", K, res, pts, tol, warp={"f": str(fe)}, stages=stages)

    # (i) even orders vanish
    even = {k: fs.max_abs(k) / scale for k in fs.orders if k % 2 == 0 and k <= K}
    stages["even_vanishing"] = {str(k): v for k, v in even.items()}
    res.update(even)
    v, bad = _verdict_from(even, tol, "ok")
    if bad is not None:
        rep.verdict, rep.failed_order, rep.failed_stage = v, bad, "even_vanishing"
        return rep

    # (ii) Hess f = f III
    hess_res = 0.0
    for x, III in zip(pts, fs.forms[3]):
        fx = ex.evaluate(fe, dict(zip(m.coords, m.ambient_point(x))))
        hess_res = max(hess_res, float(np.max(np.abs(_hessian_f(m, fe, x) - fx * III))))
    hess_res /= scale
    stages["hessian_identity"] = hess_res
    res[3] = hess_res
    if not hess_res <= tol:
        rep.verdict, rep.failed_order, rep.failed_stage = "rejected-at-order-3", 3, "hessian_identity"
        return rep

    # (iii) odd orders 5..K against the reference
    odd_orders = [k for k in range(5, K + 1, 2)]
    if odd_orders:
        rf = fundamental_forms(ref, K, pts)
        odd = {k: _order_residual(fs.forms[k], rf.forms[k]) / scale for k in odd_orders}
        stages["odd_reference"] = {str(k): v for k, v in odd.items()}
        res.update(odd)
        v, bad = _verdict_from(odd, tol, "ok")
        if bad is not None:
            rep.verdict, rep.failed_order, rep.failed_stage = v, bad, "odd_reference"
            return rep
        # explicit first-order operator, reported but not used for the verdict
        direct = flipped = 0.0
        for x, V in zip(pts, fs.forms[5]):
            O = o1f_fifth_form(ref, x).entries
            direct = max(direct, float(np.max(np.abs(V - O))))
            flipped = max(flipped, float(np.max(np.abs(V + O))))
        stages["o1f_residual"] = direct / scale
        stages["o1f_residual_sign_reversed"] = flipped / scale
        if direct / scale > tol:
            rep.notes.append(
                "fifth form differs from the printed O1 formula; "
                f"agreement with reversed sign is {flipped / scale:.3g}"
            )
    III_max = fs.max_abs(3) / scale
    stages["third_form_max"] = III_max
    if III_max <= tol:
        rep.sub_verdict = "product"
    return rep


__all__ += ["DEFAULT_TOL", "K_MAX"]
