"""Conformal rescaling and the low-order conformal fundamental forms.

Weights follow Omega^{3-k} for the k-th form: the trace-free second form
has weight 1 and the third form W(n, ., ., n) has weight 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as ex
from .geometry import CurvaturePipeline, MetricField, _lowering_sign, curvature_stack
from .hypersurface import (
    ChartError,
    GeneralizedChart,
    _Chart,
    _normal,
    _second_from_pipe,
    _check_base_warp,
)
from .tensor import DOWN, TensorValue

__all__ = [
    "WeightedForm",
    "rescale",
    "trace_free_second_ff",
    "third_conformal_ff",
    "extended_third_ff",
    "gauss_schouten_residual",
    "jacobi_operator",
    "intrinsic_schouten_tf",
    "weight_residual",
    "is_product",
]


@dataclass(frozen=True)
class WeightedForm:
    """Symmetric 2-tensor on Sigma at one point, tagged with a conformal weight."""

    tensor: TensorValue
    weight: Fraction
    trace_free: bool
    representative: str = "g"
    extras: dict = field(default_factory=dict)

    @property
    def entries(self) -> np.ndarray:
        return self.tensor.entries

    def max_abs(self) -> float:
        return self.tensor.max_abs()

    def trace(self, gbar_inv: np.ndarray) -> float:
        return float(np.einsum("ab,ab->", gbar_inv, self.entries))


def rescale(m: _Chart, omega, points: Sequence[Sequence[float]] | None = None) -> GeneralizedChart:
    """The chart for Omega^2 g. Positivity of Omega is checked at `points`."""
    om = omega if isinstance(omega, ex.Expr) else ex.parse(str(omega), m.coords)
    stray = om.free - set(m.coords)
    if stray:
        raise ChartError(f"conformal factor uses undeclared coordinates {sorted(stray)}")
    for x in points or ():
        p = x if len(x) == m.dims else m.ambient_point(x)
        v = ex.evaluate(om, dict(zip(m.coords, p)))
        if not v > 0:
            raise ChartError(f"conformal factor {v:.6g} <= 0 at {tuple(x)}")
    scaled = m.metric.scaled(ex.power(om, 2))
    return GeneralizedChart(scaled, base_warp=None, origin=f"rescaled by {om}")


def _pipe(m: _Chart, x, order: int) -> CurvaturePipeline:
    _check_base_warp(m, x)
    return CurvaturePipeline(m.metric.jet(m.ambient_point(x), order), _lowering_sign())


def _tf(t: np.ndarray, gbar: np.ndarray) -> np.ndarray:
    s = 0.5 * (t + t.T)
    tr = float(np.einsum("ab,ab->", np.linalg.inv(gbar), s))
    return s - tr / gbar.shape[0] * gbar


def trace_free_second_ff(m: _Chart, x: Sequence[float]) -> WeightedForm:
    pipe = _pipe(m, x, 1)
    gbar = pipe.g.value[1:, 1:]
    II = _second_from_pipe(pipe)
    return WeightedForm(TensorValue(m.dims - 1, (DOWN, DOWN), _tf(II, gbar)), Fraction(1), True)


def _weyl_nn(pipe: CurvaturePipeline) -> np.ndarray:
    n_up, _ = _normal(pipe)
    W = pipe.weyl.value
    return np.einsum("c,cabd,d->ab", n_up, W, n_up)[1:, 1:]


def is_product(m: _Chart) -> bool:
    """Structurally a product: normal form with gbar independent of t."""
    if not m.normal_form:
        return False
    n = m.dims - 1
    return all(m.transverse not in m.gbar(i, j).free for i in range(n) for j in range(i, n))


def intrinsic_schouten_tf(m: _Chart, x: Sequence[float]) -> np.ndarray:
    """Trace-free Schouten tensor of gbar(0, x) (needs d - 1 >= 3)."""
    if m.dims - 1 < 3:
        raise ValueError("intrinsic Schouten tensor needs a hypersurface of dimension >= 3")
    st = curvature_stack(m.sigma_metric(), x, bach=False)
    return _tf(st.schouten.entries, st.g.entries)


def third_conformal_ff(m: _Chart, x: Sequence[float]) -> WeightedForm:
    """W(n, a, b, n) on Sigma; products also get the (d-3)/(d-2) Po_bar prediction."""
    d = m.dims
    if d < 4:
        raise ValueError("the third conformal form vanishes structurally in d = 3 (Weyl is zero)")
    pipe = _pipe(m, x, 2)
    val = _weyl_nn(pipe)
    extras = {}
    if is_product(m):
        extras["product_prediction"] = Fraction(d - 3, d - 2) * intrinsic_schouten_tf(m, x)
    return WeightedForm(TensorValue(d - 1, (DOWN, DOWN), val), Fraction(0), True, extras=extras)


def extended_third_ff(m: _Chart, sigma, point: Sequence[float]) -> WeightedForm:
    """W_{nab n} + 2 sigma C_{n(ab)} - sigma^2 B_ab / (d - 4) with n = d sigma.

    `point` is an ambient point (t, x); `sigma` is a SeriesInS in the
    transverse coordinate or an Expression in all coordinates.
    """
    from .yamabe import SeriesInS

    d = m.dims
    if d < 6:
        raise ValueError("the extended third form is defined here only for d >= 6")
    p = tuple(float(v) for v in point)
    if len(p) != d:
        raise ValueError(f"ambient point needs {d} coordinates")
    sig = sigma.to_expr(m.transverse) if isinstance(sigma, SeriesInS) else (
        sigma if isinstance(sigma, ex.Expr) else ex.parse(str(sigma), m.coords)
    )
    pipe = CurvaturePipeline(m.metric.jet(p, 4), _lowering_sign())
    ev = ex.Evaluator(dict(zip(m.coords, p)))
    s_val = ev(sig)
    n_dn = np.array([ev(ex.differentiate(sig, c)) for c in m.coords])
    n_up = pipe.ginv.value @ n_dn
    W = pipe.weyl.value
    C = pipe.cotton.value
    B = pipe.bach.value
    Wn = np.einsum("c,cabd,d->ab", n_up, W, n_up)
    Cn = np.einsum("c,cab->ab", n_up, C)
    full = Wn + s_val * (Cn + Cn.T) - s_val**2 / (d - 4) * B
    return WeightedForm(
        TensorValue(d - 1, (DOWN, DOWN), full[1:, 1:]), Fraction(0), True,
        extras={"sigma": s_val},
    )


def gauss_schouten_residual(m: _Chart, x: Sequence[float]) -> TensorValue:
    """(IIo^2)o - W_nabn - (d-3)(Po^T - Po_bar + H IIo); zero for any embedding."""
    d = m.dims
    if d < 4:
        raise ValueError("identity needs d >= 4")
    pipe = _pipe(m, x, 2)
    g = pipe.g.value
    gbar = g[1:, 1:]
    gbi = np.linalg.inv(gbar)
    II = _second_from_pipe(pipe)
    H = float(np.einsum("ab,ab->", gbi, II)) / (d - 1)
    IIo = _tf(II, gbar)
    sq = _tf(IIo @ gbi @ IIo, gbar)
    Wn = _weyl_nn(pipe)
    P_top = _tf(pipe.schouten.value[1:, 1:], gbar)
    Pbar = intrinsic_schouten_tf(m, x)
    res = sq - Wn - (d - 3) * (P_top - Pbar + H * IIo)
    return TensorValue(d - 1, (DOWN, DOWN), res)


def _hessian_on_sigma(m: _Chart, tau: ex.Expr, x) -> np.ndarray:
    base = m.sigma_metric()
    ev = ex.Evaluator(dict(zip(m.coords, m.ambient_point(x))))
    xs = m.sigma_coords
    d1 = [ex.differentiate(tau, v) for v in xs]
    df = np.array([ev(e) for e in d1])
    ddf = np.array([[ev(ex.differentiate(e, v)) for v in xs] for e in d1])
    jet = base.jet(x, 1)
    dg = jet.grad().value
    first = 0.5 * (np.einsum("abd->dab", dg) + np.einsum("bad->dab", dg) - dg)
    G = np.einsum("cd,dab->cab", np.linalg.inv(jet.value), first)
    return ddf - np.einsum("kij,k->ij", G, df)


def jacobi_operator(m: _Chart, tau, x: Sequence[float]) -> TensorValue:
    """(Hess_o + Po_bar - (d-2)/(d-3) IIIo) tau at a Sigma point."""
    d = m.dims
    if d < 4:
        raise ValueError("Jacobi-like operator divides by d - 3; refused for d = 3")
    te = tau if isinstance(tau, ex.Expr) else ex.parse(str(tau), m.coords)
    if m.transverse in te.free:
        raise ChartError("tau must be a function on Sigma")
    gbar = induced = m.metric.values(m.ambient_point(x))[1:, 1:]
    hess = _tf(_hessian_on_sigma(m, te, x), induced)
    tv = ex.evaluate(te, dict(zip(m.coords, m.ambient_point(x))))
    IIIo = third_conformal_ff(m, x).entries
    out = hess + tv * (intrinsic_schouten_tf(m, x) - Fraction(d - 2, d - 3) * IIIo)
    return TensorValue(d - 1, (DOWN, DOWN), _tf(out, gbar))


_FORMS = {2: trace_free_second_ff, 3: third_conformal_ff}


def weight_residual(m: _Chart, k: int, omega, x: Sequence[float]) -> float:
    """max |F_k(Omega^2 g) - Omega^{3-k} F_k(g)| at a Sigma point."""
    fn = _FORMS[k]
    om = omega if isinstance(omega, ex.Expr) else ex.parse(str(omega), m.coords)
    base = fn(m, x)
    scaled = fn(rescale(m, om, [x]), x)
    ov = ex.evaluate(om, dict(zip(m.coords, m.ambient_point(x))))
    return float(np.max(np.abs(scaled.entries - ov ** float(base.weight) * base.entries)))
