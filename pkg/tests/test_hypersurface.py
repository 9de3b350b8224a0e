import numpy as np
import pytest

from geoforms import expr as ex
from geoforms.geometry import MetricField, SymbolicTensor, christoffel_symbols, covariant_derivative
from geoforms.hypersurface import (K_MAX, ChartError, GeneralizedChart, NormalFormMetric,
                                   base_like_normal_form, fundamental_form, fundamental_forms,
                                   lie_pullback, mean_curvature, o1f_fifth_form, second_ff,
                                   third_ff_direct, transverse_order_probe)
from conftest import maxabs, product_chart

X = (0.1, 0.2, 0.3)


def test_fiber_forms(fiber_e2t):
    g = fiber_e2t.metric.values(fiber_e2t.ambient_point(X))[1:, 1:]
    assert np.allclose(second_ff(fiber_e2t, X).entries, g, atol=1e-12)
    assert mean_curvature(fiber_e2t, X) == pytest.approx(1.0)
    assert np.allclose(fundamental_form(fiber_e2t, 3, X).entries, g, atol=1e-12)
    for k in (4, 5, 6):
        assert fundamental_form(fiber_e2t, k, X).max_abs() < 1e-10
    assert np.allclose(lie_pullback(fiber_e2t, 3, X).entries, 8 * g)


def test_third_form_two_routes(generic_chart):
    a = fundamental_form(generic_chart, 3, X).entries
    b = third_ff_direct(generic_chart, X).entries
    assert np.allclose(a, b, atol=1e-12)


def test_forms_are_symmetric(generic_chart):
    fs = fundamental_forms(generic_chart, 6, [X, (0.0, -0.2, 0.1)])
    for k in fs.orders:
        for f in fs.forms[k]:
            assert maxabs(f - f.T) < 1e-9 * max(1.0, maxabs(f))


def test_products_vanish(s3, s2s1):
    for base in (s3, s2s1):
        fs = fundamental_forms(product_chart(base), 7, [(1.0, 0.7, 0.3)])
        assert all(fs.max_abs(k) < 1e-10 for k in fs.orders)


def test_order_limits(generic_chart):
    with pytest.raises(ValueError):
        fundamental_form(generic_chart, 1, X)
    with pytest.raises(ValueError):
        fundamental_form(generic_chart, K_MAX + 1, X)


def test_generalized_chart_rules():
    g = MetricField(("t", "x", "y"), {(0, 0): 1, (0, 1): "x", (1, 1): 2, (2, 2): 1})
    with pytest.raises(ChartError):
        GeneralizedChart(g)
    with pytest.raises(ChartError):
        base_like_normal_form(("t", "x", "y"), "exp(t)", {(0, 0): 1, (1, 1): 1})
    m = base_like_normal_form(("t", "x", "y"), "x", {(0, 0): 1, (1, 1): 1})
    with pytest.raises(ChartError):
        lie_pullback(m, 2, (0.5, 0.0))
    with pytest.raises(ChartError, match="<= 0"):
        fundamental_form(m, 2, (-0.5, 0.0))


def test_base_like_values():
    m = base_like_normal_form(("t", "x", "y"), "exp(x^2)", {(0, 0): 1, (1, 1): 1})
    for x in (-0.5, 0.2, 0.9):
        p = (x, 0.1)
        assert fundamental_form(m, 2, p).max_abs() < 1e-12
        assert fundamental_form(m, 3, p).entries[0, 0] == pytest.approx(2 + 4 * x * x, abs=1e-10)
        assert fundamental_form(m, 4, p).max_abs() < 1e-10
        assert fundamental_form(m, 5, p).entries[0, 0] == pytest.approx(16 * x * x, abs=1e-9)
        assert o1f_fifth_form(m, p).entries[0, 0] == pytest.approx(-16 * x * x, abs=1e-9)


def _symbolic_riemann(g: MetricField) -> SymbolicTensor:
    d = g.dims
    G = christoffel_symbols(g)
    comps = np.empty((d,) * 4, dtype=object)
    mixed = np.empty((d,) * 4, dtype=object)
    for a in range(d):
        for b in range(d):
            for c in range(d):
                for e in range(d):
                    v = ex.sub(ex.differentiate(G[c, b, e], g.coords[a]), ex.differentiate(G[c, a, e], g.coords[b]))
                    for f in range(d):
                        v = ex.add(v, ex.sub(ex.mul(G[c, a, f], G[f, b, e]), ex.mul(G[c, b, f], G[f, a, e])))
                    mixed[a, b, c, e] = v
    for a in range(d):
        for b in range(d):
            for c in range(d):
                for e in range(d):
                    v = ex.ZERO
                    for f in range(d):
                        v = ex.add(v, ex.mul(g.component(c, f), mixed[a, b, f, e]))
                    comps[a, b, c, e] = v
    return SymbolicTensor(g.coords, ("d",) * 4, comps)


def test_fifth_form_symbolic_oracle():
    """FF5_xx from a fully symbolic nabla^2 Rm, independent of the jet pipeline."""
    m = base_like_normal_form(("t", "x", "y"), "exp(x^2)", {(0, 0): 1, (1, 1): 1})
    g = m.metric
    d2R = covariant_derivative(g, _symbolic_riemann(g), 2)
    for x in (0.3, 0.7):
        p = (0.0, x, 0.1)
        val = ex.evaluate(d2R.components[0, 0, 0, 1, 1, 0], dict(zip(g.coords, p)))
        f = np.exp(x * x)
        assert val / f**4 == pytest.approx(16 * x * x, rel=1e-10)
        assert fundamental_form(m, 5, (x, 0.1)).entries[0, 0] == pytest.approx(val / f**4, rel=1e-10)


def test_transverse_order():
    flat = NormalFormMetric(("t", "x", "y", "z"), {(0, 0): 1, (1, 1): 1, (2, 2): 1})
    pts = [(0.0, 0.1, 0.2), (0.5, -0.3, 0.1)]
    ch = transverse_order_probe(flat, 3, pts)
    assert ch[2] <= 1e-11 and ch[3] <= 1e-11 and ch[4] >= 1e-7
    ch2 = transverse_order_probe(flat, 2, pts)
    assert ch2[2] <= 1e-11 and ch2[3] >= 1e-7
