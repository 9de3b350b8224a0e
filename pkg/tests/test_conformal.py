import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoforms import expr as ex
from geoforms.conformal import (extended_third_ff, gauss_schouten_residual, intrinsic_schouten_tf,
                                is_product, jacobi_operator, rescale, third_conformal_ff,
                                trace_free_second_ff, weight_residual)
from geoforms.geometry import MetricField
from geoforms.hypersurface import ChartError, NormalFormMetric
from conftest import maxabs, product_chart

X = (0.1, 0.2, 0.3)


def test_forms_are_trace_free(generic_chart):
    gbar = generic_chart.metric.values(generic_chart.ambient_point(X))[1:, 1:]
    gi = np.linalg.inv(gbar)
    for form in (trace_free_second_ff(generic_chart, X), third_conformal_ff(generic_chart, X)):
        assert abs(form.trace(gi)) < 1e-12
        assert form.trace_free
    assert trace_free_second_ff(generic_chart, X).weight == 1
    assert third_conformal_ff(generic_chart, X).weight == 0


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_weight_law_random_factors(generic_chart, a, b, c):
    omega = ex.parse(f"exp({a}*x + {b}*y*t + {c}*t^2)")
    for k in (2, 3):
        assert weight_residual(generic_chart, k, omega, X) <= 1e-8


@settings(max_examples=10, deadline=None)
@given(st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5)))
def test_gauss_identity_holds_everywhere(generic_chart, x):
    assert gauss_schouten_residual(generic_chart, x).max_abs() < 1e-9


def test_product_relation(s2s1, s3):
    m = product_chart(s2s1)
    x = (1.0, 0.4, 0.2)
    III = third_conformal_ff(m, x)
    assert is_product(m)
    assert np.allclose(III.entries, 0.5 * intrinsic_schouten_tf(m, x), atol=1e-10)
    assert np.allclose(III.entries, III.extras["product_prediction"].astype(float), atol=1e-10)
    assert maxabs(third_conformal_ff(product_chart(s3), x).entries) < 1e-10


def test_jacobi_on_products(s2s1):
    m = product_chart(s2s1)
    x = (1.0, 0.4, 0.2)
    assert jacobi_operator(m, "1", x).max_abs() < 1e-10
    # tau = exp(c) on the circle factor: Hessian is diagonal in c only
    out = jacobi_operator(m, "exp(c)", x).entries
    assert maxabs(out - out.T) < 1e-12 and maxabs(out) > 1e-3
    with pytest.raises(ChartError):
        jacobi_operator(m, "t", x)


def test_three_dimensional_refusals():
    m = NormalFormMetric(("t", "x", "y"), {(0, 0): "exp(2*t)", (1, 1): "exp(2*t)"})
    with pytest.raises(ValueError):
        third_conformal_ff(m, (0.1, 0.2))
    with pytest.raises(ValueError):
        jacobi_operator(m, "1", (0.1, 0.2))
    assert np.allclose(trace_free_second_ff(m, (0.1, 0.2)).entries, 0, atol=1e-12)


def test_rescale_checks_positivity(generic_chart):
    with pytest.raises(ChartError):
        rescale(generic_chart, "x", [(-0.5, 0.0, 0.0)])
    with pytest.raises(ChartError):
        rescale(generic_chart, ex.parse("exp(w)"))


def test_extended_third_form_reduces_to_weyl_on_sigma():
    coords = ("t", "x", "y", "z", "u", "v")
    gbar = {(0, 0): "1 + t^2*y", (1, 1): "cosh(t*x)", (2, 2): 1, (3, 3): "exp(t*z)", (4, 4): 1,
            (0, 1): "t*u/4"}
    m = NormalFormMetric(coords, gbar)
    x = (0.1, 0.2, 0.3, 0.1, 0.2)
    ext = extended_third_ff(m, ex.parse("t"), m.ambient_point(x))
    assert np.allclose(ext.entries, third_conformal_ff(m, x).entries, atol=1e-10)


def test_extended_third_form_needs_six_dimensions(generic_chart):
    with pytest.raises(ValueError):
        extended_third_ff(generic_chart, ex.parse("t"), (0, 0.1, 0.2, 0.3))


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.7])
def test_constant_factor_weights_exact(generic_chart, lam):
    assert weight_residual(generic_chart, 2, str(lam), X) <= 1e-10
    assert weight_residual(generic_chart, 3, str(lam), X) <= 1e-10


def test_rescale_trivial_cases(generic_chart):
    from geoforms.geometry import curvature_stack
    p = generic_chart.ambient_point(X)
    same = rescale(generic_chart, "1")
    assert np.allclose(same.metric.values(p), generic_chart.metric.values(p))
    a = curvature_stack(generic_chart.metric, p).scalar
    b = curvature_stack(rescale(generic_chart, "2").metric, p).scalar
    assert b == pytest.approx(a / 4, rel=1e-12)


def test_products_are_umbilic_free(s2s1):
    from geoforms.hypersurface import mean_curvature
    m = product_chart(s2s1)
    x = (1.0, 0.4, 0.2)
    assert trace_free_second_ff(m, x).max_abs() == 0.0
    assert mean_curvature(m, x) == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_jacobi_output_symmetric_trace_free(s2s1, a, b):
    m = product_chart(s2s1)
    x = (1.0, 0.4, 0.2)
    out = jacobi_operator(m, f"exp({a}*c) + {b}*a^2", x).entries
    gi = np.linalg.inv(m.metric.values(m.ambient_point(x))[1:, 1:])
    assert maxabs(out - out.T) < 1e-10
    assert abs(np.einsum("ab,ab->", gi, out)) < 1e-10 * max(1.0, maxabs(out))


def test_extended_third_form_vanishes_off_sigma_for_sphere_fiber():
    from geoforms.yamabe import solve_series
    s5 = MetricField(("a", "b", "c", "e", "f"), {
        (0, 0): 1, (1, 1): "sin(a)^2", (2, 2): "sin(a)^2*sin(b)^2",
        (3, 3): "sin(a)^2*sin(b)^2*sin(c)^2", (4, 4): "sin(a)^2*sin(b)^2*sin(c)^2*sin(e)^2"})
    m = product_chart(s5)
    sigma, _ = solve_series(s5, 6)
    for s in (0.05, 0.2):
        ext = extended_third_ff(m, sigma, (s, 1.0, 0.7, 1.2, 0.9, 0.3))
        assert maxabs(ext.entries) < 1e-10
