import pytest
from hypothesis import given, settings, strategies as st

from geoforms.classify import (base_reference, check_base_like, check_fiber_like, check_product,
                               fiber_reference, sample_grid)
from geoforms.hypersurface import ChartError, NormalFormMetric, base_like_normal_form
from conftest import product_chart

PTS = [(0.1, 0.2, 0.3), (-0.3, 0.0, 0.4)]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.5, 4)), min_size=1, max_size=3),
       st.integers(1, 4), st.floats(0, 0.2))
def test_grid_stays_inside(ranges, n, margin):
    rs = [(lo, lo + w) for lo, w in ranges]
    pts = sample_grid(rs, n, margin)
    assert len(pts) == n ** len(rs)
    for p in pts:
        for v, (lo, hi) in zip(p, rs):
            assert lo + margin - 1e-12 <= v <= hi - margin + 1e-12


def test_grid_rejects_empty_range():
    with pytest.raises(ValueError):
        sample_grid([(0, 0.1)], 3, 0.1)


def test_product_accepts_products_and_rejects_fibers(s3, fiber_e2t):
    assert check_product(product_chart(s3), 5, [(1.0, 0.7, 0.3)]).verdict == "product"
    rep = check_product(fiber_e2t, 5, PTS)
    assert rep.verdict == "rejected-at-order-2" and rep.failed_order == 2


def test_fiber_like(fiber_e2t):
    rep = check_fiber_like(fiber_e2t, "exp(2*t)", 5, PTS)
    assert rep.verdict == "fiber-like" and rep.sub_verdict is None
    assert rep.warp["h_prime0_hint"] == pytest.approx(2.0)
    wrong = check_fiber_like(fiber_e2t, "exp(3*t)", 5, PTS)
    assert wrong.verdict == "rejected-at-order-2"
    ref = fiber_reference(fiber_e2t, "exp(2*t)")
    assert check_fiber_like(ref, "exp(2*t)", 5, PTS).passed


def test_fiber_warp_normalization():
    m = NormalFormMetric(("t", "x", "y"), {(0, 0): 1, (1, 1): 1})
    ref = fiber_reference(m, "3*exp(2*t)")
    assert ref.metric.values((0.0, 0.1, 0.2))[1, 1] == pytest.approx(1.0)
    with pytest.raises(ChartError):
        fiber_reference(m, "exp(x)")
    with pytest.raises(ChartError):
        fiber_reference(m, "t")


def test_constant_warp_is_product(s3):
    rep = check_fiber_like(product_chart(s3), "2", 5, [(1.0, 0.7, 0.3)])
    assert rep.passed and rep.sub_verdict == "product"


def test_base_like_stages():
    m = base_like_normal_form(("t", "x", "y"), "exp(x^2)", {(0, 0): 1, (1, 1): 1})
    pts = [(0.3, 0.1), (-0.5, 0.2)]
    rep = check_base_like(m, "exp(x^2)", 7, pts)
    assert rep.verdict == "base-like"
    assert set(rep.stages) >= {"even_vanishing", "hessian_identity", "odd_reference",
                               "o1f_residual", "o1f_residual_sign_reversed", "third_form_max"}
    assert rep.stages["o1f_residual_sign_reversed"] < 1e-10
    bad = check_base_like(m, "exp(2*x^2)", 5, pts)
    assert bad.verdict == "rejected-at-order-3" and bad.failed_stage == "hessian_identity"
    assert base_reference(m, "exp(x^2)").base_warp is not None


def test_base_like_rejects_fiber(fiber_e2t):
    rep = check_base_like(fiber_e2t, "1 + x^2", 5, PTS)
    assert rep.failed_stage == "even_vanishing" and rep.failed_order == 2


def test_flat_polar_is_product_subverdict():
    m = base_like_normal_form(("t", "x", "y"), "x", {(0, 0): 1, (1, 1): 1})
    rep = check_base_like(m, "x", 7, [(0.5, 0.0), (1.2, 0.3)])
    assert rep.passed and rep.sub_verdict == "product"


def test_report_serializes(fiber_e2t):
    d = check_fiber_like(fiber_e2t, "exp(2*t)", 3, PTS).to_dict()
    assert set(d["residuals"]) == {"2", "3"}
