from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoforms import expr as ex
from geoforms.geometry import MetricField
from geoforms.yamabe import (SeriesInS, TruncationError, closed_form_sigma, pe_residual,
                             recognize_rational, solve_series, solve_series_full, willmore_formula,
                             yamabe_residual)

P3 = [(1.0, 0.7, 0.3), (1.2, 1.1, 0.6)]


def conf_flat(n):
    names = ("x", "y", "z", "u", "v")[:n]
    return MetricField(names, {(i, i): "(1 + 0.1*sin(x))^2" for i in range(n)})


def test_series_arithmetic():
    a = SeriesInS([ex.ZERO, ex.ONE], 5, exact=True)
    sq = a * a
    assert sq.coeff(2).is_one and sq.coeff(1).is_zero
    assert (a * a * a).coeff(3).is_one
    with pytest.raises(TruncationError):
        (a * a * a).truncate(2).coeff(3)
    assert a.ds().coeff(0).is_one
    assert a.is_odd() and not sq.is_odd()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=5), min_size=1, max_size=6),
       st.lists(st.fractions(-3, 3, max_denominator=5), min_size=1, max_size=6))
def test_series_product_is_polynomial_product(p, q):
    N = 6
    a = SeriesInS([ex.const(c) for c in p], N, exact=True)
    b = SeriesInS([ex.const(c) for c in q], N, exact=True)
    prod = np.convolve([float(c) for c in p], [float(c) for c in q])
    got = [float(ex.evaluate((a * b).coeff(j), {})) for j in range(N + 1)]
    want = [prod[j] if j < len(prod) else 0.0 for j in range(N + 1)]
    assert np.allclose(got, want)


def test_sphere_coefficients(s3):
    sigma, psi = solve_series(s3, 4)
    assert recognize_rational(sigma.coeff(3), s3.coords, P3) == Fraction(1, 6)
    assert recognize_rational(psi, s3.coords, P3) == 0
    assert sigma.is_odd()


def test_odd_dimension_has_no_obstruction():
    sigma, psi, residual = solve_series_full(conf_flat(4), 5, 9)
    assert psi is None
    assert all(residual.coeff(j).is_zero for j in range(10))


def test_even_dimension_truncation_guard(s3):
    with pytest.raises(TruncationError):
        solve_series(s3, 4, 3)


def test_residual_of_solution_is_small_numerically(s3):
    sigma, _ = solve_series(s3, 4)
    res = yamabe_residual(sigma, s3, 4, 3)
    for j in range(4):
        assert abs(ex.evaluate(res.coeff(j), dict(zip(s3.coords, P3[0])))) < 1e-12


@pytest.mark.parametrize("sc, d, branch, phi3", [
    (6, 4, "sinh", Fraction(1, 6)), (-6, 4, "sin", Fraction(-1, 6)), (0, 4, "linear", 0),
    (20, 6, "sinh", Fraction(1, 6)),
])
def test_closed_forms(sc, d, branch, phi3):
    cf = closed_form_sigma(sc, d)
    assert cf.branch == branch
    assert ex.evaluate(cf.series(5).coeff(3), {}) == pytest.approx(float(phi3))


def test_willmore_four_matches_solver():
    g = conf_flat(3)
    _, psi = solve_series(g, 4)
    ref = willmore_formula(g, 4)
    for x in (-0.7, 0.1, 0.9):
        b = {"x": x, "y": 0.0, "z": 0.0}
        assert ex.evaluate(psi, b) == pytest.approx(ex.evaluate(ref, b), abs=1e-12)
        assert abs(ex.evaluate(psi, b)) > 1e-4


@pytest.mark.slow
def test_willmore_six_matches_solver():
    g = conf_flat(5)
    _, psi = solve_series(g, 6)
    ref = willmore_formula(g, 6)
    for x in (-0.4, 0.5):
        b = {"x": x, "y": 0.0, "z": 0.0, "u": 0.0, "v": 0.0}
        assert ex.evaluate(psi, b) == pytest.approx(ex.evaluate(ref, b), rel=1e-9, abs=1e-14)


def test_pe_residual_cases(s3, s2s1):
    for s in (0.1, 0.3):
        r = pe_residual(s3, closed_form_sigma(6, 4), (s, 1.0, 0.7, 0.2), constant_sc=6)
        assert r.max_abs < 1e-9 and r.schouten_formula_gap < 1e-12
    flat = MetricField(("x", "y", "z"), {(0, 0): 1, (1, 1): 1, (2, 2): 1})
    assert pe_residual(flat, "t", (0.1, 0.2, 0.3, 0.4)).max_abs == 0.0
    sigma, _ = solve_series(s2s1, 4)
    assert pe_residual(s2s1, sigma, (0.1, 1.0, 0.3, 0.2)).max_abs >= 1e-3


def test_recognize_rational_rejects_functions(s3):
    assert recognize_rational(ex.parse("sin(a)"), s3.coords, P3) is None


def test_closed_form_amplitudes():
    for sc, branch in ((6, "sinh"), (-6, "sin")):
        cf = closed_form_sigma(sc, 4)
        assert cf.branch == branch
        assert cf.A == pytest.approx(1.0) and cf.r == pytest.approx(1.0)
    cf = closed_form_sigma(3, 4)
    assert cf.r == pytest.approx(np.sqrt(0.5)) and cf.A * cf.r == pytest.approx(1.0)


def test_residual_order_invariant(s2s1):
    sigma, psi, residual = solve_series_full(s2s1, 4)
    assert all(residual.coeff(j).is_zero for j in range(4))
    assert all(sigma.coeff(j).is_zero for j in range(0, sigma.order + 1, 2))
    for p in P3:
        b = dict(zip(s2s1.coords, p))
        assert ex.evaluate(residual.coeff(4), b) == pytest.approx(ex.evaluate(psi, b), abs=1e-12)
