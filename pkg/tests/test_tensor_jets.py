import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from geoforms import jets
from geoforms.tensor import (DOWN, UP, TensorError, TensorValue, antisymmetrize, contract, identity,
                             lower_index, metric_trace, raise_index, restrict, self_trace, symmetrize,
                             symmetrize_tf)

mats = arrays(np.float64, (3, 3), elements=st.floats(-3, 3))


def spd(a):
    return a @ a.T + 3 * np.eye(3)


def test_shape_and_valence_are_validated():
    with pytest.raises(TensorError):
        TensorValue(3, (DOWN, DOWN), np.zeros((3, 2)))
    with pytest.raises(TensorError):
        TensorValue(2, ("x",), np.zeros(2))


def test_entries_are_read_only():
    t = TensorValue.down(np.eye(2))
    with pytest.raises(ValueError):
        t.entries[0, 0] = 5.0


def test_contraction_needs_opposite_valence():
    a, b = TensorValue.down(np.eye(3)), TensorValue.down(np.eye(3))
    with pytest.raises(TensorError):
        contract(a, b, [(1, 0)])
    assert contract(a, identity(3), [(1, 0)]).valence == (DOWN, DOWN)


def test_self_trace_of_identity():
    assert float(self_trace(identity(4), 0, 1).entries) == 4.0


@settings(max_examples=50, deadline=None)
@given(mats, mats)
def test_trace_free_part_has_zero_trace_and_is_idempotent(a, m):
    g = TensorValue.down(spd(m))
    gi = TensorValue.up(np.linalg.inv(g.entries))
    t = symmetrize_tf(TensorValue.down(a), gi, g)
    assert abs(float(metric_trace(t, 0, 1, gi).entries)) <= 1e-9 * (1 + np.abs(a).max())
    assert np.allclose(symmetrize_tf(t, gi, g).entries, t.entries, atol=1e-10)
    assert np.allclose(t.entries, t.entries.T)


@settings(max_examples=50, deadline=None)
@given(mats)
def test_symmetric_plus_antisymmetric(a):
    t = TensorValue.down(a)
    assert np.allclose(symmetrize(t).entries + antisymmetrize(t).entries, a)
    assert np.allclose(symmetrize(symmetrize(t)).entries, symmetrize(t).entries)


@settings(max_examples=50, deadline=None)
@given(mats, arrays(np.float64, (3,), elements=st.floats(-3, 3)))
def test_raise_then_lower_is_identity(m, v):
    g = TensorValue.down(spd(m))
    gi = TensorValue.up(np.linalg.inv(g.entries))
    vec = TensorValue.down(v)
    up = raise_index(vec, 0, gi)
    assert up.valence == (UP,)
    assert np.allclose(lower_index(up, 0, g).entries, v, atol=1e-9)


def test_restrict():
    t = TensorValue.down(np.arange(16.0).reshape(4, 4))
    r = restrict(t, [1, 2, 3])
    assert r.dims == 3 and r.entries[0, 0] == 5.0


def test_series_product_and_inverse():
    sp = jets.space(2, 3)
    a = jets.Jet(sp, np.zeros(sp.size))
    b = jets.Jet(sp, np.zeros(sp.size))
    # a = 1 + x, b = 2 - y  (coefficients of monomials)
    ia = {m: i for i, m in enumerate(sp.monos)}
    ac, bc = a.coef.copy(), b.coef.copy()
    ac[ia[(0, 0)]], ac[ia[(1, 0)]] = 1, 1
    bc[ia[(0, 0)]], bc[ia[(0, 1)]] = 2, -1
    a, b = jets.Jet(sp, ac), jets.Jet(sp, bc)
    p = jets.einsum(",->", a, b)
    assert p.coef[ia[(1, 1)]] == -1 and p.coef[ia[(1, 0)]] == 2
    r = jets.einsum(",->", a, jets.reciprocal(a))
    assert np.allclose(r.coef, jets.constant(1.0, 2, 3).coef, atol=1e-14)


def test_matrix_inverse_jet():
    sp = jets.space(1, 4)
    coef = np.zeros((2, 2, sp.size))
    coef[:, :, 0] = [[2, 1], [1, 3]]
    coef[0, 1, 1] = coef[1, 0, 1] = 0.5
    coef[1, 1, 2] = -0.25
    m = jets.Jet(sp, coef)
    prod = jets.einsum("ab,bc->ac", m, jets.mat_inverse(m))
    assert np.allclose(prod.coef, jets.constant(np.eye(2), 1, 4).coef, atol=1e-13)


def test_derivative_round_trip():
    vals = {alpha: np.array(0.0) for alpha in jets.space(2, 3).monos}
    vals.update({(0, 0): np.array(1.5), (2, 1): np.array(6.0), (0, 3): np.array(-12.0)})
    j = jets.from_derivatives(vals, 2, 3)
    for alpha, v in vals.items():
        assert jets.derivative_at(j, alpha) == pytest.approx(float(v))
