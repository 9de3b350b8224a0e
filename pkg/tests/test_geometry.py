import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoforms.geometry import (STACK_MEMBERS, MetricField, SingularMetricError, christoffel_symbols,
                               curvature_stack, fd_check, pipeline)
from conftest import maxabs

pt4 = st.tuples(*[st.floats(-0.4, 0.4)] * 4)


def test_round_sphere_values(s3):
    st_ = curvature_stack(s3, (1.0, 0.7, 0.3))
    assert st_.scalar == pytest.approx(6.0, abs=1e-12)
    assert st_.J == pytest.approx(1.5, abs=1e-12)
    assert maxabs(st_.weyl.entries) < 1e-12
    assert maxabs(st_.cotton.entries) < 1e-12
    assert st_.bach is None
    # constant curvature: R_abcd = g_ac g_bd - g_ad g_bc under the lowering used here
    g = st_.g.entries
    model = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
    assert np.allclose(st_.riemann.entries, model, atol=1e-12)


def test_bach_gated_in_three_dimensions(s3):
    with pytest.raises(ValueError, match="force_bach"):
        curvature_stack(s3, (1.0, 0.7, 0.3), bach=True)
    forced = curvature_stack(s3, (1.0, 0.7, 0.3), bach=True, force_bach=True)
    assert forced.bach is not None


def test_singular_metric_detected():
    g = MetricField(("t", "x", "y"), {(0, 0): 1, (1, 1): "x^2", (2, 2): 1})
    with pytest.raises(SingularMetricError):
        g.jet((0.0, 0.0, 0.3), 2)


def test_christoffel_symbolic_matches_jet(generic4):
    p = (0.1, 0.2, 0.3, 0.4)
    sym = christoffel_symbols(generic4)
    from geoforms import expr as ex
    vals = np.vectorize(lambda e: ex.evaluate(e, dict(zip(generic4.coords, p))), otypes=[float])(sym)
    assert np.allclose(vals, pipeline(generic4, p, 1).gamma.value, atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(pt4)
def test_riemann_symmetries_and_bianchi(generic4, p):
    pipe = pipeline(generic4, p, 3)
    R = pipe.riemann.value
    tol = 1e-10 * max(1.0, maxabs(R))
    assert maxabs(R + R.transpose(1, 0, 2, 3)) < tol
    assert maxabs(R + R.transpose(0, 1, 3, 2)) < tol
    assert maxabs(R - R.transpose(2, 3, 0, 1)) < tol
    assert maxabs(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)) < tol
    # second Bianchi: nabla_[e R_ab]cd = 0
    dR = pipe.nabla(pipe.riemann).value
    cyc = dR + dR.transpose(1, 2, 0, 3, 4) + dR.transpose(2, 0, 1, 3, 4)
    assert maxabs(cyc) < 1e-9 * max(1.0, maxabs(dR))


@settings(max_examples=10, deadline=None)
@given(pt4)
def test_weyl_trace_free_and_tensor_identities(generic4, p):
    st_ = curvature_stack(generic4, p)
    gi = st_.g_inv.entries
    W = st_.weyl.entries
    assert maxabs(np.einsum("ac,abcd->bd", gi, W)) < 1e-10
    C = st_.cotton.entries
    assert maxabs(np.einsum("ab,cab->c", gi, C)) < 1e-9   # trace over the antisymmetric pair's partner
    B = st_.bach.entries
    assert maxabs(B - B.T) < 1e-8 * max(1.0, maxabs(B))
    assert abs(np.einsum("ab,ab->", gi, B)) < 1e-8 * max(1.0, maxabs(B))


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 3.0))
def test_constant_rescaling(c):
    g = MetricField(("t", "x", "y", "z"), {(0, 0): "exp(2*t*x)", (1, 1): "1 + t^2*y", (2, 2): "cosh(t + z)",
                                           (3, 3): "2 + sin(x*y)"})
    p = (0.1, 0.2, 0.3, 0.4)
    a = curvature_stack(g, p)
    b = curvature_stack(g.scaled(c * c), p)
    assert b.scalar == pytest.approx(a.scalar / c**2, rel=1e-10, abs=1e-12)
    assert np.allclose(b.ricci.entries, a.ricci.entries, atol=1e-10)
    assert np.allclose(b.weyl.entries, c * c * a.weyl.entries, atol=1e-10)


@pytest.mark.parametrize("member", STACK_MEMBERS)
def test_fd_oracle_generic(generic4, member):
    assert fd_check(generic4, member, (0.1, 0.2, 0.3, 0.4)) <= 1e-6


@settings(max_examples=6, deadline=None)
@given(pt4)
def test_fd_oracle_random_points(generic4, p):
    assert fd_check(generic4, "all", p) <= 1e-6


def test_fd_check_rejects_bad_input(generic4):
    with pytest.raises(ValueError):
        fd_check(generic4, "torsion", (0, 0, 0, 0))
    with pytest.raises(ValueError):
        fd_check(generic4, "all", (0, 0, 0, 0), h=0)
