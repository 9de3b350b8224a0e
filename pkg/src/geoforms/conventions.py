"""Start-up sign checks that pin the curvature and fundamental-form conventions.

Both signs are derived from test metrics the first time they are needed and
cached for the process. Expected values are +1; anything else is reported
in the banner so reports stay honest about what was used.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _round_s3():
    from .geometry import MetricField

    return MetricField(
        ("chi", "theta", "phi"),
        {(0, 0): "1", (1, 1): "sin(chi)^2", (2, 2): "sin(chi)^2*sin(theta)^2"},
    )


@lru_cache(maxsize=None)
def riemann_lowering_sign() -> int:
    """+1 if R_abcd = g_ce R_ab^e_d makes the Weyl display trace-free."""
    from .geometry import CurvaturePipeline, MetricField

    # a metric with nonzero, non-constant curvature in d = 4
    g = MetricField(
        ("t", "x", "y", "z"),
        {(0, 0): "1 + x^2/3", (1, 1): "exp(t)", (2, 2): "1 + t*y/2", (3, 3): "cosh(x)", (1, 2): "t/5"},
    )
    p = (0.3, 0.2, -0.4, 0.1)
    jet = g.jet(p, 2)
    best = None
    for sign in (1, -1):
        pipe = CurvaturePipeline(jet, sign)
        W = pipe.weyl.value
        trace = np.einsum("ac,abcd->bd", pipe.ginv.value, W)
        err = float(np.max(np.abs(trace)))
        if best is None or err < best[1]:
            best = (sign, err)
    sign, err = best
    if err > 1e-9:
        raise RuntimeError("no lowering sign makes the Weyl tensor trace-free")
    s3 = CurvaturePipeline(_round_s3().jet((1.0, 0.7, 0.2), 2), sign)
    if float(s3.scalar.value) < 0:
        raise RuntimeError("unit 3-sphere has negative scalar curvature; curvature convention broken")
    return sign


@lru_cache(maxsize=None)
def ff_sign() -> int:
    """+1 if the rank-4 fundamental-form contraction reproduces III on h = e^{2t}.

    For dt^2 + h(t) dx^2 the closed form is III = (h''/2 - h'^2/4) gbar = gbar.
    """
    from .hypersurface import NormalFormMetric, _raw_fundamental_form

    m = NormalFormMetric(("t", "x", "y", "z"), {(0, 0): "exp(2*t)", (1, 1): "exp(2*t)", (2, 2): "exp(2*t)"})
    raw = _raw_fundamental_form(m, 3, (0.1, 0.2, 0.3))
    expect = np.eye(3)
    if np.allclose(raw, expect, atol=1e-9):
        return 1
    if np.allclose(raw, -expect, atol=1e-9):
        return -1
    raise RuntimeError("third fundamental form matches neither sign of the closed form")


def banner() -> dict:
    return {
        "riemann_lowering": "R_abcd = g_ce R_ab^e_d",
        "riemann_lowering_sign": riemann_lowering_sign(),
        "fundamental_form_sign": ff_sign(),
        "curvature_operator": "R_ab^c_d z^d = [nabla_a, nabla_b] z^c",
        "ricci": "Ric_ab = R_ca^c_b",
    }
