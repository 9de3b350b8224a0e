"""The acceptance suite: eleven numbered checks at fixed tolerances.

Each check returns a :class:`Criterion` holding named sub-checks, so a
failure says which quantity missed and by how much. ``run_all`` is shared
by ``geoforms selftest`` and the pytest gate.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import expr as ex
from .classify import check_base_like, check_fiber_like, fiber_reference, sample_grid
from .conformal import intrinsic_schouten_tf, jacobi_operator, third_conformal_ff, weight_residual
from .geometry import STACK_MEMBERS, MetricField, curvature_stack, fd_check
from .hypersurface import (
    NormalFormMetric,
    base_like_normal_form,
    fundamental_forms,
    o1f_fifth_form,
    transverse_order_probe,
)
from .yamabe import (
    closed_form_sigma,
    pe_residual,
    recognize_rational,
    solve_series,
    solve_series_full,
)

__all__ = ["Check", "Criterion", "CRITERIA", "run_all", "run_one", "format_line"]


@dataclass
class Check:
    name: str
    value: float
    bound: float
    kind: str = "le"  # "le": value <= bound, "ge": value >= bound
    note: str = ""

    @property
    def ok(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.bound if self.kind == "le" else self.value >= self.bound


@dataclass
class Criterion:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.ok for c in self.checks)

    def le(self, name, value, bound, note=""):
        self.checks.append(Check(name, float(value), bound, "le", note))

    def ge(self, name, value, bound, note=""):
        self.checks.append(Check(name, float(value), bound, "ge", note))

    def failing(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "value": c.value, "bound": c.bound, "kind": c.kind,
                 "ok": c.ok, "note": c.note}
                for c in self.checks
            ],
            "notes": list(self.notes),
        }


# ----------------------------------------------------------------- metrics

def _s3() -> MetricField:
    return MetricField(("a", "b", "c"), {(0, 0): 1, (1, 1): "sin(a)^2", (2, 2): "sin(a)^2*sin(b)^2"})


def _s5() -> MetricField:
    return MetricField(("a", "b", "c", "e", "f"), {
        (0, 0): 1,
        (1, 1): "sin(a)^2",
        (2, 2): "sin(a)^2*sin(b)^2",
        (3, 3): "sin(a)^2*sin(b)^2*sin(c)^2",
        (4, 4): "sin(a)^2*sin(b)^2*sin(c)^2*sin(e)^2",
    })


def _s2s1() -> MetricField:
    return MetricField(("a", "b", "c"), {(0, 0): 1, (1, 1): "sin(a)^2", (2, 2): 1})


def _h3() -> MetricField:
    return MetricField(("x", "y", "z"), {(0, 0): "exp(2*z)", (1, 1): "exp(2*z)", (2, 2): 1})


def _product(base: MetricField, t: str = "t") -> NormalFormMetric:
    n = base.dims
    return NormalFormMetric((t,) + base.coords,
                            {(i, j): base.component(i, j) for i in range(n) for j in range(i, n)})


def _generic4() -> MetricField:
    return MetricField(("t", "x", "y", "z"), {
        (0, 0): "exp(2*t*x)", (1, 1): "1 + t^2*y + x^2/4", (2, 2): "cosh(t + z)",
        (3, 3): "2 + sin(x*y)", (0, 1): "t*z/3", (1, 2): "x*y/5",
    })


def _generic_chart() -> NormalFormMetric:
    return NormalFormMetric(("t", "x", "y", "z"), {
        (0, 0): "exp(2*t*x)", (1, 1): "1 + t^2*y + x^2/4", (2, 2): "cosh(t + z)", (0, 1): "t*z/3",
    })


def _conf_flat(n: int) -> MetricField:
    names = ("x", "y", "z", "u", "v")[:n]
    w = "(1 + 0.1*sin(x))^2"
    return MetricField(names, {(i, i): w for i in range(n)})


_S3_BOX = [(0.5, 1.5), (0.5, 1.5), (0.0, 1.0)]


def _max(vals) -> float:
    return float(max(vals)) if vals else 0.0


# ---------------------------------------------------------------- criteria

def c1_curvature_oracle() -> Criterion:
    c = Criterion(1, "curvature oracle: unit S^3 and finite-difference stack agreement")
    st = curvature_stack(_s3(), (1.0, 0.7, 0.3))
    c.le("|Sc - 6| on S^3", abs(st.scalar - 6.0), 1e-9)
    c.le("|J - 3/2| on S^3", abs(st.J - 1.5), 1e-9)
    cases = [
        ("S^3", _s3(), (1.0, 0.7, 0.3)),
        ("R x S^3", _product(_s3()).metric, (0.2, 1.0, 0.7, 0.3)),
        ("generic d=4", _generic4(), (0.1, 0.2, 0.3, 0.4)),
    ]
    for label, g, p in cases:
        for member in STACK_MEMBERS:
            if member == "bach" and g.dims < 4:
                continue
            c.le(f"fd {member} on {label}", fd_check(g, member, p), 1e-6)
    return c


def c2_product_vanishing() -> Criterion:
    c = Criterion(2, "product embeddings: all forms of order 2..7 vanish")
    pts = sample_grid(_S3_BOX, 3, 0.1)
    for label, base in (("R x S^3", _s3()), ("R x (S^2 x S^1)", _s2s1())):
        fs = fundamental_forms(_product(base), 7, pts)
        for k in fs.orders:
            c.le(f"max |FF{k}| on {label}", fs.max_abs(k), 1e-10)
    return c


def _fiber_e2t() -> NormalFormMetric:
    return NormalFormMetric(("t", "x", "y", "z"),
                            {(0, 0): "exp(2*t)", (1, 1): "exp(2*t)", (2, 2): "exp(2*t)"},
                            fiber_warp="exp(2*t)")


def c3_fiber_like() -> Criterion:
    c = Criterion(3, "fiber-like warp h = exp(2t) over flat gbar")
    m = _fiber_e2t()
    pts = sample_grid([(-1, 1)] * 3, 2, 0.2)
    fs = fundamental_forms(m, 5, pts)
    gb = [m.metric.values(m.ambient_point(x))[1:, 1:] for x in pts]
    c.le("max |FF2 - gbar|", _max(np.max(np.abs(f - g)) for f, g in zip(fs.forms[2], gb)), 1e-9)
    c.le("max |FF3 - gbar|", _max(np.max(np.abs(f - g)) for f, g in zip(fs.forms[3], gb)), 1e-9)
    rep = check_fiber_like(m, "exp(2*t)", 5, pts)
    c.le("check_fiber_like worst residual", _max(rep.residuals.values()), rep.tol,
         note=f"verdict {rep.verdict}")
    ref = fiber_reference(m, "exp(2*t)")
    rep2 = check_fiber_like(ref, "exp(2*t)", 5, pts)
    c.le("reflexive check on synthesized reference", _max(rep2.residuals.values()), rep2.tol,
         note=f"verdict {rep2.verdict}")
    return c


def c4_base_like() -> Criterion:
    c = Criterion(4, "base-like warp f = exp(x^2) and the f = x product case")
    m = base_like_normal_form(("t", "x", "y"), "exp(x^2)", {(0, 0): 1, (1, 1): 1})
    xs = [-0.6, -0.3, 0.1, 0.4, 0.7]
    pts = [(x, 0.2) for x in xs]
    fs = fundamental_forms(m, 6, pts)
    c.le("max |FF4|", fs.max_abs(4), 1e-9)
    c.le("max |FF6|", fs.max_abs(6), 1e-9)
    c.le("max |III_xx - (2 + 4x^2)| at five x",
         _max(abs(III[0, 0] - (2 + 4 * x * x)) for III, x in zip(fs.forms[3], xs)), 1e-9)
    direct, flipped, closed = [], [], []
    for (x, _), V in zip(pts, fs.forms[5]):
        O = o1f_fifth_form(m, (x, 0.2)).entries
        direct.append(float(np.max(np.abs(V - O))))
        flipped.append(float(np.max(np.abs(V + O))))
        closed.append(abs(O[0, 0] + 16 * x * x))
    c.le("O1 formula reproduces -16x^2 (internal consistency)", _max(closed), 1e-8)
    c.le("max |FF5 - O1 formula|", _max(direct), 1e-8,
         note=f"with reversed sign the agreement is {_max(flipped):.3g}")
    c.notes.append(
        "FF5 from its definition is +16x^2 on the xx slot; the first-order operator as "
        f"printed gives -16x^2. Reversed-sign agreement {_max(flipped):.3g}."
    )
    rep = check_base_like(m, "exp(x^2)", 6, pts)
    c.le("classifier stage residuals (base-like verdict)", _max(rep.residuals.values()), rep.tol,
         note=f"verdict {rep.verdict}")
    lin = base_like_normal_form(("t", "x", "y"), "x", {(0, 0): 1, (1, 1): 1})
    lpts = [(x, 0.2) for x in (0.4, 0.8, 1.2)]
    lf = fundamental_forms(lin, 7, lpts)
    c.le("f = x: max over k of |FFk|", _max(lf.max_abs(k) for k in lf.orders), 1e-10)
    lrep = check_base_like(lin, "x", 7, lpts)
    c.le("f = x: product sub-verdict", 0.0 if lrep.sub_verdict == "product" else 1.0, 0.0,
         note=f"sub_verdict {lrep.sub_verdict}")
    return c


def c5_weight_law() -> Criterion:
    c = Criterion(5, "conformal weights under Omega = exp(x)")
    m = _generic_chart()
    for x in [(0.1, 0.2, 0.3), (-0.2, 0.4, 0.1)]:
        c.le(f"|IIo(Omega^2 g) - Omega IIo(g)| at {x}", weight_residual(m, 2, "exp(x)", x), 1e-8)
        c.le(f"|IIIo(Omega^2 g) - IIIo(g)| at {x}", weight_residual(m, 3, "exp(x)", x), 1e-8)
    return c


def c6_schouten_relation() -> Criterion:
    c = Criterion(6, "third conformal form of products: half the trace-free base Schouten")
    m = _product(_s2s1())
    pts = sample_grid(_S3_BOX, 2, 0.1)
    half, frame = [], []
    expect = np.diag([1 / 3, 1 / 3, -2 / 3])
    for x in pts:
        III = third_conformal_ff(m, x).entries
        P = intrinsic_schouten_tf(m, x)
        half.append(float(np.max(np.abs(III - 0.5 * P))))
        scale = 1.0 / np.sqrt(np.diag(m.metric.values(m.ambient_point(x))[1:, 1:]))
        frame.append(float(np.max(np.abs(P * np.outer(scale, scale) - expect))))
    c.le("max |IIIo - Po_bar / 2| on R x (S^2 x S^1)", _max(half), 1e-8)
    c.le("max |Po_bar - diag(1/3, 1/3, -2/3)| orthonormal frame", _max(frame), 1e-8)
    s3 = _product(_s3())
    c.le("max |IIIo| on R x S^3",
         _max(np.max(np.abs(third_conformal_ff(s3, x).entries)) for x in pts), 1e-10)
    return c


def _rational_check(c: Criterion, label, coeff, coords, pts, want: Fraction):
    got = recognize_rational(coeff, coords, pts)
    c.le(f"{label} = {want}", 0.0 if got == want else 1.0, 0.0, note=f"recognized {got}")


def _series_vs_closed(c: Criterion, label, base, d, sigma, Sc, upto):
    cf = closed_form_sigma(Sc, d).series(upto)
    rng = random.Random(7)
    worst = 0.0
    for _ in range(4):
        p = [rng.uniform(0.5, 1.3) for _ in base.coords]
        b = dict(zip(base.coords, p))
        for j in range(upto + 1):
            worst = max(worst, abs(ex.evaluate(sigma.coeff(j), b) - ex.evaluate(cf.coeff(j), b)))
    c.le(f"{label}: series vs closed form through s^{upto}", worst, 1e-10)


def c7_yamabe_closed_forms() -> Criterion:
    c = Criterion(7, "singular Yamabe recursion against sin / sinh closed forms")
    s3, s5, h3 = _s3(), _s5(), _h3()
    p3 = [(1.0, 0.7, 0.3), (1.2, 1.1, 0.6)]
    p5 = [(1.0, 0.7, 1.2, 0.9, 0.3), (1.2, 1.1, 0.6, 1.4, 0.2)]
    sig, _ = solve_series(s3, 4)
    _rational_check(c, "S^3 phi_3", sig.coeff(3), s3.coords, p3, Fraction(1, 6))
    _series_vs_closed(c, "S^3", s3, 4, sig, 6, 3)
    sig5, _ = solve_series(s5, 6)
    _rational_check(c, "S^5 phi_3", sig5.coeff(3), s5.coords, p5, Fraction(1, 6))
    _rational_check(c, "S^5 phi_5", sig5.coeff(5), s5.coords, p5, Fraction(1, 120))
    _series_vs_closed(c, "S^5", s5, 6, sig5, 20, 5)
    sigh, _ = solve_series(h3, 4)
    _rational_check(c, "H^3 phi_3", sigh.coeff(3), h3.coords, p3, Fraction(-1, 6))
    _series_vs_closed(c, "H^3", h3, 4, sigh, -6, 3)
    return c


def _stencil_second(fn, x, h=1e-2):
    w2 = [(-3, 1 / 90), (-2, -3 / 20), (-1, 3 / 2), (0, -49 / 18), (1, 3 / 2), (2, -3 / 20), (3, 1 / 90)]
    w1 = [(-3, -1 / 60), (-2, 3 / 20), (-1, -3 / 4), (1, 3 / 4), (2, -3 / 20), (3, 1 / 60)]
    vals = {k: fn(x + k * h) for k in range(-3, 4)}
    return (sum(w * vals[k] for k, w in w1) / h, sum(w * vals[k] for k, w in w2) / h**2)


def c8_willmore() -> Criterion:
    c = Criterion(8, "Willmore obstruction: d = 4 formula and odd d = 5 without obstruction")
    g3 = _conf_flat(3)
    _, psi4 = solve_series(g3, 4)
    d = 4

    # independent route: scalar curvature from the jet pipeline, Laplacian by
    # finite differences along x using the conformally flat form of Delta
    def J(x):
        return curvature_stack(g3, (x, 0.0, 0.0), bach=False).scalar / (2 * (d - 1))

    worst = 0.0
    for x in (-1.0, -0.4, 0.2, 0.7, 1.3):
        w1 = 0.1 * np.cos(x) / (1 + 0.1 * np.sin(x))
        Jp, Jpp = _stencil_second(J, x)
        lap = (Jpp + w1 * Jp) / (1 + 0.1 * np.sin(x)) ** 2
        got = ex.evaluate(psi4, {"x": x, "y": 0.0, "z": 0.0})
        worst = max(worst, abs(got - (-lap / 12)))
    c.le("max |psi_4 - (-Delta J / 12)| at five points", worst, 1e-8)
    g4 = _conf_flat(4)
    sigma, psi, residual = solve_series_full(g4, 5, 9)
    nonzero = [j for j in range(residual.order + 1) if not residual.coeff(j).is_zero]
    c.le("d = 5: solver order reached", 0.0 if sigma.order >= 9 else 1.0, 0.0,
         note=f"order {sigma.order}")
    c.le("d = 5: residual coefficients not structurally zero", len(nonzero), 0,
         note=f"nonzero at {nonzero}")
    c.le("d = 5: no obstruction reported", 0.0 if psi is None else 1.0, 0.0)
    return c


def c9_poincare_einstein() -> Criterion:
    c = Criterion(9, "Poincare-Einstein trace-free Hessian residual")
    s3 = _s3()
    for s in (0.1, 0.3):
        r = pe_residual(s3, "sinh(t)", (s, 1.0, 0.7, 0.2))
        c.le(f"S^3 fiber, sigma = sinh s, s = {s}", r.max_abs, 1e-9)
    flat = MetricField(("x", "y", "z"), {(0, 0): 1, (1, 1): 1, (2, 2): 1})
    c.le("flat fiber, sigma = s", pe_residual(flat, "t", (0.1, 0.2, 0.3, 0.4)).max_abs, 0.0)
    base = _s2s1()
    sig, _ = solve_series(base, 4)
    r = pe_residual(base, sig, (0.1, 1.0, 0.3, 0.2))
    c.ge("S^2 x S^1 fiber (not Einstein), s = 0.1", r.max_abs, 1e-3)
    return c


def c10_jacobi() -> Criterion:
    c = Criterion(10, "Jacobi-like operator annihilates tau = 1 on products")
    pts = sample_grid(_S3_BOX, 2, 0.1)
    for label, base in (("R x S^3", _s3()), ("R x (S^2 x S^1)", _s2s1()),
                        ("R x conformally flat", _conf_flat(3))):
        m = _product(base)
        c.le(f"max |J(1)| on {label}", _max(jacobi_operator(m, "1", x).max_abs() for x in pts), 1e-10)
    return c


def c11_transverse_order() -> Criterion:
    c = Criterion(11, "transverse order: t^3 perturbation first seen at order 4")
    flat = NormalFormMetric(("t", "x", "y", "z"), {(0, 0): 1, (1, 1): 1, (2, 2): 1})
    pts = [(0.0, 0.1, 0.2), (0.5, -0.3, 0.1), (-0.7, 0.2, 0.0)]
    ch = transverse_order_probe(flat, 3, pts, eps=1e-6, bump="exp(-(x^2))")
    c.le("change in FF2", ch[2], 1e-11)
    c.le("change in FF3", ch[3], 1e-11)
    c.ge("change in FF4", ch[4], 1e-7)
    return c


CRITERIA: dict[int, Callable[[], Criterion]] = {
    1: c1_curvature_oracle,
    2: c2_product_vanishing,
    3: c3_fiber_like,
    4: c4_base_like,
    5: c5_weight_law,
    6: c6_schouten_relation,
    7: c7_yamabe_closed_forms,
    8: c8_willmore,
    9: c9_poincare_einstein,
    10: c10_jacobi,
    11: c11_transverse_order,
}


def run_one(n: int) -> Criterion:
    t0 = time.perf_counter()
    try:
        crit = CRITERIA[n]()
    except Exception as err:  # reported as a failure, never swallowed silently
        crit = Criterion(n, CRITERIA[n].__name__)
        crit.checks.append(Check("raised", float("nan"), 0.0, note=f"{type(err).__name__}: {err}"))
    crit.seconds = time.perf_counter() - t0
    return crit


def format_line(c: Criterion) -> str:
    status = "PASS" if c.passed else "FAIL"
    line = f"[{status}] {c.number:2d}. {c.title} ({c.seconds:.1f}s)"
    bad = c.failing()
    if bad:
        parts = [f"{b.name}: {b.value:.3g} {'>' if b.kind == 'le' else '<'} {b.bound:g}" for b in bad]
        line += " -- " + "; ".join(parts)
    return line


def run_all(numbers=None, echo: Callable[[str], None] | None = None) -> list[Criterion]:
    out = []
    for n in numbers or sorted(CRITERIA):
        crit = run_one(n)
        if echo:
            echo(format_line(crit))
        out.append(crit)
    return out
