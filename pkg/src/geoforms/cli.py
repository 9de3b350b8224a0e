"""Command-line front end: ``geoforms <command> [spec] [flags]``.

Exit codes: 0 success, 1 failed classification or verification,
2 input syntax error, 3 semantic input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as ex
from .classify import DEFAULT_TOL, check_base_like, check_fiber_like, check_product
from .geometry import SingularMetricError, curvature_stack, fd_check
from .hypersurface import K_MAX, ChartError, fundamental_forms
from .specfile import MetricSpec, SpecError, read_spec

COMMANDS = ("curvature", "forms", "classify", "yamabe", "conformal-check", "selftest")
TOP_KEYS = ("command", "spec-echo", "conventions", "results", "residual-summary", "verdict")


# ------------------------------------------------------------------ output

def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if hasattr(v, "entries"):
        return _plain(np.asarray(v.entries, dtype=float))
    return v


def render(obj, indent: int = 0) -> str:
    """JSON with sorted keys and floats fixed at 15 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {render(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list)) for x in obj):
            return "[" + ", ".join(render(x) for x in obj) + "]"
        return "[\n" + ",\n".join(inner + render(x, indent + 1) for x in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        text = "%.15g" % obj
        return "0" if text == "-0" else text
    return json.dumps(str(obj))


def _report(command: str, spec: MetricSpec | None, results: dict, residuals: dict, verdict: str) -> dict:
    from .conventions import banner

    return {
        "command": command,
        "spec-echo": spec.echo if spec is not None else {},
        "conventions": banner(),
        "results": _plain(results),
        "residual-summary": _plain(residuals),
        "verdict": verdict,
    }


# --------------------------------------------------------------- commands

def _points(spec: MetricSpec, raw: str | None) -> list[tuple[float, ...]]:
    if raw is None:
        return spec.points()
    raw = raw.strip()
    if raw.isdigit():
        spec.grid_counts = int(raw)
        return spec.points()
    pts = []
    for chunk in raw.split(";"):
        if not chunk.strip():
            continue
        try:
            p = tuple(float(v) for v in chunk.split(","))
        except ValueError:
            raise SpecError(2, f"--points: cannot read {chunk!r}") from None
        if len(p) != spec.dim - 1:
            raise SpecError(3, f"--points: {chunk!r} needs {spec.dim - 1} coordinates")
        pts.append(p)
    if not pts:
        raise SpecError(2, "--points is empty")
    return pts


def _label(p) -> str:
    return "(" + ", ".join("%.15g" % v for v in p) + ")"


def cmd_curvature(spec, args):
    m = spec.chart()
    pts = _points(spec, args.points)
    per_point, worst_fd = {}, 0.0
    for x in pts:
        p = m.ambient_point(x)
        st = curvature_stack(m.metric, p, bach=spec.dim >= 4)
        dev = fd_check(m.metric, "all", p)
        worst_fd = max(worst_fd, dev)
        entry = {
            "scalar": st.scalar, "J": st.J, "ricci": st.ricci, "schouten": st.schouten,
            "weyl_max_abs": float(np.max(np.abs(st.weyl.entries))),
            "cotton_max_abs": float(np.max(np.abs(st.cotton.entries))),
            "fd_deviation": dev,
        }
        if st.bach is not None:
            entry["bach"] = st.bach
        per_point[_label(p)] = entry
    ok = worst_fd <= 1e-6
    return {"points": per_point}, {"fd_deviation": worst_fd}, ("verified" if ok else "fd-mismatch"), ok


def cmd_forms(spec, args):
    m = spec.chart()
    pts = _points(spec, args.points)
    K = args.max_order
    fs = fundamental_forms(m, K, pts)
    per_point = {}
    for i, x in enumerate(pts):
        per_point[_label(x)] = {f"FF{k}": fs.forms[k][i] for k in fs.orders}
    maxima = {f"FF{k}_max_abs": fs.max_abs(k) for k in fs.orders}
    return {"max_order": K, "points": per_point, "provenance": fs.provenance}, maxima, "computed", True


def cmd_classify(spec, args):
    m = spec.chart()
    pts = _points(spec, args.points)
    K, tol = args.max_order, args.tol
    results, residuals = {}, {}
    if spec.kind == "base_like":
        rep = check_base_like(m, spec.f, K, pts, tol)
        key = "base_like"
    elif spec.h is not None:
        rep = check_fiber_like(m, spec.h, K, pts, tol)
        key = "fiber_like"
    else:
        rep = check_product(m, K, pts, tol)
        key = "product"
    results[key] = rep.to_dict()
    residuals.update({f"{key}_order_{k}": v for k, v in rep.residuals.items()})
    verdict = rep.verdict if rep.sub_verdict is None else f"{rep.verdict} ({rep.sub_verdict})"
    return results, residuals, verdict, rep.passed


def _coeff_report(e: ex.Expr, coords, pts):
    from .yamabe import recognize_rational

    q = recognize_rational(e, coords, pts)
    if q is not None:
        return str(q)
    return {_label(p): ex.evaluate(e, dict(zip(coords, p))) for p in pts}


def cmd_yamabe(spec, args):
    from .yamabe import default_order, solve_series_full, willmore_formula

    d = spec.dim
    base = spec.sigma_metric()
    pts = _points(spec, args.points)
    order = default_order(d) if args.max_order is None or args.max_order_default else args.max_order
    sigma, psi, residual = solve_series_full(base, d, order)
    coeffs = {}
    for j in range(3, sigma.order + 1, 2):
        c = sigma.coeff(j)
        if d % 2 == 0 and j >= d:
            break
        coeffs[f"phi_{j}"] = _coeff_report(c, base.coords, pts)
    results = {"d": d, "order": sigma.order, "coefficients": coeffs}
    residuals = {}
    ok = True
    top = d - 1 if d % 2 == 0 else sigma.order
    struct = [j for j in range(top + 1) if not residual.coeff(j).is_zero]
    results["residual_nonzero_orders"] = struct
    if d % 2 == 0:
        results[f"psi_{d}"] = _coeff_report(psi, base.coords, pts)
        if d in (4, 6):
            ref = willmore_formula(base, d)
            gap = max(abs(ex.evaluate(psi, dict(zip(base.coords, p)))
                          - ex.evaluate(ref, dict(zip(base.coords, p)))) for p in pts)
            residuals["willmore_formula_gap"] = gap
            ok = gap <= max(args.tol, 1e-8)
    else:
        results["psi"] = "none (odd dimension)"
    residuals["structural_residual_orders"] = len(struct)
    ok = ok and not struct
    return results, residuals, ("solved" if ok else "inconsistent"), ok


def cmd_conformal(spec, args):
    from .conformal import (gauss_schouten_residual, is_product, jacobi_operator,
                            third_conformal_ff, trace_free_second_ff, weight_residual)

    m = spec.chart()
    pts = _points(spec, args.points)
    tol = args.tol
    omega = spec.omega if spec.omega is not None else ex.parse(f"exp({m.sigma_coords[0]}/2)")
    per_point, res = {}, {"weight_II": 0.0}
    d = spec.dim
    for x in pts:
        entry = {"IIo": trace_free_second_ff(m, x)}
        res["weight_II"] = max(res["weight_II"], weight_residual(m, 2, omega, x))
        if d >= 4:
            III = third_conformal_ff(m, x)
            entry["IIIo"] = III
            res["weight_III"] = max(res.get("weight_III", 0.0), weight_residual(m, 3, omega, x))
            res["gauss_schouten"] = max(res.get("gauss_schouten", 0.0),
                                        gauss_schouten_residual(m, x).max_abs())
            if "product_prediction" in III.extras:
                gap = float(np.max(np.abs(III.entries - III.extras["product_prediction"].astype(float))))
                res["product_schouten"] = max(res.get("product_schouten", 0.0), gap)
            if is_product(m):
                res["jacobi_tau_1"] = max(res.get("jacobi_tau_1", 0.0), jacobi_operator(m, "1", x).max_abs())
        per_point[_label(x)] = {k: v.entries for k, v in entry.items()}
    ok = all(v <= tol for v in res.values())
    results = {"omega": str(omega), "points": per_point, "weights": {"IIo": 1, "IIIo": 0}}
    if d < 4:
        results["note"] = "third conformal form and Jacobi operator need d >= 4"
    return results, res, ("consistent" if ok else "violated"), ok


def cmd_selftest(args, out):
    from .acceptance import format_line, run_all

    crits = run_all(echo=lambda s: print(s, file=out, flush=True))
    passed = sum(c.passed for c in crits)
    print(f"{passed}/{len(crits)} criteria passed", file=out)
    results = {str(c.number): c.to_dict() for c in crits}
    residuals = {str(c.number): max((k.value for k in c.checks if k.kind == "le"), default=0.0) for c in crits}
    ok = passed == len(crits)
    return results, residuals, ("all-passed" if ok else f"{len(crits) - passed}-failed"), ok


HANDLERS = {
    "curvature": cmd_curvature,
    "forms": cmd_forms,
    "classify": cmd_classify,
    "yamabe": cmd_yamabe,
    "conformal-check": cmd_conformal,
}


# ------------------------------------------------------------------ driver

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoforms", description="Hypersurface fundamental forms toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("spec", nargs="?", help="metric spec file (not used by selftest)")
    ap.add_argument("--max-order", type=int, default=None, help=f"highest form order K (2..{K_MAX})")
    ap.add_argument("--tol", type=float, default=DEFAULT_TOL)
    ap.add_argument("--points", default=None,
                    help="grid count per axis, or explicit points 'x1,x2;y1,y2'")
    ap.add_argument("--out", default=None, help="write the report here instead of stdout")
    return ap


class _ArgError(Exception):
    pass


def _parse(argv):
    ap = build_parser()
    ap.error = lambda msg: (_ for _ in ()).throw(_ArgError(msg))  # keep control of exit codes
    return ap.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parse(list(sys.argv[1:] if argv is None else argv))
    except _ArgError as err:
        print(f"geoforms: {err}", file=sys.stderr)
        return 2
    if args.tol <= 0:
        print("geoforms: --tol must be positive", file=sys.stderr)
        return 2
    args.max_order_default = args.max_order is None
    if args.max_order is None:
        args.max_order = 5
    if args.command != "yamabe" and not 2 <= args.max_order <= K_MAX:
        print(f"geoforms: --max-order must lie in 2..{K_MAX}", file=sys.stderr)
        return 3

    spec = None
    try:
        if args.command == "selftest":
            results, residuals, verdict, ok = cmd_selftest(args, sys.stdout if args.out else sys.stderr)
        else:
            if args.spec is None:
                print(f"geoforms: {args.command} needs a spec file", file=sys.stderr)
                return 2
            spec = read_spec(args.spec)
            results, residuals, verdict, ok = HANDLERS[args.command](spec, args)
    except SpecError as err:
        print(f"geoforms: {err}", file=sys.stderr)
        return err.code
    except (ChartError, SingularMetricError, ex.ExprDomainError, ValueError) as err:
        print(f"geoforms: {type(err).__name__}: {err}", file=sys.stderr)
        return 3

    text = render(_report(args.command, spec, results, residuals, verdict)) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
