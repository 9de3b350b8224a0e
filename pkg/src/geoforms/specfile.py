"""Metric spec files: a sectioned key-value text format.

    # comments start with '#' or ';'
    dim = 4
    coords = "t, x, y, z"          # first coordinate is transverse
    kind = "normal_form"           # or "base_like"
    omega = "exp(x)"               # optional conformal factor

    [gbar]                         # upper triangle over x-indices; omitted = 0
    xx = "exp(2*t)"                # pair keys: "xy", "x,y" or "x_y"

    [warp]
    h = "exp(2*t)"                 # fiber warp (optional)
    f = "exp(x^2)"                 # base warp (required for base_like)

    [grid]
    x = "-1, 1"                    # sample range per Sigma coordinate
    counts = 3
    margin = 0.1

Structure comes from :mod:`configparser` in strict mode, which already
rejects duplicate keys and sections with a line number.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import expr as ex
from .classify import sample_grid
from .hypersurface import ChartError, NormalFormMetric, _Chart, base_like_normal_form

__all__ = ["SpecError", "MetricSpec", "read_spec", "parse_spec"]

_TOP = "__top__"
_SECTIONS = {"gbar", "grid", "warp"}
_TOP_KEYS = {"dim", "coords", "kind", "omega"}
_WARP_KEYS = {"h", "f"}
_KINDS = ("normal_form", "base_like")


class SpecError(Exception):
    """Input error carrying the CLI exit code (2 syntax, 3 semantic)."""

    def __init__(self, code: int, message: str, line: int | None = None):
        self.code = code
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _syntax(msg, line=None):
    return SpecError(2, msg, line)


def _semantic(msg, line=None):
    return SpecError(3, msg, line)


@dataclass
class MetricSpec:
    dim: int
    coords: tuple[str, ...]
    kind: str
    gbar: dict[tuple[int, int], ex.Expr]
    h: ex.Expr | None = None
    f: ex.Expr | None = None
    omega: ex.Expr | None = None
    grid_ranges: list[tuple[float, float]] | None = None
    grid_counts: int | list[int] = 3
    grid_margin: float = 0.1
    source: str = "<string>"
    echo: dict = field(default_factory=dict)

    def chart(self) -> _Chart:
        if self.kind == "base_like":
            return base_like_normal_form(self.coords, self.f, self.gbar)
        return NormalFormMetric(self.coords, self.gbar, fiber_warp=self.h)

    def points(self) -> list[tuple[float, ...]]:
        n = self.dim - 1
        ranges = self.grid_ranges or [(-0.5, 0.5)] * n
        return sample_grid(ranges, self.grid_counts, self.grid_margin)

    def sigma_metric(self):
        return self.chart().sigma_metric()


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line, for diagnostics after parsing."""
    out, section = {}, _TOP
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            continue
        if "=" in s:
            out.setdefault((section, s.split("=", 1)[0].strip()), i)
    return out


_QUOTED = re.compile(r"""^(?:"([^"]*)"|'([^']*)')$""")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _unquote(raw: str, line: int | None) -> str:
    v = raw.strip()
    m = _QUOTED.match(v)
    if m:
        return m.group(1) if m.group(1) is not None else m.group(2)
    if v[:1] in "\"'" or v[-1:] in "\"'":
        raise _syntax(f"unbalanced quotes in {v!r}", line)
    return v


def _expression(raw: str, coords, line, *, allow_bare_number=True) -> ex.Expr:
    v = raw.strip()
    if not _QUOTED.match(v):
        if not (allow_bare_number and _NUMBER.match(v)):
            raise _syntax(f"expression values must be quoted strings, got {v!r}", line)
    text = _unquote(v, line)
    try:
        e = ex.parse(text)
    except ex.ExprSyntaxError as err:
        raise _syntax(f"bad expression {text!r}: {err}", line) from None
    stray = sorted(e.free - set(coords))
    if stray:
        raise _semantic(f"expression {text!r} uses undeclared coordinate(s) {', '.join(stray)}", line)
    return e


def _int(raw: str, what: str, line) -> int:
    v = _unquote(raw, line)
    try:
        return int(v)
    except ValueError:
        raise _syntax(f"{what} must be an integer, got {v!r}", line) from None


def _floats(raw: str, what: str, line) -> list[float]:
    v = _unquote(raw, line)
    try:
        return [float(p) for p in v.replace("[", "").replace("]", "").split(",") if p.strip()]
    except ValueError:
        raise _syntax(f"{what} must be a comma-separated list of numbers, got {v!r}", line) from None


def _pair(key: str, sigma: tuple[str, ...], transverse: str, line) -> tuple[int, int]:
    if "," in key or "_" in key:
        parts = [p.strip() for p in re.split(r"[,_]", key)]
        cands = [parts] if len(parts) == 2 else []
    else:
        cands = [[key[:i], key[i:]] for i in range(1, len(key))]
    for a, b in cands:
        if a in sigma and b in sigma:
            i, j = sigma.index(a), sigma.index(b)
            return (min(i, j), max(i, j))
    names = set(re.split(r"[,_]", key)) if cands and ("," in key or "_" in key) else set()
    if transverse in names:
        raise _semantic(f"gbar key {key!r} involves the transverse coordinate {transverse!r}", line)
    raise _semantic(f"gbar key {key!r} does not name a pair of hypersurface coordinates", line)


def parse_spec(text: str, source: str = "<string>") -> MetricSpec:
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        strict=True, interpolation=None, default_section="__defaults_unused__",
    )
    cp.optionxform = str
    try:
        cp.read_string(f"[{_TOP}]\n" + text, source=source)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as err:
        raise _syntax(str(err).split(": ", 1)[-1], (err.lineno or 1) - 1) from None
    except configparser.ParsingError as err:
        lines = [ln - 1 for ln, _ in err.errors] or [None]
        raise _syntax("malformed line (expected 'key = value' or '[section]')", lines[0]) from None
    except configparser.Error as err:
        raise _syntax(str(err)) from None

    where = _line_index(text)
    extra = set(cp.sections()) - _SECTIONS - {_TOP}
    if extra:
        raise _syntax(f"unknown section(s) {sorted(extra)}")

    top = cp[_TOP]
    for k in top:
        if k not in _TOP_KEYS:
            raise _semantic(f"unknown top-level key {k!r}", where.get((_TOP, k)))
    for k in ("dim", "coords"):
        if k not in top:
            raise _semantic(f"missing required key {k!r}")

    dim = _int(top["dim"], "dim", where.get((_TOP, "dim")))
    if dim < 3:
        raise _semantic(f"dim must be >= 3, got {dim}", where.get((_TOP, "dim")))
    cline = where.get((_TOP, "coords"))
    coords = tuple(c.strip() for c in _unquote(top["coords"], cline).split(",") if c.strip())
    for c in coords:
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", c):
            raise _syntax(f"bad coordinate name {c!r}", cline)
    if len(set(coords)) != len(coords):
        raise _semantic("coordinate names must be distinct", cline)
    if len(coords) != dim:
        raise _semantic(f"dim = {dim} but {len(coords)} coordinates declared", cline)

    kind = _unquote(top.get("kind", "normal_form"), where.get((_TOP, "kind")))
    if kind not in _KINDS:
        raise _semantic(f"kind must be one of {_KINDS}, got {kind!r}", where.get((_TOP, "kind")))

    transverse, sigma = coords[0], coords[1:]
    gbar: dict[tuple[int, int], ex.Expr] = {}
    echo_g = {}
    if cp.has_section("gbar"):
        for key, raw in cp["gbar"].items():
            line = where.get(("gbar", key))
            ij = _pair(key, sigma, transverse, line)
            if ij in gbar:
                raise _semantic(f"gbar entry {key!r} duplicates an earlier entry by symmetry", line)
            e = _expression(raw, coords, line)
            if kind == "base_like" and transverse in e.free:
                raise _semantic(f"base_like forbids {transverse}-dependence in gbar ({key})", line)
            gbar[ij] = e
            echo_g[f"{sigma[ij[0]]}{sigma[ij[1]]}"] = _unquote(raw, line)

    h = f = None
    if cp.has_section("warp"):
        for k in cp["warp"]:
            if k not in _WARP_KEYS:
                raise _semantic(f"unknown warp key {k!r}", where.get(("warp", k)))
        if "h" in cp["warp"]:
            h = _expression(cp["warp"]["h"], coords, where.get(("warp", "h")))
            if h.free - {transverse}:
                raise _semantic("fiber warp h may depend only on the transverse coordinate",
                                where.get(("warp", "h")))
        if "f" in cp["warp"]:
            f = _expression(cp["warp"]["f"], coords, where.get(("warp", "f")))
            if transverse in f.free:
                raise _semantic("base warp f must not depend on the transverse coordinate",
                                where.get(("warp", "f")))
    if kind == "base_like" and f is None:
        raise _semantic("kind = base_like requires a base warp f in [warp]")
    omega = None
    if "omega" in top:
        omega = _expression(top["omega"], coords, where.get((_TOP, "omega")))

    ranges, counts, margin = None, 3, 0.1
    if cp.has_section("grid"):
        g = cp["grid"]
        for k in g:
            if k not in set(sigma) | {"counts", "margin"}:
                raise _semantic(f"grid key {k!r} is neither a hypersurface coordinate nor counts/margin",
                                where.get(("grid", k)))
        ranges = []
        for c in sigma:
            if c in g:
                line = where.get(("grid", c))
                r = _floats(g[c], f"grid range for {c}", line)
                if len(r) != 2 or not r[0] < r[1]:
                    raise _semantic(f"grid range for {c} must be 'lo, hi' with lo < hi", line)
                ranges.append((r[0], r[1]))
            else:
                ranges.append((-0.5, 0.5))
        if "counts" in g:
            line = where.get(("grid", "counts"))
            vals = _floats(g["counts"], "counts", line)
            if any(v != int(v) or v < 1 for v in vals) or len(vals) not in (1, len(sigma)):
                raise _semantic("counts must be one positive integer or one per coordinate", line)
            counts = int(vals[0]) if len(vals) == 1 else [int(v) for v in vals]
        if "margin" in g:
            line = where.get(("grid", "margin"))
            vals = _floats(g["margin"], "margin", line)
            if len(vals) != 1 or vals[0] < 0:
                raise _semantic("margin must be one non-negative number", line)
            margin = vals[0]

    echo = {"dim": dim, "coords": list(coords), "kind": kind, "gbar": echo_g}
    if h is not None:
        echo["h"] = str(h)
    if f is not None:
        echo["f"] = str(f)
    if omega is not None:
        echo["omega"] = str(omega)
    echo["grid"] = {
        "ranges": [list(r) for r in (ranges or [(-0.5, 0.5)] * len(sigma))],
        "counts": counts,
        "margin": margin,
    }
    spec = MetricSpec(dim, coords, kind, gbar, h, f, omega, ranges, counts, margin, source, echo)
    try:
        spec.points()
        spec.chart()
    except (ValueError, ChartError) as err:
        raise _semantic(str(err)) from None
    return spec


def read_spec(path) -> MetricSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as err:
        raise SpecError(2, f"cannot read spec file: {err}") from None
    return parse_spec(text, str(p))
