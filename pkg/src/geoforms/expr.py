"""Scalar expression DSL: parsing, exact differentiation and evaluation.

Expressions are immutable, hash-consed trees: building the same structure
twice returns the same node object, so derivative and evaluation caches can
be keyed by identity and repeated high-order differentiation stays a DAG.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' factor)?          # right associative
    base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' factor

Unary minus applies to a whole power, so ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Expr",
    "ExprSyntaxError",
    "ExprDomainError",
    "ExprBudgetError",
    "FUNCTIONS",
    "const",
    "var",
    "func",
    "add",
    "sub",
    "mul",
    "div",
    "power",
    "neg",
    "parse",
    "differentiate",
    "diff_multi",
    "evaluate",
    "Evaluator",
    "substitute",
    "dag_size",
    "ZERO",
    "ONE",
]

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt")

DEFAULT_NODE_BUDGET = 10**6
_SIZE_CAP = 1 << 62


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class ExprDomainError(ArithmeticError):
    def __init__(self, message: str, node: "Expr"):
        super().__init__(f"{message}: {node}")
        self.node = node


class ExprBudgetError(RuntimeError):
    pass


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


class Expr:
    """A node of the expression DAG. Build through the module constructors."""

    __slots__ = ("kind", "op", "args", "value", "free", "tsize", "_dcache", "_key")

    kind: str  # "const" | "var" | "func" | "binop"

    def __repr__(self) -> str:
        return f"Expr({self})"

    def __str__(self) -> str:
        return to_string(self)

    # structural equality is identity thanks to interning
    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return id(self)

    @property
    def is_zero(self) -> bool:
        return self.kind == "const" and self.value == 0

    @property
    def is_one(self) -> bool:
        return self.kind == "const" and self.value == 1

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    # operator sugar, used heavily by the geometry and series code
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)


# Interned nodes are never evicted, so child ids in keys stay unique and
# keys hash in constant time regardless of tree depth.
_TABLE: dict = {}


def _intern(key, kind, op, args, value, free):
    node = _TABLE.get(key)
    if node is not None:
        return node
    node = object.__new__(Expr)
    node.kind = kind
    node.op = op
    node.args = args
    node.value = value
    node.free = free
    node.tsize = min(_SIZE_CAP, 1 + sum(a.tsize for a in args))
    node._dcache = None
    node._key = key
    _TABLE[key] = node
    return node


_EMPTY: frozenset = frozenset()


def _norm_number(v):
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {v!r}")
        return v
    raise TypeError(f"cannot make a constant from {type(v).__name__}")


def const(v) -> Expr:
    v = _norm_number(v)
    tag = "q" if isinstance(v, Fraction) else "f"
    if tag == "f" and v == 0.0:
        v = 0.0  # collapse -0.0
    return _intern(("c", tag, v), "const", None, (), v, _EMPTY)


def _lift(x) -> Expr:
    return x if isinstance(x, Expr) else const(x)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)


def var(name: str) -> Expr:
    return _intern(("v", name), "var", name, (), None, frozenset((name,)))


def _binop(op: str, a: Expr, b: Expr) -> Expr:
    return _intern(("b", op, id(a), id(b)), "binop", op, (a, b), None, a.free | b.free)


def _cfold(op, x, y):
    rational = isinstance(x, Fraction) and isinstance(y, Fraction)
    if not rational:
        x, y = float(x), float(y)
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        return x / y
    raise AssertionError(op)


def _split_coeff(e: Expr):
    if e.kind == "binop" and e.op == "*" and e.args[0].is_const:
        return e.args[0].value, e.args[1]
    return Fraction(1), e


def _like_terms(op: str, a: Expr, b: Expr):
    """c1*X +/- c2*X -> (c1 +/- c2)*X; the only non-literal fold."""
    if a.is_const or b.is_const:
        return None
    ca, xa = _split_coeff(a)
    cb, xb = _split_coeff(b)
    if xa is not xb:
        return None
    return mul(const(_cfold(op, ca, cb)), xa)


def add(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.is_const and b.is_const:
        return const(_cfold("+", a.value, b.value))
    like = _like_terms("+", a, b)
    if like is not None:
        return like
    return _binop("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    if b.is_zero:
        return a
    if a.is_const and b.is_const:
        return const(_cfold("-", a.value, b.value))
    if a.is_zero:
        return neg(b)
    if a is b:
        return ZERO
    like = _like_terms("-", a, b)
    if like is not None:
        return like
    return _binop("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    if a.is_zero or b.is_zero:
        return ZERO
    if a.is_one:
        return b
    if b.is_one:
        return a
    if a.is_const and b.is_const:
        return const(_cfold("*", a.value, b.value))
    if b.is_const and not a.is_const:
        a, b = b, a
    if a.is_const and b.kind == "binop" and b.op == "*" and b.args[0].is_const:
        return mul(const(_cfold("*", a.value, b.args[0].value)), b.args[1])
    return _binop("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    if b.is_zero:
        raise ZeroDivisionError("division by the zero constant")
    if a.is_zero:
        return ZERO
    if b.is_one:
        return a
    if a.is_const and b.is_const:
        return const(_cfold("/", a.value, b.value))
    return _binop("/", a, b)


def neg(a: Expr) -> Expr:
    a = _lift(a)
    if a.is_const:
        return const(-a.value)
    return mul(MINUS_ONE, a)


def power(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    if b.is_zero:
        return ONE
    if b.is_one:
        return a
    if a.is_zero and b.is_const and b.value > 0:
        return ZERO
    if a.is_one:
        return ONE
    if (
        a.is_const
        and b.is_const
        and isinstance(a.value, Fraction)
        and isinstance(b.value, Fraction)
        and b.value.denominator == 1
        and not (a.value == 0 and b.value < 0)
    ):
        return const(a.value ** int(b.value))
    return _binop("^", a, b)


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if a.is_zero and name in ("sin", "tan", "sinh", "tanh", "sqrt"):
        return ZERO
    if a.is_zero and name in ("cos", "cosh", "exp"):
        return ONE
    return _intern(("f", name, id(a)), "func", name, (a,), None, a.free)


# ---------------------------------------------------------------- printing


def _fmt_const(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
            return f"({s})" if v < 0 else s
        return f"({v.numerator}/{v.denominator})"
    s = repr(float(v))
    if "e" not in s and "." not in s:
        s += ".0"
    return f"({s})" if v < 0 else s


def _prec(node: Expr) -> int:
    return _PREC[node.op] if node.kind == "binop" else 4


def to_string(node: Expr) -> str:
    """Render an expression so that `parse` rebuilds the identical node."""
    memo: dict[int, str] = {}
    stack = [node]
    while stack:
        n = stack[-1]
        if id(n) in memo:
            stack.pop()
            continue
        pending = [a for a in n.args if id(a) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        if n.kind == "const":
            s = _fmt_const(n.value)
        elif n.kind == "var":
            s = n.op
        elif n.kind == "func":
            s = f"{n.op}({memo[id(n.args[0])]})"
        else:
            a, b = n.args
            p = _PREC[n.op]
            sa, sb = memo[id(a)], memo[id(b)]
            if n.op == "^":
                if _prec(a) <= p:
                    sa = f"({sa})"
                if _prec(b) < p:
                    sb = f"({sb})"
                s = f"{sa}^{sb}"
            else:
                if _prec(a) < p:
                    sa = f"({sa})"
                if _prec(b) <= p:
                    sb = f"({sb})"
                s = f"{sa} {n.op} {sb}"
        memo[id(n)] = s
    return memo[id(node)]


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            j = pos
            while j < n and src[j].isspace():
                j += 1
            raise ExprSyntaxError(f"unexpected character {src[j]!r}", j, src)
        kind = m.lastgroup
        text = m.group(kind)
        out.append((kind, text, m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, variables: Iterable[str] | None):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = None if variables is None else set(variables)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        kind, t, off = self.take()
        if t != text or kind != "op":
            what = "end of input" if kind == "end" else repr(t)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", off, self.src)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, off = self.take()
            rhs = self.factor()
            if op == "*":
                node = mul(node, rhs)
            else:
                if rhs.is_zero:
                    raise ExprSyntaxError("division by literal zero", off, self.src)
                node = div(node, rhs)
        return node

    def factor(self):
        node = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            node = power(node, self.factor())
        return node

    def base(self):
        kind, text, off = self.take()
        if kind == "num":
            # decimal literals are exact rationals, so 0.1 means 1/10
            return const(Fraction(text))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", off, self.src)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", off, self.src)
            if self.variables is not None and text not in self.variables:
                raise ExprSyntaxError(f"undeclared variable {text!r}", off, self.src)
            return var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and text == "-":
            return neg(self.factor())
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", off, self.src)


def parse(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse DSL text into an expression.

    If `variables` is given, identifiers outside it are rejected.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source or "")
    p = _Parser(source, variables)
    node = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"trailing input {text!r}", off, source)
    return node


# ---------------------------------------------------------- differentiation


def _d_node(n: Expr, v: str, d) -> Expr:
    """Derivative of one node given derivatives `d` of its children."""
    if n.kind == "binop":
        a, b = n.args
        da, db = d[0], d[1]
        op = n.op
        if op == "+":
            return add(da, db)
        if op == "-":
            return sub(da, db)
        if op == "*":
            return add(mul(da, b), mul(a, db))
        if op == "/":
            if db.is_zero:
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, const(2)))
        # power
        if b.is_const:
            return mul(mul(b, power(a, const(_cfold("-", b.value, Fraction(1))))), da)
        return mul(n, add(mul(db, func("log", a)), div(mul(b, da), a)))
    a = n.args[0]
    da = d[0]
    f = n.op
    if f == "sin":
        g = func("cos", a)
    elif f == "cos":
        g = neg(func("sin", a))
    elif f == "tan":
        g = div(ONE, power(func("cos", a), const(2)))
    elif f == "sinh":
        g = func("cosh", a)
    elif f == "cosh":
        g = func("sinh", a)
    elif f == "tanh":
        g = sub(ONE, power(n, const(2)))
    elif f == "exp":
        g = n
    elif f == "log":
        return div(da, a)
    elif f == "sqrt":
        return div(da, mul(const(2), n))
    else:  # pragma: no cover
        raise AssertionError(f)
    return mul(g, da)


def _diff(e: Expr, v: str) -> Expr:
    stack = [e]
    while stack:
        n = stack[-1]
        if v not in n.free:
            stack.pop()
            continue
        cache = n._dcache
        if cache is not None and v in cache:
            stack.pop()
            continue
        if n.kind == "var":
            res = ONE
        else:
            pending = [
                a for a in n.args
                if v in a.free and not (a._dcache is not None and v in a._dcache)
            ]
            if pending:
                stack.extend(pending)
                continue
            d = [(a._dcache[v] if v in a.free else ZERO) for a in n.args]
            res = _d_node(n, v, d)
        if n._dcache is None:
            n._dcache = {}
        n._dcache[v] = res
        stack.pop()
    if v not in e.free:
        return ZERO
    return e._dcache[v]


def dag_size(e: Expr) -> int:
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        stack.extend(n.args)
    return len(seen)


def differentiate(e: Expr, v: str, budget: int | None = DEFAULT_NODE_BUDGET) -> Expr:
    """Exact symbolic derivative of `e` with respect to variable `v`."""
    out = _diff(e, v)
    if budget is not None and out.tsize > budget and dag_size(out) > budget:
        raise ExprBudgetError(
            f"derivative exceeds the node budget of {budget} nodes"
        )
    return out


def diff_multi(e: Expr, variables: Iterable[str], budget: int | None = DEFAULT_NODE_BUDGET) -> Expr:
    for v in variables:
        e = differentiate(e, v, budget)
    return e


# -------------------------------------------------------------- evaluation

_MATH = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "exp": math.exp,
}
_NP = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
}


class Evaluator:
    """Evaluates many expressions at one binding, sharing subexpression values.

    Bindings may be floats or equally shaped numpy arrays (vectorized sweep).
    """

    def __init__(self, bindings: Mapping[str, float]):
        vec = any(isinstance(v, np.ndarray) for v in bindings.values())
        self.vectorized = vec
        if vec:
            self.bindings = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
        else:
            self.bindings = {k: float(v) for k, v in bindings.items()}
        self._memo: dict[int, object] = {}

    def __call__(self, e: Expr):
        memo = self._memo
        hit = memo.get(id(e))
        if hit is not None:
            return hit
        stack = [e]
        while stack:
            n = stack[-1]
            if id(n) in memo:
                stack.pop()
                continue
            pending = [a for a in n.args if id(a) not in memo]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            memo[id(n)] = self._apply(n, [memo[id(a)] for a in n.args])
        return memo[id(e)]

    def _bad(self, mask) -> bool:
        return bool(np.any(mask)) if self.vectorized else bool(mask)

    def _apply(self, n: Expr, vals):
        if n.kind == "const":
            return float(n.value)
        if n.kind == "var":
            try:
                return self.bindings[n.op]
            except KeyError:
                raise ExprDomainError(f"unbound variable {n.op!r}", n) from None
        if n.kind == "func":
            x = vals[0]
            f = n.op
            if f == "log":
                if self._bad(x <= 0):
                    raise ExprDomainError("log of a non-positive value", n)
                return np.log(x) if self.vectorized else math.log(x)
            if f == "sqrt":
                if self._bad(x < 0):
                    raise ExprDomainError("sqrt of a negative value", n)
                return np.sqrt(x) if self.vectorized else math.sqrt(x)
            try:
                return (_NP if self.vectorized else _MATH)[f](x)
            except OverflowError:
                raise ExprDomainError("overflow", n) from None
        a, b = vals
        op = n.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if self._bad(b == 0):
                raise ExprDomainError("division by zero", n)
            return a / b
        # power
        expo = n.args[1]
        if expo.is_const:
            c = expo.value
            integral = float(c).is_integer()
            if integral:
                if c < 0 and self._bad(a == 0):
                    raise ExprDomainError("zero to a negative power", n)
                return a ** int(c) if not self.vectorized else np.power(a, float(c))
            if self._bad(a < 0):
                raise ExprDomainError("negative base with non-integer exponent", n)
            if c < 0 and self._bad(a == 0):
                raise ExprDomainError("zero to a negative power", n)
            return a ** float(c) if not self.vectorized else np.power(a, float(c))
        if self._bad(a <= 0):
            raise ExprDomainError("non-positive base with symbolic exponent", n)
        if self.vectorized:
            return np.exp(b * np.log(a))
        return math.exp(b * math.log(a))


def evaluate(e: Expr, bindings: Mapping[str, float]):
    return Evaluator(bindings)(e)


def substitute(e: Expr, repl: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, re-folding constants on the way up."""
    repl = {k: _lift(v) for k, v in repl.items()}
    keys = set(repl)
    memo: dict[int, Expr] = {}
    stack = [e]
    while stack:
        n = stack[-1]
        if id(n) in memo:
            stack.pop()
            continue
        if not (n.free & keys):
            memo[id(n)] = n
            stack.pop()
            continue
        if n.kind == "var":
            memo[id(n)] = repl[n.op]
            stack.pop()
            continue
        pending = [a for a in n.args if id(a) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        args = [memo[id(a)] for a in n.args]
        if n.kind == "func":
            memo[id(n)] = func(n.op, args[0])
        else:
            memo[id(n)] = _BUILD[n.op](*args)
    return memo[id(e)]


_BUILD = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


def build(op: str, a: Expr, b: Expr) -> Expr:
    return _BUILD[op](a, b)
