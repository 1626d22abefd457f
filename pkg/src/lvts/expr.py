"""Coefficient expressions: a small arithmetic language in one variable.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | VAR | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | abs | sqrt | exp

``VAR`` is ``t`` for coefficient functions and ``k`` for impulse sequences.
Expressions are checked at parse time so that evaluation is total on the
whole real line: divisors and square-root arguments must be constant, and
powers need a positive constant base or a nonnegative integer exponent.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Union

import numpy as np

FUNCS = ("sin", "cos", "abs", "sqrt", "exp")
# "sign" only ever appears in derivative trees
_NP_FUNCS = {"sin": "np.sin", "cos": "np.cos", "abs": "np.abs", "sqrt": "np.sqrt",
             "exp": "np.exp", "sign": "np.sign"}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text


class ExprValidationError(ValueError):
    pass


class Node:
    """Base class for expression tree nodes."""

    __slots__ = ()

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str = "t"


@dataclass(frozen=True)
class Pi(Node):
    pass


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node


Expr = Union[Const, Var, Pi, BinOp, Neg, Call]


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variable: str):
        self.text = text
        self.variable = variable
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message: str):
        kind, value, pos = self.tok
        found = "end of input" if kind == "eof" else repr(value)
        raise ExprSyntaxError(f"{message}, found {found}", pos, self.text)

    def accept(self, value: str) -> bool:
        if self.tok[0] == "op" and self.tok[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        if not self.accept(value):
            self.error(f"expected {value!r}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok[0] != "eof":
            self.error("unexpected token")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, value, pos = self.tok
        if kind == "num":
            self.i += 1
            return Const(float(value))
        if kind == "name":
            self.i += 1
            if value == self.variable:
                return Var(value)
            if value == "pi":
                return Pi()
            if value in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise ExprSyntaxError(f"unknown name {value!r}", pos, self.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a number, name or '('")


def has_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, BinOp):
        return has_var(node.left) or has_var(node.right)
    if isinstance(node, (Neg, Call)):
        return has_var(node.arg)
    return False


def _const_value(node: Node) -> float:
    return float(evaluate(node, 0.0))


def validate(node: Node) -> None:
    """Reject trees whose evaluation could fail somewhere on the real line."""
    if isinstance(node, BinOp):
        validate(node.left)
        validate(node.right)
        if node.op == "/":
            if has_var(node.right):
                raise ExprValidationError(f"divisor {render(node.right)!r} depends on the variable")
            if _const_value(node.right) == 0:
                raise ExprValidationError(f"division by zero in {render(node)!r}")
        elif node.op == "^":
            base_const = not has_var(node.left)
            exp_const = not has_var(node.right)
            if base_const and _const_value(node.left) > 0:
                return
            if exp_const:
                e = _const_value(node.right)
                if e >= 0 and float(e).is_integer():
                    return
            raise ExprValidationError(
                f"power {render(node)!r} needs a positive constant base or a nonnegative integer exponent")
    elif isinstance(node, (Neg, Call)):
        validate(node.arg)
        if isinstance(node, Call) and node.func == "sqrt":
            if has_var(node.arg):
                raise ExprValidationError("sqrt applies to constants only")
            if _const_value(node.arg) < 0:
                raise ExprValidationError(f"sqrt of negative constant in {render(node)!r}")


def parse_expr(text: str, variable: str = "t") -> Node:
    if not isinstance(text, str):
        raise ExprSyntaxError(f"expression must be a string, got {type(text).__name__}", 0)
    node = _Parser(text, variable).parse()
    validate(node)
    return node


# ---------------------------------------------------------------- rendering

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt_const(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def render(node: Node) -> str:
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Neg):
        inner = render(node.arg)
        return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({render(node.arg)})"
    p = _PREC[node.op]
    left, right = render(node.left), render(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------- evaluation

def to_source(node: Node) -> str:
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "_x"
    if isinstance(node, Pi):
        return "np.pi"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Call):
        return f"{_NP_FUNCS[node.func]}({to_source(node.arg)})"
    op = "**" if node.op == "^" else node.op
    return f"({to_source(node.left)} {op} {to_source(node.right)})"


_COMPILED: dict[Node, Callable] = {}


def compile_expr(node: Node) -> Callable:
    fn = _COMPILED.get(node)
    if fn is None:
        fn = eval(f"lambda _x: {to_source(node)}", {"np": np})  # tree built by this module only
        _COMPILED[node] = fn
    return fn


def evaluate(node: Node, t):
    """Value of the expression at ``t`` (scalar or numpy array)."""
    fn = compile_expr(node)
    if np.ndim(t) == 0:
        with np.errstate(over="ignore"):
            return float(fn(float(t)))
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        return np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape).copy()


# ---------------------------------------------------------------- differentiation

def _add(a: Node, b: Node) -> Node:
    if a == Const(0.0):
        return b
    if b == Const(0.0):
        return a
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if b == Const(0.0):
        return a
    if a == Const(0.0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if a == Const(0.0) or b == Const(0.0):
        return Const(0.0)
    if a == Const(1.0):
        return b
    if b == Const(1.0):
        return a
    return BinOp("*", a, b)


def derivative(node: Node) -> Node:
    """Symbolic d/dvar of a validated tree (kinks of abs get derivative sign(u) u')."""
    if isinstance(node, (Const, Pi)):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0)
    if isinstance(node, Neg):
        d = derivative(node.arg)
        return Const(0.0) if d == Const(0.0) else Neg(d)
    if isinstance(node, Call):
        u, du = node.arg, derivative(node.arg)
        if du == Const(0.0):
            return Const(0.0)
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: Neg(Call("sin", u)),
            "abs": lambda: Call("sign", u),
            "exp": lambda: node,
            "sign": lambda: Const(0.0),
            "sqrt": lambda: Const(0.0),
        }[node.func]()
        return _mul(outer, du)
    a, b = node.left, node.right
    da, db = derivative(a), derivative(b)
    if node.op == "+":
        return _add(da, db)
    if node.op == "-":
        return _sub(da, db)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        # divisors are constant after validation
        if db != Const(0.0):
            return BinOp("/", _sub(_mul(da, b), _mul(a, db)), BinOp("^", b, Const(2.0)))
        return Const(0.0) if da == Const(0.0) else BinOp("/", da, b)
    # power
    if not has_var(a):
        if db == Const(0.0):
            return Const(0.0)
        return _mul(_mul(node, Const(math.log(_const_value(a)))), db)
    n = _const_value(b)
    if n == 0:
        return Const(0.0)
    return _mul(_mul(Const(n), BinOp("^", a, Const(n - 1.0))), da)


# ---------------------------------------------------------------- interval enclosure

class Interval(NamedTuple):
    lo: float
    hi: float


def _imul(x: Interval, y: Interval) -> Interval:
    cands = [a * b for a in x for b in y]
    cands = [c for c in cands if not math.isnan(c)] or [-math.inf, math.inf]
    return Interval(min(cands), max(cands))


def _trig_range(lo: float, hi: float, phase: float) -> Interval:
    # range of cos(u - phase) for u in [lo, hi]
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo >= 2 * math.pi:
        return Interval(-1.0, 1.0)
    vals = [math.cos(lo - phase), math.cos(hi - phase)]
    if math.floor((hi - phase) / (2 * math.pi)) >= math.ceil((lo - phase) / (2 * math.pi)):
        vals.append(1.0)
    if math.floor((hi - phase - math.pi) / (2 * math.pi)) >= math.ceil((lo - phase - math.pi) / (2 * math.pi)):
        vals.append(-1.0)
    return Interval(min(vals), max(vals))


def _ipow(base: Interval, e: Interval, node: BinOp) -> Interval:
    if e.lo == e.hi and float(e.lo).is_integer() and e.lo >= 0:
        n = int(e.lo)
        if n == 0:
            return Interval(1.0, 1.0)
        lo, hi = base
        if n % 2 == 1:
            return Interval(lo ** n, hi ** n)
        if lo <= 0 <= hi:
            return Interval(0.0, max(abs(lo), abs(hi)) ** n)
        a, b = sorted((abs(lo), abs(hi)))
        return Interval(a ** n, b ** n)
    if base.lo > 0:
        with np.errstate(over="ignore"):
            cands = [float(np.power(b, x)) for b in base for x in e]
        return Interval(min(cands), max(cands))
    return Interval(-math.inf, math.inf)


def enclose(node: Node, lo: float, hi: float) -> Interval:
    """Guaranteed outer bound of the expression for variable values in [lo, hi]."""
    if isinstance(node, Const):
        return Interval(node.value, node.value)
    if isinstance(node, Pi):
        return Interval(math.pi, math.pi)
    if isinstance(node, Var):
        return Interval(lo, hi)
    if isinstance(node, Neg):
        a = enclose(node.arg, lo, hi)
        return Interval(-a.hi, -a.lo)
    if isinstance(node, Call):
        a = enclose(node.arg, lo, hi)
        f = node.func
        if f == "sin":
            return _trig_range(a.lo, a.hi, math.pi / 2)
        if f == "cos":
            return _trig_range(a.lo, a.hi, 0.0)
        if f == "abs":
            if a.lo >= 0:
                return a
            if a.hi <= 0:
                return Interval(-a.hi, -a.lo)
            return Interval(0.0, max(-a.lo, a.hi))
        if f == "sqrt":
            return Interval(math.sqrt(max(a.lo, 0.0)), math.sqrt(max(a.hi, 0.0)))
        if f == "exp":
            with np.errstate(over="ignore"):
                return Interval(float(np.exp(a.lo)), float(np.exp(a.hi)))
        if f == "sign":
            return Interval(float(np.sign(a.lo)), float(np.sign(a.hi)))
        raise ValueError(f"unknown function {f}")
    x, y = enclose(node.left, lo, hi), enclose(node.right, lo, hi)
    if node.op == "+":
        return Interval(x.lo + y.lo, x.hi + y.hi)
    if node.op == "-":
        return Interval(x.lo - y.hi, x.hi - y.lo)
    if node.op == "*":
        return _imul(x, y)
    if node.op == "/":
        if y.lo <= 0 <= y.hi:
            return Interval(-math.inf, math.inf)
        return _imul(x, Interval(1.0 / y.hi, 1.0 / y.lo))
    return _ipow(x, y, node)
