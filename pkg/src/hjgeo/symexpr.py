"""Scalar expression DSL: parsing, evaluation, symbolic differentiation.

Grammar (standard infix precedence, ``^`` binds tightest and is
right-associative, no implicit multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME '(' expr ')' | NAME | '(' expr ')'

The exponent of ``^`` must reduce to a constant.  Expressions are immutable
and hashable; structural equality is dataclass equality.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expression", "Const", "Var", "Unary", "Binary", "Pow",
    "ExprError", "ExprSyntaxError", "UnknownFunctionError",
    "UnboundVariableError", "DomainError",
    "parse", "as_expr", "evaluate", "diff", "gradient", "simplify",
    "substitute", "to_string", "to_python", "lambdify",
    "ZERO", "ONE",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(names)
        super().__init__("unbound variable(s): " + ", ".join(self.names))


class DomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, node: "Expression | None" = None):
        loc = ""
        if node is not None:
            loc = f" in '{to_string(node)}'"
            if node.pos is not None:
                loc += f" (offset {node.pos})"
        super().__init__(message + loc)
        self.node = node


# ---------------------------------------------------------------------------
# nodes


@dataclass(frozen=True)
class Expression:
    pos: int | None = field(default=None, compare=False, repr=False, kw_only=True)

    @property
    def free_vars(self) -> frozenset[str]:
        return _free_vars(self)

    def __str__(self) -> str:
        return to_string(self)

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        if not isinstance(exponent, (int, float)):
            raise TypeError("exponent must be a number")
        return power(self, float(exponent))


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Unary(Expression):
    op: str  # 'neg' or one of FUNCTIONS
    arg: Expression


@dataclass(frozen=True)
class Binary(Expression):
    op: str  # '+', '-', '*', '/'
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: float


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Expression")


def _free_vars(e: Expression) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Pow):
            stack.append(node.base)
    return frozenset(out)


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1 elimination only


def _is(e: Expression, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _fold(value: float) -> Expression | None:
    return Const(value) if math.isfinite(value) else None


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value + b.value) or Binary("+", a, b)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value - b.value) or Binary("-", a, b)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value * b.value) or Binary("*", a, b)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return _fold(a.value / b.value) or Binary("/", a, b)
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(base: Expression, exponent: float) -> Expression:
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    if isinstance(base, Const):
        try:
            value = _pow_value(base.value, exponent, None)
        except DomainError:
            return Pow(base, exponent)
        return _fold(value) or Pow(base, exponent)
    return Pow(base, exponent)


def func(name: str, a: Expression) -> Expression:
    if isinstance(a, Const):
        try:
            value = _UNARY[name](a.value, None)
        except (DomainError, OverflowError):
            return Unary(name, a)
        folded = _fold(value)
        if folded is not None:
            return folded
    return Unary(name, a)


_BUILD = {"+": add, "-": sub, "*": mul, "/": div}


def simplify(e: Expression) -> Expression:
    """Rebuild ``e`` bottom-up through the folding constructors."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Unary):
        arg = simplify(e.arg)
        return neg(arg) if e.op == "neg" else func(e.op, arg)
    if isinstance(e, Binary):
        return _BUILD[e.op](simplify(e.left), simplify(e.right))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    raise TypeError(e)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.lastgroup is None:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        i = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", pos)

    def fail(self, tok):
        kind, val, pos = tok
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", pos)

    def parse(self) -> Expression:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(self.peek())
        return e

    def expr(self) -> Expression:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            left = Binary(op, left, self.term(), pos=pos)
        return left

    def term(self) -> Expression:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            left = Binary(op, left, self.unary(), pos=pos)
        return left

    def unary(self) -> Expression:
        kind, val, pos = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.unary()
            return Unary("neg", arg, pos=pos) if val == "-" else arg
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exp_pos = self.peek()[2]
            exponent = simplify(self.unary())
            if not isinstance(exponent, Const):
                raise ExprSyntaxError("exponent must be a constant", exp_pos)
            return Pow(base, exponent.value, pos=pos)
        return base

    def atom(self) -> Expression:
        tok = self.take()
        kind, val, pos = tok
        if kind == "num":
            return Const(float(val), pos=pos)
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {val!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg, pos=pos)
            return Var(val, pos=pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.fail(tok)


def parse(text: str) -> Expression:
    """Parse DSL text into an (unsimplified) expression tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation


def _check_log(x, node):
    if x <= 0.0:
        raise DomainError(f"log of nonpositive value {x!r}", node)
    return math.log(x)


def _check_sqrt(x, node):
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}", node)
    return math.sqrt(x)


def _exp(x, node):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


_UNARY = {
    "neg": lambda x, node: -x,
    "sin": lambda x, node: math.sin(x),
    "cos": lambda x, node: math.cos(x),
    "exp": _exp,
    "log": _check_log,
    "sqrt": _check_sqrt,
}


def _pow_value(base: float, exponent: float, node) -> float:
    if exponent.is_integer():
        if base == 0.0 and exponent < 0:
            raise DomainError("zero raised to a negative power", node)
        try:
            return base ** int(exponent)
        except OverflowError:
            return math.inf
    if base <= 0.0:
        raise DomainError(f"non-integer power of nonpositive value {base!r}", node)
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.inf


def evaluate(e: Expression, binding: Mapping[str, float]) -> float:
    """IEEE double evaluation of ``e`` with every free variable bound."""
    missing = e.free_vars - binding.keys()
    if missing:
        raise UnboundVariableError(missing)
    return _eval(e, binding)


def _eval(e: Expression, b: Mapping[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(b[e.name])
    if isinstance(e, Unary):
        return _UNARY[e.op](_eval(e.arg, b), e)
    if isinstance(e, Binary):
        x = _eval(e.left, b)
        y = _eval(e.right, b)
        if e.op == "+":
            return x + y
        if e.op == "-":
            return x - y
        if e.op == "*":
            return x * y
        if y == 0.0:
            raise DomainError("division by zero", e)
        return x / y
    if isinstance(e, Pow):
        return _pow_value(_eval(e.base, b), e.exponent, e)
    raise TypeError(e)


# ---------------------------------------------------------------------------
# differentiation and substitution


def diff(e: Expression, v: str) -> Expression:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    if v not in e.free_vars:
        return ZERO
    return _diff(e, v)


def _diff(e: Expression, v: str) -> Expression:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = diff(a, v), diff(b, v)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule
        return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
    if isinstance(e, Pow):
        c = e.exponent
        return mul(mul(Const(c), power(e.base, c - 1.0)), diff(e.base, v))
    if isinstance(e, Unary):
        u = e.arg
        du = diff(u, v)
        if e.op == "neg":
            return neg(du)
        if e.op == "sin":
            outer = func("cos", u)
        elif e.op == "cos":
            outer = neg(func("sin", u))
        elif e.op == "exp":
            outer = func("exp", u)
        elif e.op == "log":
            outer = div(ONE, u)
        elif e.op == "sqrt":
            outer = div(ONE, mul(Const(2.0), func("sqrt", u)))
        else:
            raise TypeError(e.op)
        return mul(outer, du)
    raise TypeError(e)


def gradient(e: Expression, names: Sequence[str]) -> list[Expression]:
    return [diff(e, v) for v in names]


def substitute(e: Expression, mapping: Mapping[str, Expression | float]) -> Expression:
    """Replace variables by expressions (or numbers); result is simplified."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    if not (e.free_vars & repl.keys()):
        return e

    def go(node: Expression) -> Expression:
        if isinstance(node, Var):
            return repl.get(node.name, node)
        if isinstance(node, Const):
            return node
        if isinstance(node, Unary):
            arg = go(node.arg)
            return neg(arg) if node.op == "neg" else func(node.op, arg)
        if isinstance(node, Binary):
            return _BUILD[node.op](go(node.left), go(node.right))
        if isinstance(node, Pow):
            return power(go(node.base), node.exponent)
        raise TypeError(node)

    return go(e)


# ---------------------------------------------------------------------------
# printing and code generation

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _num(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def to_string(e: Expression) -> str:
    """Print in DSL syntax; ``parse(to_string(e))`` evaluates identically."""
    return _print(e)[0]


def _print(e: Expression) -> tuple[str, int]:
    if isinstance(e, Const):
        s = _num(e.value)
        return (f"({s})", 5) if e.value < 0 or s.startswith("-") else (s, 5)
    if isinstance(e, Var):
        return e.name, 5
    if isinstance(e, Unary):
        if e.op == "neg":
            s, p = _print(e.arg)
            # -a^b is -(a^b); anything looser needs parentheses
            return "-" + (s if p >= _PREC["^"] else f"({s})"), _PREC["neg"]
        return f"{e.op}({_print(e.arg)[0]})", 5
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        ls, lp = _print(e.left)
        rs, rp = _print(e.right)
        if lp < prec:
            ls = f"({ls})"
        # equal precedence on the right keeps the tree shape on re-parse
        if rp <= prec:
            rs = f"({rs})"
        sep = f" {e.op} " if e.op in "+-" else e.op
        return f"{ls}{sep}{rs}", prec
    if isinstance(e, Pow):
        bs, bp = _print(e.base)
        if bp <= _PREC["^"]:
            bs = f"({bs})"
        xs = _num(e.exponent)
        if e.exponent < 0:
            xs = f"({xs})"
        return f"{bs}^{xs}", _PREC["^"]
    raise TypeError(e)


def to_python(e: Expression, env: Mapping[str, str], mathmod: str = "math") -> str:
    """Python source for ``e``; ``env`` maps variable names to code snippets."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError([e.name]) from None
    if isinstance(e, Unary):
        arg = to_python(e.arg, env, mathmod)
        if e.op == "neg":
            return f"(-{arg})"
        return f"{mathmod}.{e.op}({arg})"
    if isinstance(e, Binary):
        return f"({to_python(e.left, env, mathmod)} {e.op} {to_python(e.right, env, mathmod)})"
    if isinstance(e, Pow):
        base = to_python(e.base, env, mathmod)
        if e.exponent.is_integer():
            k = int(e.exponent)
            if k == 2:
                return f"({base} * {base})"
            return f"({base} ** {k})"
        return f"{mathmod}.pow({base}, {e.exponent!r})"
    raise TypeError(e)


def lambdify(exprs: Sequence[Expression], names: Sequence[str]):
    """Compile expressions into ``f(values) -> ndarray`` over ``names``.

    ``values`` is a sequence ordered like ``names``.  Arithmetic failures
    (log/sqrt domain, division by zero) surface as DomainError.
    """
    env = {name: f"v[{i}]" for i, name in enumerate(names)}
    body = ", ".join(to_python(e, env) for e in exprs)
    src = f"def _f(v):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    ns = {"math": math}
    exec(compile(src, "<lambdify>", "exec"), ns)
    raw = ns["_f"]
    text = [to_string(e) for e in exprs]

    def f(values) -> np.ndarray:
        try:
            return np.array(raw(values) if exprs else (), dtype=float)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero evaluating {text}") from exc
        except ValueError as exc:
            raise DomainError(f"math domain error evaluating {text}") from exc

    f.source = src
    return f
