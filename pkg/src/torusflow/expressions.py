"""Symbolic expressions for prescribed data and warp profiles.

Small closed expression language over the variables ``x1``, ``x2``, ``u``
with exact differentiation.  Node kinds: constants, variables, the four
arithmetic operations, integer powers, and sin/cos/sinh/cosh/tanh/exp/log.
Evaluation broadcasts over numpy arrays.

Surface syntax (used in config files, see :func:`parse`)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") ["-"] INTEGER)?
    atom   := NUMBER | "pi" | "x1" | "x2" | "u" | FUNC "(" expr ")" | "(" expr ")"

with FUNC one of sin, cos, sinh, cosh, tanh, exp, log.
"""

from __future__ import annotations

import math

import numpy as np

VARIABLES = ("x1", "x2", "u")
FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "exp", "log")

_NUMPY_FUNCS = {name: getattr(np, name) for name in FUNCTIONS}


class ExprError(ValueError):
    """Base class for expression failures."""


class ParseError(ExprError):
    def __init__(self, message, line, column):
        super().__init__(f"parse error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class EvalError(ExprError):
    """Evaluation hit an undefined operation; names the offending node."""


class Expr:
    """Immutable expression tree node.

    ``kind`` is one of "const", "var", "+", "-", "*", "/", "pow", or a
    function name; ``args`` holds child expressions, ``value`` the constant
    or variable name or integer exponent.
    """

    __slots__ = ("kind", "args", "value", "_hash")

    def __init__(self, kind, args=(), value=None):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", hash((kind, self.args, value)))

    def __setattr__(self, *_):
        raise AttributeError("Expr is immutable")

    # -- construction ------------------------------------------------------

    @staticmethod
    def const(v) -> "Expr":
        return Expr("const", value=float(v))

    @staticmethod
    def var(name) -> "Expr":
        if name not in VARIABLES:
            raise ExprError(f"unknown variable {name!r}; allowed: {', '.join(VARIABLES)}")
        return Expr("var", value=name)

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return sub(self, _as_expr(other))

    def __rsub__(self, other):
        return sub(_as_expr(other), self)

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __pow__(self, k):
        return powi(self, k)

    def __neg__(self):
        return neg(self)

    # -- queries -----------------------------------------------------------

    def free_vars(self):
        if self.kind == "var":
            return {self.value}
        out = set()
        for a in self.args:
            out |= a.free_vars()
        return out

    def is_const(self, v=None):
        if self.kind != "const":
            return False
        return v is None or self.value == v

    def __eq__(self, other):
        return (
            isinstance(other, Expr)
            and self.kind == other.kind
            and self.value == other.value
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    # -- evaluation --------------------------------------------------------

    def evaluate(self, **subs):
        """Evaluate with variables bound to scalars or numpy arrays.

        Raises :class:`EvalError` on division by zero, log of a nonpositive
        argument, or a negative power of zero, naming the offending node.
        """
        k = self.kind
        if k == "const":
            return self.value
        if k == "var":
            if self.value not in subs:
                raise EvalError(f"variable {self.value!r} is unbound in {self}")
            return subs[self.value]
        if k == "+":
            return self.args[0].evaluate(**subs) + self.args[1].evaluate(**subs)
        if k == "-":
            return self.args[0].evaluate(**subs) - self.args[1].evaluate(**subs)
        if k == "*":
            return self.args[0].evaluate(**subs) * self.args[1].evaluate(**subs)
        if k == "/":
            num = self.args[0].evaluate(**subs)
            den = self.args[1].evaluate(**subs)
            if np.any(den == 0):
                raise EvalError(f"division by zero in {self}")
            return num / den
        if k == "pow":
            base = self.args[0].evaluate(**subs)
            if self.value < 0 and np.any(base == 0):
                raise EvalError(f"negative power of zero in {self}")
            return base ** self.value
        if k == "log":
            arg = self.args[0].evaluate(**subs)
            if np.any(arg <= 0):
                raise EvalError(f"log of a nonpositive value in {self}")
            return np.log(arg)
        return _NUMPY_FUNCS[k](self.args[0].evaluate(**subs))

    def __call__(self, **subs):
        return self.evaluate(**subs)

    # -- differentiation ---------------------------------------------------

    def diff(self, var) -> "Expr":
        """Exact derivative with respect to ``var`` (one of x1, x2, u)."""
        if var not in VARIABLES:
            raise ExprError(f"cannot differentiate with respect to {var!r}")
        k = self.kind
        if k == "const":
            return _ZERO
        if k == "var":
            return _ONE if self.value == var else _ZERO
        a = self.args[0]
        da = a.diff(var)
        if k == "+":
            return add(da, self.args[1].diff(var))
        if k == "-":
            return sub(da, self.args[1].diff(var))
        if k == "*":
            b = self.args[1]
            return add(mul(da, b), mul(a, b.diff(var)))
        if k == "/":
            b = self.args[1]
            return div(sub(mul(da, b), mul(a, b.diff(var))), powi(b, 2))
        if k == "pow":
            n = self.value
            return mul(mul(Expr.const(n), powi(a, n - 1)), da)
        if k == "sin":
            return mul(cos(a), da)
        if k == "cos":
            return mul(Expr.const(-1.0), mul(sin(a), da))
        if k == "sinh":
            return mul(cosh(a), da)
        if k == "cosh":
            return mul(sinh(a), da)
        if k == "tanh":
            return mul(sub(_ONE, powi(tanh(a), 2)), da)
        if k == "exp":
            return mul(self, da)
        if k == "log":
            return div(da, a)
        raise ExprError(f"cannot differentiate node kind {k!r}")

    # -- rendering ---------------------------------------------------------

    def __str__(self):
        return _render(self, 0)

    def __repr__(self):
        return f"Expr({self})"


def _as_expr(v):
    if isinstance(v, Expr):
        return v
    return Expr.const(v)


_ZERO = Expr("const", value=0.0)
_ONE = Expr("const", value=1.0)


# -- smart constructors with constant folding ------------------------------

def add(a, b):
    a, b = _as_expr(a), _as_expr(b)
    if a.is_const() and b.is_const():
        return Expr.const(a.value + b.value)
    if a.is_const(0.0):
        return b
    if b.is_const(0.0):
        return a
    return Expr("+", (a, b))


def sub(a, b):
    a, b = _as_expr(a), _as_expr(b)
    if a.is_const() and b.is_const():
        return Expr.const(a.value - b.value)
    if b.is_const(0.0):
        return a
    return Expr("-", (a, b))


def mul(a, b):
    a, b = _as_expr(a), _as_expr(b)
    if a.is_const() and b.is_const():
        return Expr.const(a.value * b.value)
    if a.is_const(0.0) or b.is_const(0.0):
        return _ZERO
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    return Expr("*", (a, b))


def div(a, b):
    a, b = _as_expr(a), _as_expr(b)
    if b.is_const(0.0):
        raise EvalError(f"division by the zero constant in ({a})/({b})")
    if a.is_const() and b.is_const():
        return Expr.const(a.value / b.value)
    if a.is_const(0.0):
        return _ZERO
    if b.is_const(1.0):
        return a
    return Expr("/", (a, b))


def neg(a):
    return sub(_ZERO, a)


def powi(a, k):
    a = _as_expr(a)
    k = int(k)
    if k == 0:
        return _ONE
    if k == 1:
        return a
    if a.is_const():
        return Expr.const(a.value**k)
    return Expr("pow", (a,), value=k)


def _func(name):
    def build(a):
        a = _as_expr(a)
        if a.is_const():
            return Expr.const(float(_NUMPY_FUNCS[name](a.value)))
        return Expr(name, (a,))

    build.__name__ = name
    return build


sin = _func("sin")
cos = _func("cos")
sinh = _func("sinh")
cosh = _func("cosh")
tanh = _func("tanh")
exp = _func("exp")
log = _func("log")

x1 = Expr.var("x1")
x2 = Expr.var("x2")
u = Expr.var("u")


# -- rendering -------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "pow": 3}


def _render(e, parent_prec):
    k = e.kind
    if k == "const":
        if e.value == int(e.value) and abs(e.value) < 1e16:
            s = repr(int(e.value))
        else:
            s = repr(e.value)
        return f"({s})" if e.value < 0 and parent_prec > 1 else s
    if k == "var":
        return e.value
    if k in ("+", "-", "*", "/"):
        p = _PREC[k]
        left = _render(e.args[0], p)
        # right child needs parens at equal precedence for - and /
        right = _render(e.args[1], p + (1 if k in ("-", "/") else 0))
        s = f"{left} {k} {right}"
        return f"({s})" if p < parent_prec else s
    if k == "pow":
        base = _render(e.args[0], 4)
        return f"{base}^{e.value}"
    return f"{k}({_render(e.args[0], 0)})"


# -- parser ----------------------------------------------------------------

class _Tokens:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _line_col(self, pos):
        line = self.text.count("\n", 0, pos) + 1
        last_nl = self.text.rfind("\n", 0, pos)
        return line, pos - last_nl if last_nl >= 0 else pos + 1

    def error(self, message, pos=None):
        line, col = self._line_col(self.pos if pos is None else pos)
        raise ParseError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\n\r":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, s):
        self.skip_ws()
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def name(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos], start

    def number(self):
        self.skip_ws()
        start = self.pos
        n = len(self.text)
        while self.pos < n and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        if self.pos < n and self.text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and self.text[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and self.text[self.pos].isdigit():
                while self.pos < n and self.text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark
        token = self.text[start:self.pos]
        try:
            return float(token)
        except ValueError:
            self.error(f"bad number {token!r}", start)

    def integer(self):
        self.skip_ws()
        sign = -1 if self.take("-") else 1
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error("expected an integer exponent", start)
        return sign * int(self.text[start:self.pos])


def parse(text) -> Expr:
    """Parse surface syntax into an :class:`Expr`.

    Raises :class:`ParseError` with line/column on malformed input.
    """
    toks = _Tokens(text)
    e = _parse_expr(toks)
    toks.skip_ws()
    if toks.pos != len(text):
        toks.error(f"unexpected trailing input {text[toks.pos:]!r}")
    return e


def _parse_expr(toks):
    e = _parse_term(toks)
    while True:
        if toks.take("+"):
            e = add(e, _parse_term(toks))
        elif toks.take("-"):
            e = sub(e, _parse_term(toks))
        else:
            return e


def _parse_term(toks):
    e = _parse_unary(toks)
    while True:
        toks.skip_ws()
        # '**' is a power marker, not multiplication
        if toks.text.startswith("**", toks.pos):
            return e
        if toks.take("*"):
            e = mul(e, _parse_unary(toks))
        elif toks.take("/"):
            e = div(e, _parse_unary(toks))
        else:
            return e


def _parse_unary(toks):
    if toks.take("-"):
        return neg(_parse_unary(toks))
    if toks.take("+"):
        return _parse_unary(toks)
    return _parse_power(toks)


def _parse_power(toks):
    base = _parse_atom(toks)
    if toks.take("**") or toks.take("^"):
        k = toks.integer()
        if toks.peek() in ("^",) or toks.text.startswith("**", toks.pos):
            toks.error("chained powers are not supported; parenthesize")
        return powi(base, k)
    return base


def _parse_atom(toks):
    c = toks.peek()
    if c == "":
        toks.error("unexpected end of expression")
    if c == "(":
        toks.take("(")
        e = _parse_expr(toks)
        if not toks.take(")"):
            toks.error("expected ')'")
        return e
    if c.isdigit() or c == ".":
        return Expr.const(toks.number())
    if c.isalpha():
        name, start = toks.name()
        if name == "pi":
            return Expr.const(math.pi)
        if name in VARIABLES:
            return Expr.var(name)
        if name in FUNCTIONS:
            if not toks.take("("):
                toks.error(f"expected '(' after function {name!r}")
            e = _parse_expr(toks)
            if not toks.take(")"):
                toks.error(f"expected ')' closing {name!r}")
            return _func(name)(e)
        toks.error(f"unknown name {name!r}", start)
    toks.error(f"unexpected character {c!r}")
