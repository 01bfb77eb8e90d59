"""Tiny symbolic expression language for coordinate functions.

Expressions are immutable trees over named coordinates, numeric literals,
arithmetic, and a fixed set of analytic functions.  Everything downstream
(vector fields, volume densities, metric entries, connection symbols) is
built from these trees, so this module owns parsing, differentiation,
simplification, printing, and evaluation.
"""

from __future__ import annotations

import math
import re
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "EvalDomainError",
    "const",
    "var",
    "parse_expr",
    "FUNCTIONS",
]


class ExprError(Exception):
    """Base class for expression-level failures."""


class ParseError(ExprError):
    """Malformed source text; carries the byte offset of the first bad token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    """Identifier that is neither a declared coordinate nor a known function."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvalDomainError(ExprError):
    """Evaluation left the domain: log of a non-positive value, division by
    zero, sqrt of a negative, or a pole of the bump derivative."""


# Function kinds, each mapping to a scalar implementation.  bump is the
# standard compactly supported mollifier: exp(-1/(1-t^2)) inside |t|<1,
# identically 0 outside.
def _bump(t: float) -> float:
    if abs(t) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - t * t))


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
    "bump": _bump,
}

_BINARY = frozenset({"add", "sub", "mul", "div", "pow"})
_LEAF = frozenset({"const", "var"})

# Printing precedence; atoms (leaves, function calls) bind tightest.
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_ATOM_PREC = 9


class Expr:
    """Immutable expression tree node.

    ``kind`` is one of const/var, the arithmetic tags, or a function name.
    Structural equality and hashing let tests compare trees directly;
    evaluation is purely functional.
    """

    __slots__ = ("kind", "args", "value", "name", "_hash")

    def __init__(self, kind: str, args: tuple["Expr", ...] = (),
                 value: float | None = None, name: str | None = None):
        self.kind = kind
        self.args = args
        self.value = value
        self.name = name
        self._hash = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Expr":
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, float)):
            return const(other)
        return NotImplemented

    def __add__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("add", (self, other))

    def __radd__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("add", (other, self))

    def __sub__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("sub", (self, other))

    def __rsub__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("sub", (other, self))

    def __mul__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("mul", (self, other))

    def __rmul__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("mul", (other, self))

    def __truediv__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("div", (self, other))

    def __rtruediv__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("div", (other, self))

    def __pow__(self, other):
        other = Expr._coerce(other)
        return NotImplemented if other is NotImplemented else Expr("pow", (self, other))

    def __neg__(self):
        return Expr("neg", (self,))

    # -- identity ------------------------------------------------------------

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return (self.kind == other.kind and self.value == other.value
                and self.name == other.name and self.args == other.args)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.kind, self.value, self.name, self.args))
        return self._hash

    # -- queries -------------------------------------------------------------

    def variables(self) -> frozenset[str]:
        """Set of coordinate names appearing in the tree."""
        out: set[str] = set()
        stack = [self]
        while stack:
            e = stack.pop()
            if e.kind == "var":
                out.add(e.name)
            else:
                stack.extend(e.args)
        return frozenset(out)

    # -- evaluation ----------------------------------------------------------

    def eval(self, point: Mapping[str, float]) -> float:
        """Evaluate at a point given as ``{name: value}``.

        Raises EvalDomainError on domain violations and KeyError for
        coordinates missing from ``point``.
        """
        return _eval_scalar(self, point, {})

    def eval_many(self, arrays: Mapping[str, np.ndarray]) -> np.ndarray:
        """Vectorised evaluation over numpy arrays of coordinate values.

        Domain violations are not raised here; offending positions come back
        as nan/inf for the caller to filter.  Shared subtrees are evaluated
        once.  Constant trees are broadcast to the input shape.
        """
        with np.errstate(all="ignore"):
            out = np.asarray(_eval_vector(self, arrays, {}), dtype=float)
        if out.ndim == 0:
            for v in arrays.values():
                shape = np.shape(v)
                if shape:
                    return np.full(shape, float(out))
        return out

    # -- calculus ------------------------------------------------------------

    def diff(self, name: str) -> "Expr":
        """Partial derivative with respect to coordinate ``name``."""
        return _diff(self, name)

    def simplify(self) -> "Expr":
        """Conservative cleanup: constant folding, 0/1 identities, x-x -> 0.

        Only value-preserving rewrites (away from singular points) are
        applied; no distribution or factoring.
        """
        return _simplify(self)

    # -- printing ------------------------------------------------------------

    def __str__(self):
        return _format(self)

    def __repr__(self):
        return f"Expr({_format(self)!r})"


def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(name: str) -> Expr:
    return Expr("var", name=name)


_ZERO = const(0.0)
_ONE = const(1.0)


def _is_const(e: Expr, v: float | None = None) -> bool:
    return e.kind == "const" and (v is None or e.value == v)


# ---------------------------------------------------------------------------
# scalar evaluation


def _apply_binary(kind: str, a: float, b: float) -> float:
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        if b == 0.0:
            raise EvalDomainError("division by zero")
        return a / b
    # pow
    if a == 0.0 and b < 0.0:
        raise EvalDomainError("zero raised to a negative power")
    if a < 0.0 and b != int(b):
        raise EvalDomainError("negative base with non-integer exponent")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise EvalDomainError("overflow in power") from None


def _apply_function(kind: str, u: float) -> float:
    if kind == "log":
        if u <= 0.0:
            raise EvalDomainError("log of a non-positive value")
    elif kind == "sqrt":
        if u < 0.0:
            raise EvalDomainError("sqrt of a negative value")
    elif kind == "exp":
        if u > 700.0:
            raise EvalDomainError("overflow in exp")
    return FUNCTIONS[kind](u)


def _eval_scalar(root: Expr, point: Mapping[str, float], memo: dict) -> float:
    key = id(root)
    hit = memo.get(key)
    if hit is not None:
        return hit
    kind = root.kind
    if kind == "const":
        out = root.value
    elif kind == "var":
        out = float(point[root.name])
    elif kind == "neg":
        out = -_eval_scalar(root.args[0], point, memo)
    elif kind in _BINARY:
        a = _eval_scalar(root.args[0], point, memo)
        b = _eval_scalar(root.args[1], point, memo)
        out = _apply_binary(kind, a, b)
    else:
        out = _apply_function(kind, _eval_scalar(root.args[0], point, memo))
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# vectorised evaluation


def _bump_vec(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    denom = np.where(inside, 1.0 - t * t, 1.0)
    return np.where(inside, np.exp(-1.0 / denom), 0.0)


_VECTOR_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "bump": _bump_vec,
}


def _eval_vector(root: Expr, arrays: Mapping[str, np.ndarray], memo: dict):
    key = id(root)
    hit = memo.get(key)
    if hit is not None:
        return hit
    kind = root.kind
    if kind == "const":
        out = root.value
    elif kind == "var":
        out = arrays[root.name]
    elif kind == "neg":
        out = -_eval_vector(root.args[0], arrays, memo)
    elif kind in _BINARY:
        a = _eval_vector(root.args[0], arrays, memo)
        b = _eval_vector(root.args[1], arrays, memo)
        if kind == "add":
            out = a + b
        elif kind == "sub":
            out = a - b
        elif kind == "mul":
            out = a * b
        elif kind == "div":
            out = np.divide(a, b)
        else:
            out = np.power(a, b)
    else:
        out = _VECTOR_FUNCS[kind](_eval_vector(root.args[0], arrays, memo))
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# differentiation

# Folding builders keep derivative trees small.  They are value-preserving
# away from singular points, the same standard simplify() is held to.


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Expr("add", (a, b))


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Expr("sub", (a, b))


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Expr("mul", (a, b))


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return const(a.value / b.value)
    return Expr("div", (a, b))


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return _ONE
    return Expr("pow", (a, b))


def _neg(a: Expr) -> Expr:
    if _is_const(a):
        return const(-a.value)
    if a.kind == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def _diff(e: Expr, name: str) -> Expr:
    kind = e.kind
    if kind == "const":
        return _ZERO
    if kind == "var":
        return _ONE if e.name == name else _ZERO
    if kind == "neg":
        return _neg(_diff(e.args[0], name))
    if kind == "add":
        return _add(_diff(e.args[0], name), _diff(e.args[1], name))
    if kind == "sub":
        return _sub(_diff(e.args[0], name), _diff(e.args[1], name))
    if kind == "mul":
        a, b = e.args
        return _add(_mul(_diff(a, name), b), _mul(a, _diff(b, name)))
    if kind == "div":
        a, b = e.args
        num = _sub(_mul(_diff(a, name), b), _mul(a, _diff(b, name)))
        return _div(num, _pow(b, const(2.0)))
    if kind == "pow":
        a, b = e.args
        if _is_const(b):
            # d(a^c) = c * a^(c-1) * da
            return _mul(_mul(b, _pow(a, const(b.value - 1.0))), _diff(a, name))
        # general case via a^b = exp(b log a)
        da, db = _diff(a, name), _diff(b, name)
        return _mul(e, _add(_mul(db, Expr("log", (a,))), _div(_mul(b, da), a)))
    u = e.args[0]
    du = _diff(u, name)
    if kind == "sin":
        return _mul(Expr("cos", (u,)), du)
    if kind == "cos":
        return _mul(_neg(Expr("sin", (u,))), du)
    if kind == "exp":
        return _mul(e, du)
    if kind == "log":
        return _div(du, u)
    if kind == "sqrt":
        return _div(du, _mul(const(2.0), e))
    if kind == "tanh":
        return _mul(_sub(_ONE, _pow(e, const(2.0))), du)
    if kind == "bump":
        # bump'(t) = bump(t) * (-2t)/(1-t^2)^2, kept as a product so the
        # outside-support zero of bump kills the rational factor.
        rational = _div(_mul(const(-2.0), u),
                        _pow(_sub(_ONE, _pow(u, const(2.0))), const(2.0)))
        return _mul(_mul(e, rational), du)
    raise ExprError(f"cannot differentiate node kind {kind!r}")


# ---------------------------------------------------------------------------
# simplification


def _fold_if_const(e: Expr) -> Expr:
    """Try to evaluate a constant subtree; keep it unfolded on any domain
    problem or non-finite result."""
    try:
        v = _eval_scalar(e, {}, {})
    except (EvalDomainError, OverflowError, ValueError):
        return e
    if not math.isfinite(v):
        return e
    return const(v)


def _simplify(e: Expr) -> Expr:
    kind = e.kind
    if kind in _LEAF:
        return e
    args = tuple(_simplify(a) for a in e.args)
    if all(a.kind == "const" for a in args):
        return _fold_if_const(Expr(kind, args, name=e.name))
    if kind == "neg":
        return _neg(args[0])
    if kind == "add":
        return _add(*args)
    if kind == "sub":
        a, b = args
        if a == b:
            return _ZERO
        return _sub(a, b)
    if kind == "mul":
        return _mul(*args)
    if kind == "div":
        return _div(*args)
    if kind == "pow":
        return _pow(*args)
    return Expr(kind, args)


# ---------------------------------------------------------------------------
# parsing

_NUMBER_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPERATORS = "+-*/^()"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _NUMBER_RE.match(text, pos)
        if m:
            tokens.append(("num", m.group(), pos))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            tokens.append(("ident", m.group(), pos))
            pos = m.end()
            continue
        if ch in _OPERATORS:
            tokens.append(("op", ch, pos))
            pos += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", pos)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    """Recursive descent over the token list.

    Grammar, loosest to tightest:  sum -> product -> unary minus -> power
    (right associative) -> atom.
    """

    def __init__(self, tokens, variables: frozenset[str]):
        self.tokens = tokens
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        typ, text, off = self.peek()
        if typ != "op" or text != symbol:
            raise ParseError(f"expected {symbol!r}", off)
        self.advance()

    def parse_sum(self) -> Expr:
        node = self.parse_product()
        while True:
            typ, text, _ = self.peek()
            if typ == "op" and text in "+-":
                self.advance()
                rhs = self.parse_product()
                node = Expr("add" if text == "+" else "sub", (node, rhs))
            else:
                return node

    def parse_product(self) -> Expr:
        node = self.parse_unary()
        while True:
            typ, text, _ = self.peek()
            if typ == "op" and text in "*/":
                self.advance()
                rhs = self.parse_unary()
                node = Expr("mul" if text == "*" else "div", (node, rhs))
            else:
                return node

    def parse_unary(self) -> Expr:
        typ, text, _ = self.peek()
        if typ == "op" and text == "-":
            self.advance()
            return Expr("neg", (self.parse_unary(),))
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        typ, text, _ = self.peek()
        if typ == "op" and text == "^":
            self.advance()
            # right associative, and the exponent may carry a unary minus
            return Expr("pow", (base, self.parse_unary()))
        return base

    def parse_atom(self) -> Expr:
        typ, text, off = self.advance()
        if typ == "num":
            return const(float(text))
        if typ == "ident":
            nxt_typ, nxt_text, _ = self.peek()
            if nxt_typ == "op" and nxt_text == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, off)
                self.advance()
                arg = self.parse_sum()
                self.expect_op(")")
                return Expr(text, (arg,))
            if text not in self.variables:
                raise UnknownIdentifierError(text, off)
            return var(text)
        if typ == "op" and text == "(":
            node = self.parse_sum()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", off)


def parse_expr(text: str, variables: Sequence[str] | Iterable[str]) -> Expr:
    """Parse DSL source into an Expr over the given coordinate names.

    ``variables`` must be non-empty, distinct, valid identifiers; any other
    identifier in the text (besides function names applied with parentheses)
    raises UnknownIdentifierError.
    """
    names = tuple(variables)
    if not names:
        raise ValueError("at least one variable name is required")
    if len(set(names)) != len(names):
        raise ValueError("variable names must be distinct")
    for nm in names:
        if not _IDENT_RE.fullmatch(nm):
            raise ValueError(f"invalid variable name {nm!r}")
        if nm in FUNCTIONS:
            raise ValueError(f"variable name {nm!r} shadows a builtin function")
    if not isinstance(text, str):
        raise TypeError("expression source must be a string")
    parser = _Parser(_tokenize(text), frozenset(names))
    node = parser.parse_sum()
    typ, tok_text, off = parser.peek()
    if typ != "end":
        raise ParseError(f"unexpected trailing token {tok_text!r}", off)
    return node


# ---------------------------------------------------------------------------
# printing


def _format_const(v: float) -> str:
    if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
        return "-" + repr(-v)
    return repr(v)


def _prec(e: Expr) -> int:
    if e.kind in _LEAF or e.kind in FUNCTIONS:
        return _ATOM_PREC
    return _PREC[e.kind]


def _wrap(e: Expr, minimum: int) -> str:
    s = _format(e)
    if _prec(e) < minimum:
        return f"({s})"
    return s


def _format(e: Expr) -> str:
    kind = e.kind
    if kind == "const":
        return _format_const(e.value)
    if kind == "var":
        return e.name
    if kind in FUNCTIONS:
        return f"{kind}({_format(e.args[0])})"
    if kind == "neg":
        return "-" + _wrap(e.args[0], _PREC["neg"])
    a, b = e.args
    if kind == "add":
        return f"{_wrap(a, 1)}+{_wrap(b, 1)}"
    if kind == "sub":
        # right side needs parens at equal precedence: a-(b+c) != a-b+c
        return f"{_wrap(a, 1)}-{_wrap(b, 2)}"
    if kind == "mul":
        return f"{_wrap(a, 2)}*{_wrap(b, 2)}"
    if kind == "div":
        return f"{_wrap(a, 2)}/{_wrap(b, 3)}"
    if kind == "pow":
        # base must be a true atom: -2^2 parses as -(2^2)
        base = _format(a)
        if _prec(a) < _ATOM_PREC or (a.kind == "const" and base.startswith("-")):
            base = f"({base})"
        return f"{base}^{_wrap(b, 3)}"
    raise ExprError(f"cannot format node kind {kind!r}")
