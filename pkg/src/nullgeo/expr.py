"""Scalar expressions in named coordinates.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;
    atom    = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
            | "." digits [ ("e" | "E") [ "+" | "-" ] digits ] ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``, and it is
right-associative.  Names are coordinate variables, the constant ``pi`` or
one of the functions in :data:`FUNCTIONS`.

Parsed fields are immutable.  Evaluation goes through Python code generated
once per field, in a scalar flavour (``math``) and a vectorised flavour
(``numpy``) used by the finite-difference stencils.
"""

from dataclasses import dataclass
import math
import re
import sys

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifierError

__all__ = [
    "ExprField",
    "parse",
    "evaluate",
    "partial",
    "second_partial",
    "default_step",
    "default_step2",
    "FUNCTIONS",
]

EPS = sys.float_info.epsilon

# name -> (arity, math version, numpy version)
FUNCTIONS = {
    "sin": (1, "math.sin", "np.sin"),
    "cos": (1, "math.cos", "np.cos"),
    "tan": (1, "math.tan", "np.tan"),
    "exp": (1, "math.exp", "np.exp"),
    "log": (1, "math.log", "_nplog"),
    "sqrt": (1, "math.sqrt", "_npsqrt"),
    "sinh": (1, "math.sinh", "np.sinh"),
    "cosh": (1, "math.cosh", "np.cosh"),
    "tanh": (1, "math.tanh", "np.tanh"),
    "atan2": (2, "math.atan2", "np.arctan2"),
    "abs": (1, "math.fabs", "np.abs"),
}
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _byte_offset(source, pos):
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = {name: i for i, name in enumerate(variables)}
        self.tokens = self._tokenize()
        self.pos = 0

    def _tokenize(self):
        src = self.source
        tokens = []
        pos = 0
        while True:
            while pos < len(src) and src[pos].isspace():
                pos += 1
            if pos >= len(src):
                break
            m = _TOKEN.match(src, pos)
            if m is None or m.end() == pos:
                raise ParseError(
                    f"unexpected character {src[pos]!r}", _byte_offset(src, pos), src
                )
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            pos = m.end()
        tokens.append(("end", "", len(src)))
        return tokens

    def error(self, message, token=None):
        token = token or self.tokens[self.pos]
        raise ParseError(message, _byte_offset(self.source, token[2]), self.source)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] != "op":
            self.pos -= 1
            self.error(f"expected {text!r}")
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-", self.peek()[2]):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(
                        text, _byte_offset(self.source, tok[2]), self.source
                    )
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    self.error(f"{text} takes {arity} argument(s), got {len(args)}", tok)
                return Call(text, tuple(args))
            if text in self.variables:
                return Var(text, self.variables[text])
            if text in CONSTANTS:
                return Const(text)
            raise UnknownIdentifierError(text, _byte_offset(self.source, tok[2]), self.source)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.pos -= 1
            self.error("unexpected end of expression")
        self.pos -= 1
        self.error(f"unexpected token {text!r}")


def _codegen(node, flavour):
    """Python source for ``node``; variables are read from ``x[i]``."""
    rec = lambda n: _codegen(n, flavour)  # noqa: E731
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return repr(CONSTANTS[node.name])
    if isinstance(node, Var):
        return f"x[{node.index}]"
    if isinstance(node, Neg):
        return f"(-{rec(node.operand)})"
    if isinstance(node, BinOp):
        if node.op == "^":
            fn = "math.pow" if flavour == "math" else "_nppow"
            return f"{fn}({rec(node.left)}, {rec(node.right)})"
        return f"({rec(node.left)} {node.op} {rec(node.right)})"
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func][1 if flavour == "math" else 2]
        return f"{fn}({', '.join(rec(a) for a in node.args)})"
    raise TypeError(node)


def _nplog(a):
    a = np.asarray(a, dtype=float)
    with np.errstate(all="ignore"):
        return np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), np.nan)


def _npsqrt(a):
    a = np.asarray(a, dtype=float)
    with np.errstate(all="ignore"):
        return np.where(a >= 0, np.sqrt(np.abs(a)), np.nan)


def _nppow(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(all="ignore"):
        out = np.power(a, b)
    # match math.pow: a negative base needs an integral exponent
    bad = (a < 0) & (b != np.floor(b))
    return np.where(bad, np.nan, out)


_NS = {"math": math, "np": np, "_nplog": _nplog, "_npsqrt": _npsqrt, "_nppow": _nppow}


def pretty(node):
    """Fully parenthesised source that re-parses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(pretty(a) for a in node.args)})"
    raise TypeError(node)


def _free_vars(node, acc):
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, Neg):
        _free_vars(node.operand, acc)
    elif isinstance(node, BinOp):
        _free_vars(node.left, acc)
        _free_vars(node.right, acc)
    elif isinstance(node, Call):
        for a in node.args:
            _free_vars(a, acc)
    return acc


def default_step(x):
    """Central-difference step for first derivatives."""
    return EPS ** (1.0 / 3.0) * max(1.0, abs(x))


def default_step2(x):
    """Step for second (nested) derivatives."""
    return EPS ** 0.25 * max(1.0, abs(x))


class ExprField:
    """A parsed scalar expression over an ordered list of coordinate names."""

    __slots__ = ("source", "variables", "ast", "_scalar", "_vector", "is_constant", "_terms")

    def __init__(self, source, variables, ast):
        self.source = source
        self.variables = tuple(variables)
        self.ast = ast
        unknown = _free_vars(ast, set()) - set(self.variables)
        if unknown:
            raise UnknownIdentifierError(sorted(unknown)[0])
        self._scalar = eval(f"lambda x: {_codegen(ast, 'math')}", dict(_NS))
        self._vector = eval(f"lambda x: {_codegen(ast, 'numpy')}", dict(_NS))
        self.is_constant = not _free_vars(ast, set())
        self._terms = None

    def terms(self):
        """``(sign, field, free variables)`` for each top-level summand."""
        if self._terms is None:
            out = []
            for sign, node in _summands(self.ast):
                field = self if node is self.ast else ExprField(pretty(node), self.variables, node)
                out.append((sign, field, frozenset(_free_vars(node, set()))))
            self._terms = tuple(out)
        return self._terms

    def __repr__(self):
        return f"ExprField({self.source!r}, {list(self.variables)!r})"

    def __call__(self, point):
        return evaluate(self, point)

    def evaluate_many(self, points):
        """Evaluate at each row of ``points`` (shape ``(K, nvars)``)."""
        pts = np.asarray(points, dtype=float)
        with np.errstate(all="ignore"):
            out = self._vector(pts.T)
        out = np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:1]).copy()
        if not np.all(np.isfinite(out)):
            k = int(np.flatnonzero(~np.isfinite(out))[0])
            raise DomainError(f"non-finite value of {self.source!r}", pts[k])
        return out

    def to_source(self):
        return pretty(self.ast)

    def partial(self, point, i, step=None):
        return partial(self, point, i, step)

    def second_partial(self, point, i, j, step=None):
        return second_partial(self, point, i, j, step)


def parse(source, variables):
    if not source or not source.strip():
        raise ParseError("empty expression", 0, source)
    ast = _Parser(source, variables).parse()
    return ExprField(source, variables, ast)


def evaluate(f, point):
    x = [float(v) for v in point]
    if len(x) != len(f.variables):
        raise ValueError(f"expected {len(f.variables)} coordinates, got {len(x)}")
    try:
        value = f._scalar(x)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"cannot evaluate {f.source!r} ({exc})", x) from None
    if not math.isfinite(value):
        raise DomainError(f"non-finite value of {f.source!r}", x)
    return float(value)


def _shifted(point, i, h):
    """Points x +/- h e_i and the exactly representable steps actually taken."""
    xp = list(point)
    xm = list(point)
    xp[i] = point[i] + h
    xm[i] = point[i] - h
    return xp, xm, xp[i] - point[i], point[i] - xm[i]


def _summands(node, sign=1.0):
    """Split a chain of ``+``/``-`` into signed terms."""
    if isinstance(node, BinOp) and node.op in "+-":
        right = sign if node.op == "+" else -sign
        return _summands(node.left, sign) + _summands(node.right, right)
    return [(sign, node)]


def _termwise(f, i, one):
    """Apply the stencil ``one`` to each summand that depends on coordinate ``i``.

    Differencing a sum term by term keeps the rounding of large summands out
    of the difference quotient and makes the result linear in the summands.
    """
    name = f.variables[i]
    total = 0.0
    for sign, term, free in f.terms():
        if name in free:
            total += sign * one(term, free)
    return total


def partial(f, point, i, step=None):
    """Central difference of ``f`` along coordinate ``i``, summand by summand."""
    x = [float(v) for v in point]
    h = default_step(x[i]) if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    if f.is_constant:
        return 0.0
    xp, xm, hp, hm = _shifted(x, i, h)
    return _termwise(f, i, lambda t, _free: (evaluate(t, xp) - evaluate(t, xm)) / (hp + hm))


def second_partial(f, point, i, j, step=None):
    """Nested central difference for d^2 f / dx_i dx_j, summand by summand."""
    x = [float(v) for v in point]
    if f.is_constant:
        return 0.0
    if i == j:
        h = default_step2(x[i]) if step is None else float(step)
        xp, xm, hp, hm = _shifted(x, i, h)

        def one(t, _free):
            f0 = evaluate(t, x)
            return 2.0 * ((evaluate(t, xp) - f0) / hp - (f0 - evaluate(t, xm)) / hm) / (hp + hm)

        return _termwise(f, i, one)
    hi = default_step2(x[i]) if step is None else float(step)
    hj = default_step2(x[j]) if step is None else float(step)
    xp, xm, hip, him = _shifted(x, i, hi)
    pp, pm, hjp, hjm = _shifted(xp, j, hj)
    mp, mm, _, _ = _shifted(xm, j, hj)
    other = f.variables[j]

    def one(t, free):
        if other not in free:
            return 0.0
        num = evaluate(t, pp) - evaluate(t, pm) - evaluate(t, mp) + evaluate(t, mm)
        return num / ((hip + him) * (hjp + hjm))

    return _termwise(f, i, one)
