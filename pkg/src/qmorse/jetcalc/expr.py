"""Expression trees for smooth test functions and a recursive-descent parser.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | factor
    factor := base ('^' integer)?
    base   := number | 'x' integer | '(' expr ')' | ('sin' | 'cos' | 'exp') '(' expr ')'

The ``unary`` rule is an extension so that ``-x1^2`` reads as ``-(x1^2)``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import ball_grid
from .jets import Jet, jet_space


class ParseError(ValueError):
    """Malformed expression; ``position`` is the character offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class SpecError(ValueError):
    """A function specification that parses but violates a load-time invariant."""


# --------------------------------------------------------------------------
# tree


class Node:
    def jet(self, xs: list[Jet]) -> Jet:
        raise NotImplementedError

    def evaluate(self, x, lib=math):
        """Plain evaluation with ``lib`` supplying sin/cos/exp (math or mpmath)."""
        raise NotImplementedError

    def variables(self) -> set[int]:
        return set()

    def denominators(self) -> list["Node"]:
        return []


@dataclass(frozen=True)
class Num(Node):
    value: float

    def jet(self, xs):
        return Jet.constant(xs[0].space, self.value, xs[0].npts)

    def evaluate(self, x, lib=math):
        return self.value

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based, as written

    def jet(self, xs):
        return xs[self.index - 1]

    def evaluate(self, x, lib=math):
        return x[self.index - 1]

    def variables(self):
        return {self.index}

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def jet(self, xs):
        return -self.arg.jet(xs)

    def evaluate(self, x, lib=math):
        return -self.arg.evaluate(x, lib)

    def variables(self):
        return self.arg.variables()

    def denominators(self):
        return self.arg.denominators()

    def __str__(self):
        return f"(-{self.arg})"


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def jet(self, xs):
        return _BINOPS[self.op](self.left.jet(xs), self.right.jet(xs))

    def evaluate(self, x, lib=math):
        return _BINOPS[self.op](self.left.evaluate(x, lib), self.right.evaluate(x, lib))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def denominators(self):
        own = [self.right] if self.op == "/" else []
        return own + self.left.denominators() + self.right.denominators()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int

    def jet(self, xs):
        return self.base.jet(xs) ** self.exponent

    def evaluate(self, x, lib=math):
        return self.base.evaluate(x, lib) ** self.exponent

    def variables(self):
        return self.base.variables()

    def denominators(self):
        extra = [self.base] if self.exponent < 0 else []
        return extra + self.base.denominators()

    def __str__(self):
        return f"({self.base}^{self.exponent})"


@dataclass(frozen=True)
class Call(Node):
    name: str
    arg: Node

    def jet(self, xs):
        return getattr(self.arg.jet(xs), self.name)()

    def evaluate(self, x, lib=math):
        return getattr(lib, self.name)(self.arg.evaluate(x, lib))

    def variables(self):
        return self.arg.variables()

    def denominators(self):
        return self.arg.denominators()

    def __str__(self):
        return f"{self.name}({self.arg})"


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x(?P<vidx>\d+))"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)
_FUNCTIONS = ("sin", "cos", "exp")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        start = m.end() - len(m.group(0).lstrip())
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), start))
        elif m.group("var") is not None:
            tokens.append(("var", int(m.group("vidx")), start))
        elif m.group("name") is not None:
            if m.group("name") not in _FUNCTIONS:
                raise ParseError(f"unknown identifier {m.group('name')!r}", start)
            tokens.append(("name", m.group("name"), start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text.rstrip()) if text.strip() else len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
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
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.factor()

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                raise ParseError("exponent must be an integer", pos)
            node = Pow(node, sign * int(val))
        return node

    def base(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "var":
            if val > self.dim:
                raise ParseError(f"variable index x{val} exceeds dim {self.dim}", pos)
            if val < 1:
                raise ParseError(f"variable indices start at x1, got x{val}", pos)
            return Var(val)
        if kind == "name":
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(val, arg)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


# --------------------------------------------------------------------------
# function specification


@dataclass(frozen=True)
class FunctionSpec:
    """A smooth function on the closed ball of radius ``domain_radius`` in R^dim."""

    dim: int
    order: int
    tree: Node
    domain_radius: float = 1.0
    source: str = field(default="", compare=False)

    def jets(self, points: np.ndarray, order: int) -> Jet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        xs = Jet.variables(jet_space(self.dim, order), points)
        return self.tree.jet(xs)

    def __call__(self, x) -> float:
        return float(self.jets(np.asarray(x, dtype=float)[None, :], 0).value[0])

    def to_json(self) -> dict:
        return {"dim": self.dim, "k": self.order, "expr": self.source, "domain_radius": self.domain_radius}


def parse(text: str, dim: int, k: int, domain_radius: float = 1.0, *, check_grid: int = 33) -> FunctionSpec:
    """Parse ``text`` into a :class:`FunctionSpec` on the ball of radius ``domain_radius``.

    Raises :class:`ParseError` for malformed input (with character offset) and
    :class:`SpecError` for ``k < 3``, a bad dimension, or a denominator that
    vanishes (or changes sign) on a sampling grid of the closed ball.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    if dim < 1:
        raise SpecError(f"dim must be positive, got {dim}")
    if k < 3:
        raise SpecError(f"smoothness order k must be >= 3, got {k}")
    if not domain_radius > 0:
        raise SpecError(f"domain_radius must be positive, got {domain_radius}")
    tree = _Parser(text, dim).parse()
    spec = FunctionSpec(dim, k, tree, float(domain_radius), text)
    _check_denominators(spec, check_grid)
    return spec


def _check_denominators(spec: FunctionSpec, res: int) -> None:
    dens = spec.tree.denominators()
    if not dens:
        return
    pts = ball_grid(spec.dim, res, spec.domain_radius)
    space = jet_space(spec.dim, 0)
    xs = Jet.variables(space, pts)
    for den in dens:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = den.jet(xs).value
        if not np.all(np.isfinite(vals)) or np.min(np.abs(vals)) < 1e-12 or (vals.min() < 0 < vals.max()):
            raise SpecError(f"denominator {den} vanishes on the domain ball")


def load_spec(path) -> FunctionSpec:
    """Read a JSON function-spec file ``{"dim", "k", "expr", "domain_radius"}``."""
    return spec_from_json(json.loads(Path(path).read_text()))


def spec_from_json(obj) -> FunctionSpec:
    if not isinstance(obj, dict) or not {"dim", "k", "expr"} <= obj.keys():
        raise SpecError("function spec must be an object with dim, k, expr")
    return parse(str(obj["expr"]), int(obj["dim"]), int(obj["k"]), float(obj.get("domain_radius", 1.0)))
