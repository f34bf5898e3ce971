"""Small arithmetic-expression language for user-supplied scalar functions.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('+' | '-') unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Offsets reported in errors are 1-based columns into the source string.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ExprEvalError, ExprSyntaxError

FUNCTIONS = {
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "abs": 1,
    "pow": 2,
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float
    offset: int


@dataclass(frozen=True)
class Var:
    name: str
    offset: int


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"
    offset: int


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    offset: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    offset: int


Node = Union[Num, Var, Unary, Binary, Call]


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(src) + 1))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: tuple[str, ...]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.peek()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off, (value,))
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off, ("operator", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, off = self.take()
            node = Binary(op, node, self.term(), off)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, off = self.take()
            node = Binary(op, node, self.unary(), off)
        return node

    def unary(self):
        kind, text, off = self.peek()
        if kind == "op" and text in "+-":
            self.take()
            return Unary(text, self.unary(), off)
        return self.power()

    def power(self):
        base = self.primary()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return Binary("^", base, self.unary(), off)
        return base

    def primary(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text), off)
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", off, tuple(FUNCTIONS))
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", off)
                return Call(text, tuple(args), off)
            if text in CONSTANTS:
                return Num(CONSTANTS[text], off)
            if text in self.variables:
                return Var(text, off)
            raise ExprSyntaxError(f"unknown name {text!r}", off,
                                  tuple(self.variables) + tuple(CONSTANTS))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off, ("number", "name", "("))


def _eval(node: Node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        v = _eval(node.operand, env)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise ExprEvalError("division by zero", node.offset)
            return a / b
        return _power(a, b, node.offset)
    args = [_eval(a, env) for a in node.args]
    name = node.name
    if name == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise ExprEvalError("square root of a negative number", node.offset)
        return np.sqrt(args[0])
    if name == "pow":
        return _power(args[0], args[1], node.offset)
    return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name](args[0])


def _power(a, b, offset):
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise ExprEvalError("negative base with non-integer exponent", offset)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise ExprEvalError("zero raised to a negative power", offset)
    with np.errstate(over="ignore"):
        return np.power(a, b)


@dataclass(frozen=True)
class ExprAst:
    source: str
    root: Node
    variables: tuple

    def evaluate(self, **values):
        missing = set(self.variables) - set(values)
        if missing:
            raise TypeError(f"missing value(s) for {sorted(missing)}")
        env = {k: np.asarray(v, dtype=float) for k, v in values.items()}
        out = _eval(self.root, env)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values()))
        out = np.broadcast_to(np.asarray(out, dtype=float), shape).astype(float)
        return float(out) if out.ndim == 0 else out

    def as_function(self):
        """One-variable callable for expressions over a single variable."""
        if len(self.variables) != 1:
            raise ValueError("as_function needs exactly one declared variable")
        name = self.variables[0]

        def fn(x):
            return self.evaluate(**{name: x})

        fn.__doc__ = self.source
        return fn


def parse_expr(src: str, variables=("t", "x")) -> ExprAst:
    """Parse ``src``; names in ``variables`` are free variables."""
    if not isinstance(src, str):
        src = str(src)
    return ExprAst(src, _Parser(src, tuple(variables)).parse(), tuple(variables))


def compile_function(src: str, variable: str):
    """Parse an expression in one variable and return a vectorised callable."""
    return parse_expr(src, (variable,)).as_function()
