"""Tiny arithmetic expressions over (x, y) for speed and weight fields.

Supports numbers, the variables x and y, the constant pi, the operators
+ - * / and ^ (or **), parentheses, and the functions exp, cos, sin, abs,
sqrt.  Parsed expressions evaluate on numpy arrays.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ScenarioParseError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[()+\-*/^,]))"
)

_FUNCTIONS = {
    "exp": np.exp,
    "cos": np.cos,
    "sin": np.sin,
    "abs": np.abs,
    "sqrt": np.sqrt,
}
_CONSTANTS = {"pi": np.pi}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"unexpected character {text[pos:].strip()[0]!r}")
        if match.group("num") is not None:
            tokens.append(("num", float(match.group(0))))
        elif match.group("name") is not None:
            tokens.append(("name", match.group("name")))
        else:
            op = match.group("op")
            tokens.append(("op", "^" if op == "**" else op))
        pos = match.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, value = self.take()
        if kind != "op" or value != op:
            raise ValueError(f"expected {op!r}")

    def expression(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.term()
            node = (np.add if op == "+" else np.subtract, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            rhs = self.unary()
            node = (np.multiply if op == "*" else np.divide, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return (np.negative, self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return (np.power, base, self.unary())
        return base

    def atom(self):
        kind, value = self.take()
        if kind == "num":
            return ("const", value)
        if kind == "name":
            if value in ("x", "y"):
                return ("var", value)
            if value in _CONSTANTS:
                return ("const", _CONSTANTS[value])
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expression()
                self.expect_op(")")
                return (_FUNCTIONS[value], arg)
            raise ValueError(f"unknown name {value!r}")
        if kind == "op" and value == "(":
            node = self.expression()
            self.expect_op(")")
            return node
        raise ValueError("expected a number, variable, function, or parenthesis")


def _evaluate(node, x, y):
    head = node[0]
    if head == "const":
        return node[1]
    if head == "var":
        return x if node[1] == "x" else y
    args = [_evaluate(child, x, y) for child in node[1:]]
    return head(*args)


class Expression:
    """Parsed closed-form field f(x, y); callable on scalars or arrays."""

    def __init__(self, text):
        self.text = text.strip()
        try:
            parser = _Parser(_tokenize(self.text))
            self._root = parser.expression()
            if parser.peek() != ("end", None):
                raise ValueError("trailing input")
        except ValueError as exc:
            raise ValueError(f"bad expression {self.text!r}: {exc}") from exc

    def __call__(self, x, y):
        return np.broadcast_to(_evaluate(self._root, np.asarray(x, dtype=float),
                                         np.asarray(y, dtype=float)),
                               np.broadcast(np.asarray(x), np.asarray(y)).shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text, line=None):
    """Parse an expression, raising ScenarioParseError with a line number if given."""
    try:
        return Expression(text)
    except ValueError as exc:
        if line is None:
            raise
        raise ScenarioParseError(line, str(exc)) from exc
