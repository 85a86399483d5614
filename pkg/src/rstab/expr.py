"""
Arithmetic expressions of one variable ``t`` from config strings.

Grammar: numbers, the identifier ``t``, named parameters, ``pi``, ``e``,
``+ - * /``, ``^`` or ``**`` for powers, and the functions listed in
FUNCTIONS. Parsing goes through Python's ``ast`` with a whitelist, then
into sympy so derivatives are exact.
"""

from __future__ import annotations

import ast
from typing import Mapping

import numpy as np
import sympy as sp

T = sp.Symbol("t", real=True)

FUNCTIONS = {
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "sech": sp.sech,
}
CONSTANTS = {"pi": sp.pi, "e": sp.E}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    pass


class Expr:
    """A scalar function of t with exact symbolic derivatives."""

    def __init__(self, sym: sp.Expr, text: str | None = None):
        self.sym = sp.sympify(sym)
        self.text = text if text is not None else str(self.sym)
        self._fn = sp.lambdify(T, self.sym, modules="numpy")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self._fn(t), dtype=float), t.shape).copy()

    def diff(self, order: int = 1) -> "Expr":
        return Expr(sp.diff(self.sym, T, order))

    def __repr__(self):
        return f"Expr({self.text!r})"


def _convert(node, params):
    if isinstance(node, ast.Expression):
        return _convert(node.body, params)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return sp.Float(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
    if isinstance(node, ast.Name):
        if node.id == "t":
            return T
        if node.id in params:
            return sp.Float(params[node.id])
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise ExpressionError(f"unknown identifier {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _convert(node.operand, params)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_convert(node.left, params), _convert(node.right, params))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        if len(node.args) != 1:
            raise ExpressionError(f"{node.func.id} takes one argument")
        return fn(_convert(node.args[0], params))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse(text: str, params: Mapping[str, float] | None = None) -> Expr:
    try:
        # '^' binds looser than '+' in Python, so rewrite it before parsing
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return Expr(_convert(tree, dict(params or {})), text.strip())


def as_expr(value, params: Mapping[str, float] | None = None) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value, params)
    if isinstance(value, (int, float)):
        return Expr(sp.Float(value))
    raise TypeError(f"cannot interpret {value!r} as an expression of t")
