"""
Closed-form expression grammar for right-hand sides and boundary data

Grammar: numbers, + - * / ^ (power), parentheses, variables x1..x3, constants pi and e,
named parameters supplied by the caller, and the functions listed in FUNCTIONS.
"""

import ast
from functools import reduce
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from core.exceptions import ExpressionError

VARIABLES = ("x1", "x2", "x3")

CONSTANTS = {"pi": np.pi, "e": np.e}


def _variadic(op):
    def apply(*args):
        if len(args) < 2:
            raise ExpressionError(f"{op.__name__} needs at least two arguments")
        return reduce(op, args)

    return apply


FUNCTIONS: Dict[str, Callable] = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arcsin": np.arcsin,
    "arccos": np.arccos,
    "arctan": np.arctan,
    "atan2": np.arctan2,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sign": np.sign,
    "pos": lambda a: np.maximum(a, 0.0),
    "min": _variadic(np.minimum),
    "max": _variadic(np.maximum),
}

_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_UNARY = {ast.USub: np.negative, ast.UAdd: np.positive}


class CompiledExpression:
    """Vectorized evaluator of a parsed expression"""

    def __init__(self, text: str, params: Optional[Mapping[str, float]] = None):
        self.text = text
        self.params = dict(params or {})
        clash = set(self.params) & (set(VARIABLES) | set(CONSTANTS) | set(FUNCTIONS))
        if clash:
            raise ExpressionError(f"parameter names shadow built-ins: {sorted(clash)}")
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as e:
            raise ExpressionError(f"cannot parse expression {text!r}: {e.msg}") from e
        self._tree = tree.body
        self.variables = sorted(self._validate(self._tree))

    def _validate(self, node) -> set:
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINARY:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            return self._validate(node.left) | self._validate(node.right)
        if isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            return self._validate(node.operand)
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                name = getattr(node.func, "id", "?")
                raise ExpressionError(f"unknown function {name!r} in {self.text!r}")
            if node.keywords:
                raise ExpressionError("keyword arguments are not allowed")
            used: set = set()
            for arg in node.args:
                used |= self._validate(arg)
            return used
        if isinstance(node, ast.Name):
            if node.id in VARIABLES:
                return {node.id}
            if node.id in CONSTANTS or node.id in self.params:
                return set()
            raise ExpressionError(f"unknown identifier {node.id!r} in {self.text!r}")
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return set()
        raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINARY[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](*(self._eval(a, env) for a in node.args))
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in self.params:
                return float(self.params[node.id])
            return CONSTANTS[node.id]
        return float(node.value)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = {}
        for name in self.variables:
            k = VARIABLES.index(name)
            if k >= pts.shape[1]:
                raise ExpressionError(f"{name} used in {self.text!r} but points are {pts.shape[1]}-dimensional")
            env[name] = pts[:, k]
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()


def compile_expression(text: str, params: Optional[Mapping[str, float]] = None) -> CompiledExpression:
    return CompiledExpression(text, params)
