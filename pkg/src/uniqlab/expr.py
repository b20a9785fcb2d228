"""Small vectorised arithmetic expression language for coefficient fields.

Expressions are written over the coordinates ``x1 .. xd`` (``x``, ``y``, ``z``
are accepted as aliases) and may use ``+ - * / ** ^``, the constants ``pi``
and ``e``, and the functions ``pow exp log sqrt abs min max``.  ``^`` means
exponentiation, as in most config files.

>>> f = compile_expression("x1^2 * (1 - x1)^2", dim=1)
>>> float(f(np.array([[0.5]]))[0])
0.0625
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ConfigError

_FUNCS: dict[str, Callable] = {
    "pow": np.power,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
_VARIADIC = {"min": np.minimum, "max": np.maximum}
_CONSTS = {"pi": np.pi, "e": np.e}
_ALIASES = {"x": "x1", "y": "x2", "z": "x3"}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _variable_names(dim: int) -> set[str]:
    names = {f"x{k + 1}" for k in range(dim)}
    names |= {a for a, t in _ALIASES.items() if t in names}
    return names


def _check(node: ast.AST, allowed: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, allowed)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, allowed)
        _check(node.right, allowed)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ConfigError("only unary +/- allowed")
        _check(node.operand, allowed)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ConfigError(f"bad literal {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in allowed and node.id not in _CONSTS:
            raise ConfigError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ConfigError("only plain function calls allowed")
        name = node.func.id
        if name in _FUNCS:
            want = 2 if name == "pow" else 1
            if len(node.args) != want:
                raise ConfigError(f"{name} takes {want} argument(s)")
        elif name in _VARIADIC:
            if len(node.args) < 2:
                raise ConfigError(f"{name} needs at least two arguments")
        else:
            raise ConfigError(f"unknown function {name!r}")
        for a in node.args:
            _check(a, allowed)
    else:
        raise ConfigError(f"unsupported syntax: {type(node).__name__}")


def _eval(node: ast.AST, env: dict[str, np.ndarray]):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        return env[_ALIASES.get(node.id, node.id)]
    # ast.Call, validated already
    name = node.func.id
    args = [_eval(a, env) for a in node.args]
    if name in _VARIADIC:
        out = args[0]
        for a in args[1:]:
            out = _VARIADIC[name](out, a)
        return out
    return _FUNCS[name](*args)


def compile_expression(text: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Parse ``text`` and return ``f(points) -> values`` for points of shape (n, dim)."""
    text = str(text).strip()
    try:
        # ^ must bind like ** (Python gives xor a lower precedence than *)
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check(tree, _variable_names(dim))

    def f(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        env = {f"x{k + 1}": points[:, k] for k in range(dim)}
        with np.errstate(all="ignore"):
            val = _eval(tree.body, env)
        return np.broadcast_to(np.asarray(val, dtype=float), (points.shape[0],)).copy()

    f.source = text
    return f
