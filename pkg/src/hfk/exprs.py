"""Tiny safe expression evaluator for user-supplied nonlinear maps.

System JSON files may describe nonlinear dynamics componentwise as
expressions over the step index `k`, states `x1..xn`, noises `w1..`,
disturbances `v1..` (and `xh1..` / `y1..` for filters), built from
+, -, *, /, ** and the calls sin, cos, pow.  Anything else is rejected
at load time, so untrusted model files cannot execute code.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

import numpy as np

from .model import Dims, NonlinearFilter, NonlinearStochasticSystem

_ALLOWED_CALLS = {"sin": math.sin, "cos": math.cos, "pow": pow}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call,
                  ast.Constant, ast.Name, ast.Load,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
                  ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    pass


def compile_expression(source: str, variables: Sequence[str]) -> Callable:
    """Compile one scalar expression into a function of a variable dict."""
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as err:
        raise ExpressionError(f"cannot parse {source!r}: {err}") from None
    allowed = set(variables)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(
                f"{type(node).__name__} is not allowed in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or \
                    node.func.id not in _ALLOWED_CALLS or node.keywords:
                raise ExpressionError(f"only sin/cos/pow calls are allowed: {source!r}")
        if isinstance(node, ast.Name) and node.id not in allowed \
                and node.id not in _ALLOWED_CALLS:
            raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant in {source!r}")
    code = compile(tree, "<expression>", "eval")

    def evaluate(values: dict) -> float:
        scope = dict(_ALLOWED_CALLS)
        scope.update(values)
        return float(eval(code, {"__builtins__": {}}, scope))

    return evaluate


def _vector_map(sources: Sequence[str], variables: Sequence[str]):
    funcs = [compile_expression(src, variables) for src in sources]

    def apply(values: dict) -> np.ndarray:
        return np.array([fn(values) for fn in funcs])

    return apply


def _names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(count)]


def nonlinear_system_from_json(doc: dict) -> NonlinearStochasticSystem:
    """Build a plant from componentwise expressions.

    Expected keys: dims, f (n_x expressions of k/x*/w*/v*), g (n_y of
    k/x*/v*), m (n_z of k/x*/v*).
    """
    dims = Dims.from_dict(doc["dims"])
    xs, ws, vs = _names("x", dims.n_x), _names("w", dims.n_w), _names("v", dims.n_v)
    f_map = _vector_map(doc["f"], ["k", *xs, *ws, *vs])
    g_map = _vector_map(doc["g"], ["k", *xs, *vs])
    m_map = _vector_map(doc["m"], ["k", *xs, *vs])

    def bind(names, vec):
        return dict(zip(names, np.asarray(vec, dtype=float).reshape(-1)))

    def f(k, x, w, v):
        values = {"k": float(k), **bind(xs, x), **bind(ws, w), **bind(vs, v)}
        return f_map(values)

    def g(k, x, v):
        values = {"k": float(k), **bind(xs, x), **bind(vs, v)}
        return g_map(values)

    def m(k, x, v):
        values = {"k": float(k), **bind(xs, x), **bind(vs, v)}
        return m_map(values)

    return NonlinearStochasticSystem(f=f, g=g, m=m, dims=dims)


def nonlinear_filter_from_json(doc: dict, n_y: int) -> NonlinearFilter:
    """Build a filter from componentwise expressions.

    Expected keys: n_state, f_hat (expressions of k/xh*), g_hat (of
    k/y*), m_hat (of k/xh*).
    """
    n_state = int(doc["n_state"])
    xhs, ys = _names("xh", n_state), _names("y", n_y)
    f_map = _vector_map(doc["f_hat"], ["k", *xhs])
    g_map = _vector_map(doc["g_hat"], ["k", *ys])
    m_map = _vector_map(doc["m_hat"], ["k", *xhs])

    def bind(names, vec):
        return dict(zip(names, np.asarray(vec, dtype=float).reshape(-1)))

    return NonlinearFilter(
        f_hat=lambda k, xh: f_map({"k": float(k), **bind(xhs, xh)}),
        g_hat=lambda k, y: g_map({"k": float(k), **bind(ys, y)}),
        m_hat=lambda k, xh: m_map({"k": float(k), **bind(xhs, xh)}),
        n_state=n_state)
