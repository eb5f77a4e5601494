"""Safe evaluation of clustering-resolution rules such as ``log(n)`` or ``2*sqrt(log(n))``."""

from __future__ import annotations

import ast
import math
import operator

from .errors import ConfigError

_FUNCS = {"log": math.log, "sqrt": math.sqrt, "exp": math.exp, "log2": math.log2, "log10": math.log10}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _check(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ConfigError(f"unsupported constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id != "n":
            raise ConfigError(f"unknown name {node.id!r}; only n is allowed")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError("unsupported operator")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords or len(node.args) != 1:
            raise ConfigError("only log, sqrt, exp, log2 and log10 of one argument are allowed")
        _check(node.args[0])
    else:
        raise ConfigError(f"unsupported syntax {type(node).__name__}")


def _eval(node: ast.AST, n: float) -> float:
    if isinstance(node, ast.Expression):
        return _eval(node.body, n)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return n
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, n), _eval(node.right, n))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, n)
        return -v if isinstance(node.op, ast.USub) else v
    return _FUNCS[node.func.id](_eval(node.args[0], n))


class LambdaRule:
    """Callable ``n -> lambda_n`` parsed from an arithmetic expression in ``n``."""

    def __init__(self, expression: str):
        try:
            tree = ast.parse(str(expression).strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse lambda rule {expression!r}") from exc
        _check(tree)
        self.expression = str(expression).strip()
        self._tree = tree

    def __call__(self, n: int) -> float:
        try:
            value = float(_eval(self._tree, float(n)))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"lambda rule {self.expression!r} failed at n={n}: {exc}") from exc
        if not math.isfinite(value) or value <= 0:
            raise ConfigError(f"lambda rule {self.expression!r} gives {value} at n={n}; must be positive")
        return value

    def __repr__(self) -> str:
        return f"LambdaRule({self.expression!r})"


def compile_lambda(expression: str) -> LambdaRule:
    return LambdaRule(expression)
