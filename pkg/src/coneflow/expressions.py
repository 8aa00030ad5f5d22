"""Elementary-function expression parsing for user-defined vector fields.

Grammar: +, -, *, /, ** (powers), unary minus, calls to sin/cos/tanh/exp,
names (state coordinates, inputs, parameters), numeric literals. Parsed with
the ast module and compiled once; no arbitrary code is evaluated.

Smoothness of user expressions is documented as a modelling obligation, not
verified here.
"""

from __future__ import annotations

import ast
import math
from typing import Dict, Sequence

import numpy as np

from .dynsys import ChartTopology, SystemDef, TimeKind
from .errors import InvalidInput
from .geometry import Cone, ConeField

_ALLOWED_CALLS = {"sin": math.sin, "cos": math.cos, "tanh": math.tanh, "exp": math.exp}
_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
    ast.Call,
    ast.Name,
    ast.Constant,
    ast.Load,
)


def _check_tree(tree: ast.AST, names):
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise InvalidInput(f"expression uses unsupported syntax: {ast.dump(node)[:60]}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_CALLS:
                raise InvalidInput("only sin/cos/tanh/exp calls are allowed")
            if node.keywords or len(node.args) != 1:
                raise InvalidInput("elementary functions take exactly one positional argument")
        if isinstance(node, ast.Name) and node.id not in names and node.id not in _ALLOWED_CALLS:
            raise InvalidInput(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise InvalidInput("only numeric literals are allowed")


def compile_expression(text: str, names: Sequence[str]):
    """Compile one scalar expression into a callable of the named variables."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise InvalidInput(f"cannot parse expression {text!r}: {exc.msg} (col {exc.offset})") from exc
    _check_tree(tree, set(names))
    code = compile(tree, filename="<expression>", mode="eval")
    scope = dict(_ALLOWED_CALLS)

    def evaluate(values: Dict[str, float]) -> float:
        return float(eval(code, {"__builtins__": {}}, {**scope, **values}))

    return evaluate


def system_from_expressions(
    state: Sequence[str],
    field_exprs: Sequence[str],
    params: Dict[str, float] | None = None,
    inputs: Sequence[str] = (),
    topology: Sequence[str] | None = None,
    cone: Cone | None = None,
    time_kind: TimeKind = TimeKind.CONTINUOUS,
    name: str = "expression system",
) -> SystemDef:
    """Assemble a SystemDef from expression strings (one per state coordinate)."""
    state = list(state)
    inputs = list(inputs)
    params = dict(params or {})
    n = len(state)
    if len(field_exprs) != n:
        raise InvalidInput(f"{n} state coordinates but {len(field_exprs)} field expressions")
    if set(state) & set(inputs) or set(state) & set(params) or set(inputs) & set(params):
        raise InvalidInput("state, input, and parameter names must be disjoint")
    names = state + inputs + list(params)
    compiled = [compile_expression(src, names) for src in field_exprs]

    def field(x, u):
        values = dict(zip(state, x))
        values.update(params)
        if inputs:
            values.update(zip(inputs, u))
        return np.array([fn(values) for fn in compiled])

    topo = ChartTopology.from_names(topology) if topology else ChartTopology.lines(n)
    if topo.dim != n:
        raise InvalidInput("topology length differs from state dimension")
    cf = ConeField.constant(cone) if cone is not None else ConeField.constant(Cone.orthant(n))
    return SystemDef(
        time_kind=time_kind,
        dim=n,
        field=field,
        topology=topo,
        cone_field=cf,
        jacobian=None,  # finite differences; expressions stay opaque
        input_dim=len(inputs),
        name=name,
    )
