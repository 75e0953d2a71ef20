"""Restricted closed-form expression grammar for fields and loads.

Expressions are written over the midsurface coordinates y1, y2 and the
thickness coordinate x3 with the operators +, -, *, /, ^ and the functions
sin, cos, exp, log.  They are parsed symbolically, validated against that
whitelist, differentiated exactly, and compiled to vectorized callables.
"""

import re

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (convert_xor, parse_expr,
                                        standard_transformations)

from .spaces import ScalarField

Y1, Y2, X3 = sympy.symbols("y1 y2 x3")

_ALLOWED_FUNCTIONS = {sympy.sin, sympy.cos, sympy.exp, sympy.log}
_ALLOWED_OPS = (sympy.Add, sympy.Mul, sympy.Pow, sympy.Symbol,
                sympy.Integer, sympy.Rational, sympy.Float)
_LOCALS = {"y1": Y1, "y2": Y2, "x3": X3,
           "sin": sympy.sin, "cos": sympy.cos,
           "exp": sympy.exp, "log": sympy.log,
           "pi": sympy.pi}


class ExpressionError(ValueError):
    pass


def parse_expression(text, variables=("y1", "y2")):
    """Parse and validate an expression over the named variables."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a nonempty string")
    if re.search(r"\.[A-Za-z_]|__", text):
        raise ExpressionError(
            f"expression {text!r} contains attribute access, which is not allowed")
    try:
        expr = parse_expr(text, local_dict=_LOCALS,
                          transformations=standard_transformations + (convert_xor,),
                          evaluate=True)
    except Exception as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from exc
    if not isinstance(expr, sympy.Basic):
        raise ExpressionError(f"expression {text!r} is not a scalar formula")
    allowed_syms = {_LOCALS[v] for v in variables}
    extra = expr.free_symbols - allowed_syms
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ExpressionError(f"expression {text!r} uses unknown symbols: {names}")
    for node in sympy.preorder_traversal(expr):
        if isinstance(node, sympy.Function):
            if node.func not in _ALLOWED_FUNCTIONS:
                raise ExpressionError(
                    f"function {node.func} is not in the allowed set "
                    "(sin, cos, exp, log)")
        elif not isinstance(node, _ALLOWED_OPS) and node not in (sympy.pi,
                                                                 sympy.E):
            if node.is_Number or node.is_NumberSymbol:
                continue
            raise ExpressionError(
                f"operation {type(node).__name__} is not allowed in {text!r}")
    return expr


def _lambdify(expr, variables):
    syms = [_LOCALS[v] for v in variables]
    fn = sympy.lambdify(syms, expr, "numpy")

    def wrapped(*args):
        out = fn(*args)
        return np.broadcast_to(np.asarray(out, dtype=float),
                               np.broadcast(*args).shape).copy() \
            if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    return wrapped


def compile_callable(text, variables=("y1", "y2")):
    """Compile an expression to a vectorized float callable."""
    return _lambdify(parse_expression(text, variables), variables)


def compile_scalar_field(text):
    """Compile a midsurface expression to a ScalarField with exact
    derivatives up to second order."""
    expr = parse_expression(text, ("y1", "y2"))
    d = {"value": expr,
         "d1": sympy.diff(expr, Y1), "d2": sympy.diff(expr, Y2),
         "d11": sympy.diff(expr, Y1, 2), "d22": sympy.diff(expr, Y2, 2),
         "d12": sympy.diff(expr, Y1, Y2)}
    vars2 = ("y1", "y2")
    return ScalarField(**{k: _lambdify(v, vars2) for k, v in d.items()})


def compile_profile(text):
    """Compile a one-variable profile f(y1) to (f, f', f'') callables,
    validating the cumulative-integral endpoint conditions structurally
    (f may not reference y2 or x3)."""
    expr = parse_expression(text, ("y1",))
    fns = [_lambdify(e, ("y1",)) for e in
           (expr, sympy.diff(expr, Y1), sympy.diff(expr, Y1, 2))]
    return tuple(fns)
