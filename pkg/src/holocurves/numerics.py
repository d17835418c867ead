"""Entire-function expression trees, Taylor jets and polynomial interpolation.

Expressions are immutable DAGs.  Evaluation memoizes on node identity, so
subtrees shared by composition (curve components pushed through several
automorphisms) are computed once per call.  Everything accepts scalars or
numpy arrays of complex sample points.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXP_LIMIT = 700.0
MAX_INTERP_DEGREE = 64


class ExprOverflowError(ArithmeticError):
    def __init__(self, path: str, value: float):
        super().__init__(f"exponent real part {value:.4g} exceeds {EXP_LIMIT} at {path}")
        self.path = path
        self.value = value


class DegenerateNodesError(ValueError):
    pass


class ArityError(ValueError):
    pass


# --------------------------------------------------------------------------
# nodes


class Node:
    __slots__ = ()


@dataclass(frozen=True, eq=False)
class Const(Node):
    value: complex


@dataclass(frozen=True, eq=False)
class Var(Node):
    index: int


@dataclass(frozen=True, eq=False)
class Add(Node):
    args: tuple


@dataclass(frozen=True, eq=False)
class Mul(Node):
    args: tuple


@dataclass(frozen=True, eq=False)
class Neg(Node):
    arg: Node


@dataclass(frozen=True, eq=False)
class Exp(Node):
    arg: Node


@dataclass(frozen=True, eq=False)
class Poly(Node):
    coeffs: tuple  # ascending powers
    arg: Node

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("Poly needs at least one coefficient")


def _children(node: Node) -> tuple:
    if isinstance(node, (Add, Mul)):
        return node.args
    if isinstance(node, (Neg, Exp, Poly)):
        return (node.arg,)
    return ()


class EntireExpr:
    """An entire function of ``arity`` complex variables."""

    __slots__ = ("root", "arity")

    def __init__(self, root: Node, arity: int):
        self.root = root
        self.arity = arity
        for node in _walk(root):
            if isinstance(node, Var) and not 0 <= node.index < arity:
                raise ArityError(f"Var({node.index}) outside arity {arity}")

    # constructors
    @classmethod
    def const(cls, c, arity: int = 1) -> "EntireExpr":
        return cls(Const(complex(c)), arity)

    @classmethod
    def var(cls, i: int = 0, arity: int = 1) -> "EntireExpr":
        return cls(Var(i), arity)

    @classmethod
    def poly(cls, coeffs, arg: "EntireExpr | None" = None, arity: int = 1) -> "EntireExpr":
        if arg is None:
            arg = cls.var(0, arity)
        return cls(Poly(tuple(complex(c) for c in coeffs), arg.root), arg.arity)

    def _lift(self, other) -> "EntireExpr":
        if isinstance(other, EntireExpr):
            if other.arity != self.arity:
                raise ArityError(f"arity {other.arity} != {self.arity}")
            return other
        return EntireExpr.const(other, self.arity)

    def __add__(self, other):
        o = self._lift(other)
        return EntireExpr(Add((self.root, o.root)), self.arity)

    __radd__ = __add__

    def __mul__(self, other):
        o = self._lift(other)
        return EntireExpr(Mul((self.root, o.root)), self.arity)

    __rmul__ = __mul__

    def __neg__(self):
        return EntireExpr(Neg(self.root), self.arity)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def exp(self) -> "EntireExpr":
        return EntireExpr(Exp(self.root), self.arity)

    def __call__(self, *z):
        return eval_expr(self, list(z))

    def __repr__(self):
        return f"EntireExpr(arity={self.arity}, nodes={node_count(self)})"

    def to_json(self) -> dict:
        return expr_to_json(self)

    @classmethod
    def from_json(cls, data: dict) -> "EntireExpr":
        return expr_from_json(data)


def _walk(root: Node):
    seen = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(_children(node))


def node_count(expr: EntireExpr) -> int:
    return sum(1 for _ in _walk(expr.root))


def is_entire(expr: EntireExpr) -> bool:
    """Structural check: only the entire node kinds occur."""
    kinds = (Const, Var, Add, Mul, Neg, Exp, Poly)
    return all(isinstance(n, kinds) for n in _walk(expr.root))


def nonvanishing(expr: EntireExpr) -> bool:
    """True when the tree is a product of exponentials and non-zero constants.

    Such a function has no zeros anywhere, which certifies avoidance of a
    coordinate hyperplane without sampling.
    """
    def rec(node):
        if isinstance(node, Exp):
            return True
        if isinstance(node, Const):
            return node.value != 0
        if isinstance(node, Mul):
            return all(rec(a) for a in node.args)
        if isinstance(node, Neg):
            return rec(node.arg)
        return False

    return rec(expr.root)


def substitute(expr: EntireExpr, args: Sequence[EntireExpr]) -> EntireExpr:
    """Compose: replace Var(i) by ``args[i]``.  Shared subtrees stay shared."""
    if len(args) != expr.arity:
        raise ArityError(f"expected {expr.arity} arguments, got {len(args)}")
    arity = args[0].arity if args else 1
    memo: dict[int, Node] = {}

    def rec(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = args[node.index].root
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Add):
            out = Add(tuple(rec(a) for a in node.args))
        elif isinstance(node, Mul):
            out = Mul(tuple(rec(a) for a in node.args))
        elif isinstance(node, Neg):
            out = Neg(rec(node.arg))
        elif isinstance(node, Exp):
            out = Exp(rec(node.arg))
        elif isinstance(node, Poly):
            out = Poly(node.coeffs, rec(node.arg))
        else:
            raise TypeError(node)
        memo[key] = out
        return out

    with _deep():
        return EntireExpr(rec(expr.root), arity)


# --------------------------------------------------------------------------
# evaluation


class _deep:
    """Raise the recursion limit while walking deep composition chains."""

    def __enter__(self):
        self.old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(self.old, 50000))

    def __exit__(self, *exc):
        sys.setrecursionlimit(self.old)


def _check_exp(arg, path, mask=False):
    """Guard an Exp argument; in mask mode offending entries become NaN."""
    if np.size(arg) == 0:
        return arg
    re = np.real(arg)
    if mask:
        bad = ~np.isfinite(re) | (np.abs(re) > EXP_LIMIT)
        return np.where(bad, np.nan, arg) if np.any(bad) else arg
    worst = np.max(np.abs(re)) if np.ndim(re) else abs(re)
    if not np.isfinite(worst) or worst > EXP_LIMIT:
        raise ExprOverflowError(path, float(worst))
    return arg


def _check_finite(val, path, mask=False):
    if mask:
        return np.where(np.isfinite(val), val, np.nan) if not np.all(np.isfinite(val)) else val
    if not np.all(np.isfinite(val)):
        raise ExprOverflowError(path, float("inf"))
    return val


def eval_expr(expr: EntireExpr, z: Sequence, mask: bool = False) -> complex | np.ndarray:
    """Evaluate ``expr`` at ``z`` (one scalar or array per input variable).

    With ``mask`` set, points whose evaluation overflows come back as NaN
    instead of raising.
    """
    if len(z) != expr.arity:
        raise ArityError(f"expected {expr.arity} inputs, got {len(z)}")
    # scalars stay numpy scalars: numpy multiplies 0-d arrays with a different
    # kernel, which would make values differ from jet entries in the last bit
    zs = [np.complex128(v) if np.ndim(v) == 0 else np.asarray(v, dtype=complex) for v in z]
    memo: dict[int, np.ndarray] = {}

    def rec(node, path):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = np.complex128(node.value)
        elif isinstance(node, Var):
            out = zs[node.index]
        elif isinstance(node, Add):
            out = rec(node.args[0], path + "/add[0]")
            for i, a in enumerate(node.args[1:], 1):
                out = out + rec(a, f"{path}/add[{i}]")
        elif isinstance(node, Mul):
            out = rec(node.args[0], path + "/mul[0]")
            for i, a in enumerate(node.args[1:], 1):
                out = out * rec(a, f"{path}/mul[{i}]")
        elif isinstance(node, Neg):
            out = -rec(node.arg, path + "/neg")
        elif isinstance(node, Exp):
            arg = _check_exp(rec(node.arg, path + "/exp"), path + "/exp", mask)
            out = np.exp(arg)
        elif isinstance(node, Poly):
            x = rec(node.arg, path + "/poly")
            out = np.complex128(node.coeffs[-1]) + 0 * x
            for c in reversed(node.coeffs[:-1]):
                out = out * x + c
        else:
            raise TypeError(node)
        out = _check_finite(out, path, mask)
        memo[key] = out
        return out

    with _deep(), np.errstate(all="ignore"):
        out = rec(expr.root, "root")
    if not zs or all(np.ndim(v) == 0 for v in zs):
        return complex(out)
    shape = np.broadcast(*zs).shape
    return np.broadcast_to(out, shape).copy()


# --------------------------------------------------------------------------
# Taylor jets


@dataclass(frozen=True)
class Jet:
    """Values of a function and its derivatives ``0..m`` at ``point``."""

    point: complex
    values: tuple

    @property
    def order(self) -> int:
        return len(self.values) - 1

    def to_json(self) -> dict:
        return {"point": cpair(self.point), "values": [cpair(v) for v in self.values]}

    @classmethod
    def from_json(cls, data: dict) -> "Jet":
        return cls(cfrom(data["point"]), tuple(cfrom(v) for v in data["values"]))


def _series_mul(a, b, order):
    out = np.zeros_like(a + b)
    for k in range(order + 1):
        acc = 0
        for j in range(k + 1):
            acc = acc + a[j] * b[k - j]
        out[k] = acc
    return out


def eval_taylor(expr: EntireExpr, z, order: int, mask: bool = False) -> np.ndarray:
    """Truncated Taylor coefficients of a one-variable expression at ``z``.

    Returns an array of shape ``(order + 1,) + shape(z)``.
    """
    if expr.arity != 1:
        raise ArityError("jets need a one-variable expression")
    if order < 0:
        raise ValueError("order must be >= 0")
    z = np.asarray(z, dtype=complex)
    shape = (order + 1,) + z.shape
    memo: dict[int, np.ndarray] = {}

    def rec(node, path):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = np.zeros(shape, dtype=complex)
            out[0] = node.value
        elif isinstance(node, Var):
            out = np.zeros(shape, dtype=complex)
            out[0] = z
            if order >= 1:
                out[1] = 1.0
        elif isinstance(node, Add):
            out = rec(node.args[0], path + "/add[0]").copy()
            for i, a in enumerate(node.args[1:], 1):
                out = out + rec(a, f"{path}/add[{i}]")
        elif isinstance(node, Mul):
            out = rec(node.args[0], path + "/mul[0]")
            for i, a in enumerate(node.args[1:], 1):
                out = _series_mul(out, rec(a, f"{path}/mul[{i}]"), order)
        elif isinstance(node, Neg):
            out = -rec(node.arg, path + "/neg")
        elif isinstance(node, Exp):
            a = rec(node.arg, path + "/exp")
            if mask:
                a = a.copy()
                a[0] = _check_exp(a[0], path + "/exp", True)
            else:
                _check_exp(a[0], path + "/exp")
            out = np.zeros(shape, dtype=complex)
            out[0] = np.exp(a[0])
            for k in range(1, order + 1):
                acc = 0
                for j in range(1, k + 1):
                    acc = acc + j * a[j] * out[k - j]
                out[k] = acc / k
        elif isinstance(node, Poly):
            x = rec(node.arg, path + "/poly")
            out = np.zeros(shape, dtype=complex)
            out[0] = node.coeffs[-1]
            for c in reversed(node.coeffs[:-1]):
                out = _series_mul(out, x, order)
                out[0] = out[0] + c
        else:
            raise TypeError(node)
        out = _check_finite(out, path, mask)
        memo[key] = out
        return out

    with _deep(), np.errstate(all="ignore"):
        return rec(expr.root, "root")


def eval_jet(expr: EntireExpr, z: complex, order: int) -> Jet:
    coeffs = eval_taylor(expr, complex(z), order)
    return Jet(complex(z), tuple(complex(coeffs[k]) * math.factorial(k) for k in range(order + 1)))


def derivative_values(expr: EntireExpr, z, order: int = 1, mask: bool = False) -> np.ndarray:
    """``f^(order)`` at array ``z`` (vectorized convenience over eval_taylor)."""
    return eval_taylor(expr, z, order, mask)[order] * math.factorial(order)


# --------------------------------------------------------------------------
# interpolation


def _poly_from_roots(roots):
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.concatenate([[0], c]) - r * np.concatenate([c, [0]])
    return c  # ascending


def _deflate(c, r):
    """Divide ascending polynomial ``c`` by (u - r); exact remainder discarded."""
    n = len(c) - 1
    q = np.zeros(n, dtype=complex)
    acc = c[n]
    for k in range(n - 1, -1, -1):
        q[k] = acc
        acc = c[k] + r * acc
    return q


def _bary_coefficients(u, values):
    n = len(u)
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    full = _poly_from_roots(u)
    coeffs = np.zeros(n, dtype=complex)
    for i in range(n):
        coeffs += values[i] * w[i] * _deflate(full, u[i])
    return coeffs


def lagrange_interpolant(nodes, values) -> EntireExpr:
    """Interpolating polynomial of minimal degree through ``(nodes, values)``.

    The nodes are centred and scaled into the unit disc and the monomial
    coefficients there are assembled from the barycentric weights, followed by
    one step of residual correction.
    """
    z = np.asarray(nodes, dtype=complex).ravel()
    v = np.asarray(values, dtype=complex).ravel()
    if len(z) != len(v) or len(z) == 0:
        raise ValueError("need equally many nodes and values (at least one)")
    if len(z) > MAX_INTERP_DEGREE + 1:
        raise ValueError(f"interpolation degree capped at {MAX_INTERP_DEGREE}")
    if len(z) > 1:
        gaps = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < 1e-12:
            raise DegenerateNodesError(f"nodes closer than 1e-12 (min gap {gaps.min():.3g})")
    if len(z) == 1:
        return EntireExpr.const(v[0])
    center = z.mean()
    scale = float(np.max(np.abs(z - center)))
    u = (z - center) / scale
    coeffs = _bary_coefficients(u, v)
    resid = v - np.polyval(coeffs[::-1], u)
    coeffs = coeffs + _bary_coefficients(u, resid)
    x = EntireExpr.var(0)
    arg = (x - center) * (1.0 / scale) if center != 0 else x * (1.0 / scale)
    return EntireExpr.poly(coeffs, arg)


# --------------------------------------------------------------------------
# serialization


def cpair(c) -> list:
    c = complex(c)
    return [c.real, c.imag]


def cfrom(p) -> complex:
    if isinstance(p, (int, float)):
        return complex(p)
    return complex(p[0], p[1])


def expr_to_json(expr: EntireExpr) -> dict:
    order: list[Node] = []
    index: dict[int, int] = {}

    def visit(node):
        if id(node) in index:
            return
        for ch in _children(node):
            visit(ch)
        index[id(node)] = len(order)
        order.append(node)

    with _deep():
        visit(expr.root)

    nodes = []
    for node in order:
        if isinstance(node, Const):
            nodes.append({"op": "const", "value": cpair(node.value)})
        elif isinstance(node, Var):
            nodes.append({"op": "var", "index": node.index})
        elif isinstance(node, Add):
            nodes.append({"op": "add", "args": [index[id(a)] for a in node.args]})
        elif isinstance(node, Mul):
            nodes.append({"op": "mul", "args": [index[id(a)] for a in node.args]})
        elif isinstance(node, Neg):
            nodes.append({"op": "neg", "arg": index[id(node.arg)]})
        elif isinstance(node, Exp):
            nodes.append({"op": "exp", "arg": index[id(node.arg)]})
        elif isinstance(node, Poly):
            nodes.append({"op": "poly", "coeffs": [cpair(c) for c in node.coeffs],
                          "arg": index[id(node.arg)]})
    return {"arity": expr.arity, "nodes": nodes, "root": index[id(expr.root)]}


def expr_from_json(data: dict) -> EntireExpr:
    built: list[Node] = []
    for entry in data["nodes"]:
        op = entry["op"]
        if op == "const":
            node = Const(cfrom(entry["value"]))
        elif op == "var":
            node = Var(int(entry["index"]))
        elif op == "add":
            node = Add(tuple(built[i] for i in entry["args"]))
        elif op == "mul":
            node = Mul(tuple(built[i] for i in entry["args"]))
        elif op == "neg":
            node = Neg(built[entry["arg"]])
        elif op == "exp":
            node = Exp(built[entry["arg"]])
        elif op == "poly":
            node = Poly(tuple(cfrom(c) for c in entry["coeffs"]), built[entry["arg"]])
        else:
            raise ValueError(f"unknown op {op!r}")
        built.append(node)
    return EntireExpr(built[data["root"]], int(data["arity"]))
