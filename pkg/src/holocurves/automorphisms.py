"""Shear / overshear / affine automorphisms of C^n kept in factored form."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import (
    Add, Const, EntireExpr, Mul, Neg, Poly, Var,
    cfrom, cpair, eval_expr, substitute, _walk,
)


class SeparationError(RuntimeError):
    pass


class SingularMapError(ValueError):
    pass


def as_points(z) -> np.ndarray:
    """Coerce one point (shape (n,)) or many (shape (m, n)) to complex arrays."""
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def _others(n: int, axis: int) -> list[int]:
    return [i for i in range(n) if i != axis]


# --------------------------------------------------------------------------
# primitives


@dataclass(frozen=True, eq=False)
class Affine:
    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=complex))
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularMapError("affine matrix is (nearly) singular")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, z: np.ndarray) -> np.ndarray:
        return z @ self.matrix.T + self.shift

    def inverse(self) -> "Affine":
        inv = np.linalg.inv(self.matrix)
        return Affine(inv, -inv @ self.shift)

    def push(self, comps: list[EntireExpr]) -> list[EntireExpr]:
        out = []
        for i in range(self.n):
            terms = []
            for j, c in enumerate(comps):
                m = self.matrix[i, j]
                if m == 1:
                    terms.append(c.root)
                elif m != 0:
                    terms.append(Mul((Const(complex(m)), c.root)))
            if self.shift[i] != 0 or not terms:
                terms.append(Const(complex(self.shift[i])))
            root = terms[0] if len(terms) == 1 else Add(tuple(terms))
            out.append(EntireExpr(root, comps[0].arity))
        return out

    def to_json(self) -> dict:
        return {"kind": "affine", "matrix": [[cpair(v) for v in row] for row in self.matrix],
                "shift": [cpair(v) for v in self.shift]}


@dataclass(frozen=True, eq=False)
class Shear:
    """z_axis -> z_axis + f(other coordinates)."""

    n: int
    axis: int
    f: EntireExpr

    def __post_init__(self):
        if not 0 <= self.axis < self.n or self.f.arity != self.n - 1:
            raise ValueError("shear axis/arity mismatch")

    def apply(self, z: np.ndarray) -> np.ndarray:
        out = np.array(z, dtype=complex, copy=True)
        rest = [z[..., i] for i in _others(self.n, self.axis)]
        out[..., self.axis] = z[..., self.axis] + eval_expr(self.f, rest)
        return out

    def inverse(self) -> "Shear":
        return Shear(self.n, self.axis, -self.f)

    def push(self, comps):
        rest = [comps[i] for i in _others(self.n, self.axis)]
        out = list(comps)
        out[self.axis] = comps[self.axis] + substitute(self.f, rest)
        return out

    def to_json(self) -> dict:
        return {"kind": "shear", "axis": self.axis, "f": self.f.to_json()}


@dataclass(frozen=True, eq=False)
class Overshear:
    """z_axis -> z_axis * exp(f(other coordinates))."""

    n: int
    axis: int
    f: EntireExpr

    def __post_init__(self):
        if not 0 <= self.axis < self.n or self.f.arity != self.n - 1:
            raise ValueError("overshear axis/arity mismatch")

    def apply(self, z: np.ndarray) -> np.ndarray:
        out = np.array(z, dtype=complex, copy=True)
        rest = [z[..., i] for i in _others(self.n, self.axis)]
        val = eval_expr(self.f.exp(), rest)
        out[..., self.axis] = z[..., self.axis] * val
        return out

    def inverse(self) -> "Overshear":
        return Overshear(self.n, self.axis, -self.f)

    def push(self, comps):
        rest = [comps[i] for i in _others(self.n, self.axis)]
        out = list(comps)
        out[self.axis] = comps[self.axis] * substitute(self.f, rest).exp()
        return out

    def to_json(self) -> dict:
        return {"kind": "overshear", "axis": self.axis, "f": self.f.to_json()}


@dataclass(frozen=True, eq=False)
class ProductFlow:
    """(z_i, z_j) -> (z_i e^{g z_i z_j}, z_j e^{-g z_i z_j}); z_i z_j is invariant."""

    n: int
    i: int
    j: int
    gamma: float

    def apply(self, z: np.ndarray) -> np.ndarray:
        out = np.array(z, dtype=complex, copy=True)
        u = z[..., self.i] * z[..., self.j]
        x = EntireExpr.var(0).exp()
        out[..., self.i] = z[..., self.i] * eval_expr(x, [self.gamma * u])
        out[..., self.j] = z[..., self.j] * eval_expr(x, [-self.gamma * u])
        return out

    def inverse(self) -> "ProductFlow":
        return ProductFlow(self.n, self.i, self.j, -self.gamma)

    def push(self, comps):
        out = list(comps)
        u = comps[self.i] * comps[self.j]
        out[self.i] = comps[self.i] * (u * self.gamma).exp()
        out[self.j] = comps[self.j] * (u * (-self.gamma)).exp()
        return out

    def to_json(self) -> dict:
        return {"kind": "product_flow", "i": self.i, "j": self.j, "gamma": self.gamma}


PrimitiveAut = Affine | Shear | Overshear | ProductFlow


def primitive_from_json(data: dict, n: int):
    kind = data["kind"]
    if kind == "affine":
        return Affine(np.array([[cfrom(v) for v in row] for row in data["matrix"]]),
                      np.array([cfrom(v) for v in data["shift"]]))
    if kind == "shear":
        return Shear(n, int(data["axis"]), EntireExpr.from_json(data["f"]))
    if kind == "overshear":
        return Overshear(n, int(data["axis"]), EntireExpr.from_json(data["f"]))
    if kind == "product_flow":
        return ProductFlow(n, int(data["i"]), int(data["j"]), float(data["gamma"]))
    raise ValueError(f"unknown automorphism kind {kind!r}")


# --------------------------------------------------------------------------
# composites


@dataclass(frozen=True)
class CompositeAut:
    """Factors applied left to right; the empty list is the identity."""

    n: int
    factors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        for f in self.factors:
            if f.n != self.n:
                raise ValueError("factor dimension mismatch")

    @classmethod
    def identity(cls, n: int) -> "CompositeAut":
        return cls(n, ())

    def then(self, other: "CompositeAut | PrimitiveAut") -> "CompositeAut":
        """``other`` after ``self``."""
        extra = other.factors if isinstance(other, CompositeAut) else (other,)
        return CompositeAut(self.n, self.factors + tuple(extra))

    def __call__(self, z):
        return apply_aut(self, z)

    def push_curve(self, comps: list[EntireExpr]) -> list[EntireExpr]:
        for f in self.factors:
            comps = f.push(comps)
        return comps

    def to_json(self) -> dict:
        return {"n": self.n, "factors": [f.to_json() for f in self.factors]}

    @classmethod
    def from_json(cls, data: dict) -> "CompositeAut":
        n = int(data["n"])
        return cls(n, tuple(primitive_from_json(f, n) for f in data["factors"]))


def apply_aut(a: CompositeAut, z) -> np.ndarray:
    pts = as_points(z)
    if pts.shape[-1] != a.n:
        raise ValueError(f"point dimension {pts.shape[-1]} != {a.n}")
    for f in a.factors:
        pts = f.apply(pts)
    return pts


def invert_aut(a: CompositeAut) -> CompositeAut:
    return CompositeAut(a.n, tuple(f.inverse() for f in reversed(a.factors)))


# --------------------------------------------------------------------------
# hyperplane unions


@dataclass(frozen=True)
class HyperplaneUnion:
    """Union of complex hyperplanes {<normal, z> = offset} (bilinear pairing)."""

    n: int
    normals: tuple
    offsets: tuple
    normalized: bool = False

    def __post_init__(self):
        if len(self.normals) > self.n - 1:
            raise ValueError("at most n-1 hyperplanes")
        if self.normals:
            m = np.array(self.normals, dtype=complex)
            if np.linalg.matrix_rank(m, tol=1e-10) < len(self.normals):
                raise ValueError("hyperplane normals must be C-linearly independent")

    @classmethod
    def coordinate(cls, n: int, indices: Sequence[int]) -> "HyperplaneUnion":
        normals = []
        for i in indices:
            v = np.zeros(n, dtype=complex)
            v[i] = 1.0
            normals.append(tuple(v))
        return cls(n, tuple(normals), tuple(0j for _ in indices), True)

    @property
    def indices(self) -> list[int]:
        if not self.normalized:
            raise ValueError("hyperplane union is not in coordinate form")
        return [int(np.argmax(np.abs(v))) for v in self.normals]

    def values(self, z) -> np.ndarray:
        """Affine functionals <normal, z> - offset, shape (..., count)."""
        z = as_points(z)
        m = np.array(self.normals, dtype=complex).reshape(-1, self.n)
        return z @ m.T - np.array(self.offsets, dtype=complex)

    def distance(self, z) -> np.ndarray:
        if not self.normals:
            return np.full(as_points(z).shape[:-1], np.inf)
        m = np.array(self.normals, dtype=complex)
        return np.min(np.abs(self.values(z)) / np.linalg.norm(m, axis=1), axis=-1)

    def contains(self, z, tol: float = 0.0) -> np.ndarray:
        return self.distance(z) <= tol

    def sample(self, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
        """Points of the union inside the ball of ``radius`` (coordinate form)."""
        out = []
        idx = self.indices
        for k in range(count):
            v = rng.normal(size=self.n) + 1j * rng.normal(size=self.n)
            v *= radius * rng.uniform() ** (1 / (2 * self.n)) / np.linalg.norm(v)
            v[idx[k % len(idx)]] = 0
            out.append(v)
        return np.array(out)

    def to_json(self) -> dict:
        return {"type": "hyperplanes", "n": self.n,
                "hyperplanes": [{"normal": [cpair(c) for c in v], "offset": cpair(o)}
                                for v, o in zip(self.normals, self.offsets)],
                "normalized": self.normalized}

    @classmethod
    def from_json(cls, data: dict) -> "HyperplaneUnion":
        hs = data["hyperplanes"]
        return cls(int(data["n"]), tuple(tuple(cfrom(c) for c in h["normal"]) for h in hs),
                   tuple(cfrom(h["offset"]) for h in hs), bool(data.get("normalized", False)))


def _vanishes_on(node, var: int) -> bool:
    """Structural: the expression is identically zero where Var(var) = 0."""
    if isinstance(node, Var):
        return node.index == var
    if isinstance(node, Const):
        return node.value == 0
    if isinstance(node, Mul):
        return any(_vanishes_on(a, var) for a in node.args)
    if isinstance(node, Add):
        return all(_vanishes_on(a, var) for a in node.args)
    if isinstance(node, Neg):
        return _vanishes_on(node.arg, var)
    if isinstance(node, Poly):
        return node.coeffs[0] == 0 and _vanishes_on(node.arg, var)
    return False


def _uses_var(expr: EntireExpr) -> set:
    return {n.index for n in _walk(expr.root) if isinstance(n, Var)}


def fixes_hyperplanes(a: CompositeAut, H: HyperplaneUnion, samples: int = 200,
                      tol: float = 1e-9, seed: int = 0) -> bool:
    """Whether every factor of ``a`` fixes the coordinate hyperplanes of ``H`` pointwise."""
    if not H.normalized:
        raise ValueError("fixes_hyperplanes needs H in coordinate form")
    S = H.indices
    rng = np.random.default_rng(seed)
    for fac in a.factors:
        if isinstance(fac, (Shear, Overshear)):
            if isinstance(fac, Shear) and fac.axis in S and not _is_zero(fac.f):
                return False  # {z_axis = 0} is pushed to {z_axis = f}
            others = _others(a.n, fac.axis)
            for i in S:
                if i == fac.axis:
                    continue  # overshear multiplies z_axis, so {z_axis = 0} is kept
                pos = others.index(i)
                if _vanishes_on(fac.f.root, pos):
                    continue
                if not _sampled_fix(fac, H, i, samples, tol, rng):
                    return False
        elif isinstance(fac, ProductFlow):
            if fac.gamma != 0 and any(i not in (fac.i, fac.j) for i in S):
                return False
        else:
            for i in S:
                if not _sampled_fix(fac, H, i, samples, tol, rng):
                    return False
    return True


def _is_zero(expr):
    n = expr.root
    return isinstance(n, Const) and n.value == 0


def _sampled_fix(fac, H, i, samples, tol, rng) -> bool:
    pts = HyperplaneUnion.coordinate(H.n, [i]).sample(samples, 10.0, rng)
    try:
        img = fac.apply(pts)
    except ArithmeticError:
        return False
    return bool(np.max(np.abs(img - pts)) <= tol)


# --------------------------------------------------------------------------
# separating gadgets


def _min_gap(vals: np.ndarray) -> float:
    if len(vals) < 2:
        return np.inf
    d = np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def default_gamma_grid(count: int = 64) -> np.ndarray:
    return np.logspace(-4, 1, count)


def gamma_separation(points, candidates=None, min_gap: float = 1e-6):
    """Make second coordinates pairwise distinct with (z1 e^{g z1 z2}, z2 e^{-g z1 z2}).

    Returns ``(automorphism, gamma)``.  ``gamma = 0`` (identity) is used when
    the second coordinates are already separated.
    """
    pts = as_points(points).reshape(-1, 2)
    if _min_gap(pts[:, 1]) >= min_gap:
        return CompositeAut.identity(2), 0.0
    grid = default_gamma_grid() if candidates is None else np.asarray(candidates, float)
    best, best_gap = None, -1.0
    for g in grid:
        try:
            img = ProductFlow(2, 0, 1, float(g)).apply(pts)
        except ArithmeticError:
            continue
        gap = _min_gap(img[:, 1])
        if gap > best_gap:  # strict: ties keep the smaller gamma
            best, best_gap = float(g), gap
    if best is None or best_gap < min_gap:
        raise SeparationError(f"no gamma separates second coordinates (best gap {best_gap:.3g})")
    return CompositeAut(2, (ProductFlow(2, 0, 1, best),)), best


def product_families(points: np.ndarray) -> dict:
    """Products over every (n-1)-subset of coordinates, keyed by the omitted index."""
    n = points.shape[1]
    return {omit: np.prod(points[:, [i for i in range(n) if i != omit]], axis=1)
            for omit in range(n)}


def separation_overshear(n: int, axis: int, eps: float) -> Overshear:
    """w_axis = z_axis exp(prod(others) * (eps + sum_j eps^j z_j)), j over the others."""
    m = n - 1
    lin = [Const(complex(eps))]
    for k in range(m):
        lin.append(Mul((Const(complex(eps ** (k + 2))), Var(k))))
    prod = [Var(k) for k in range(m)]
    root = Mul(tuple(prod) + (Add(tuple(lin)),))
    return Overshear(n, axis, EntireExpr(root, m))


def product_separation(points, eps: float, min_gap: float = 1e-8,
                       max_halvings: int = 60) -> CompositeAut:
    """Overshears after which every family of (n-1)-fold coordinate products is
    pairwise distinct across ``points``.

    Families are handled in lexicographic order of their index sets; each is
    repaired by an overshear along its smallest index.  The overshear scale is
    halved until the displacement of the points stays within ``eps``.
    """
    pts = as_points(points)
    if pts.ndim == 1:
        pts = pts[None, :]
    m, n = pts.shape
    if np.any(pts == 0):
        raise ValueError("product separation needs non-zero coordinates")
    if m < 2:
        return CompositeAut.identity(n)

    def bad_families(p):
        fam = product_families(p)
        return [omit for omit in sorted(fam, reverse=True) if _min_gap(fam[omit]) < min_gap]

    if not bad_families(pts):
        return CompositeAut.identity(n)
    scale = float(eps)
    for _ in range(max_halvings):
        factors = []
        cur = pts
        ok = True
        for _pass in range(n):
            todo = bad_families(cur)
            if not todo:
                break
            for omit in todo:
                axis = min(i for i in range(n) if i != omit)
                fac = separation_overshear(n, axis, scale)
                try:
                    cur = fac.apply(cur)
                except ArithmeticError:
                    ok = False
                    break
                factors.append(fac)
            if not ok:
                break
        if ok and not bad_families(cur) and np.max(np.abs(cur - pts)) <= eps:
            return CompositeAut(n, tuple(factors))
        scale /= 2
    raise SeparationError("points not separable within the halving budget")
