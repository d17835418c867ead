"""Planar regions, convex polyhedra in C^n = R^2n, and the LP/QP queries on them.

Real coordinates of z in C^n are ordered (Re z1, Im z1, Re z2, Im z2, ...).
A real functional u on R^2n is the real part of the complex functional
l_u(z) = sum_i (u[2i] - i u[2i+1]) z_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull

from .numerics import cfrom, cpair

SAMPLE_BUDGET = 10_000_000
FEAS_TOL = 1e-9


class RegionBudgetError(ValueError):
    pass


class GeometryError(RuntimeError):
    pass


class NormalizationError(GeometryError):
    pass


# --------------------------------------------------------------------------
# planar regions


class Region:
    def contains(self, z) -> np.ndarray:
        raise NotImplementedError

    def __contains__(self, z) -> bool:
        return bool(self.contains(np.asarray(z, dtype=complex)))

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))

    def __invert__(self):
        return Complement(self)

    def __sub__(self, other):
        return Intersection((self, Complement(other)))


@dataclass(frozen=True)
class HalfPlane(Region):
    """{Re(e^{-i theta} z) <= d}."""

    theta: float
    d: float

    def contains(self, z):
        return np.real(np.exp(-1j * self.theta) * np.asarray(z)) <= self.d

    def to_json(self):
        return {"type": "halfplane", "theta": self.theta, "d": self.d}


def re_at_most(x: float) -> HalfPlane:
    return HalfPlane(0.0, x)


def re_at_least(x: float) -> HalfPlane:
    return HalfPlane(math.pi, -x)


@dataclass(frozen=True)
class VStrip(Region):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("strip bounds must satisfy lo < hi")

    def contains(self, z):
        x = np.real(z)
        return (x >= self.lo) & (x <= self.hi)

    def to_json(self):
        return {"type": "vstrip", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Box(Region):
    """Rectangle; bounds may be infinite.  ``strict`` makes it the open box."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    strict: bool = False

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ValueError("box intervals must be non-degenerate")

    def contains(self, z):
        x, y = np.real(z), np.imag(z)
        if self.strict:
            return (x > self.re_lo) & (x < self.re_hi) & (y > self.im_lo) & (y < self.im_hi)
        return (x >= self.re_lo) & (x <= self.re_hi) & (y >= self.im_lo) & (y <= self.im_hi)

    def to_json(self):
        return {"type": "box", "re": [_jf(self.re_lo), _jf(self.re_hi)],
                "im": [_jf(self.im_lo), _jf(self.im_hi)], "strict": self.strict}


@dataclass(frozen=True)
class Disk(Region):
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) <= self.radius

    def to_json(self):
        return {"type": "disk", "center": cpair(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    def contains(self, z):
        out = np.zeros(np.shape(z), dtype=bool)
        for p in self.parts:
            out |= p.contains(z)
        return out

    def to_json(self):
        return {"type": "union", "parts": [p.to_json() for p in self.parts]}


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    def contains(self, z):
        out = np.ones(np.shape(z), dtype=bool)
        for p in self.parts:
            out &= p.contains(z)
        return out

    def to_json(self):
        return {"type": "intersection", "parts": [p.to_json() for p in self.parts]}


@dataclass(frozen=True)
class Complement(Region):
    part: Region

    def contains(self, z):
        return ~self.part.contains(z)

    def to_json(self):
        return {"type": "complement", "part": self.part.to_json()}


@dataclass(frozen=True)
class Mirror(Region):
    """{z : -conj(z) in part}, the reflection across the imaginary axis."""

    part: Region

    def contains(self, z):
        return self.part.contains(-np.conj(np.asarray(z)))

    def to_json(self):
        return {"type": "mirror", "part": self.part.to_json()}


def _jf(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _fj(x) -> float:
    return float(x)


def region_from_json(data: dict) -> Region:
    t = data["type"]
    if t == "halfplane":
        return HalfPlane(float(data["theta"]), float(data["d"]))
    if t == "vstrip":
        return VStrip(float(data["lo"]), float(data["hi"]))
    if t == "box":
        return Box(_fj(data["re"][0]), _fj(data["re"][1]), _fj(data["im"][0]),
                   _fj(data["im"][1]), bool(data.get("strict", False)))
    if t == "disk":
        return Disk(cfrom(data["center"]), float(data["radius"]))
    if t == "union":
        return Union(tuple(region_from_json(p) for p in data["parts"]))
    if t == "intersection":
        return Intersection(tuple(region_from_json(p) for p in data["parts"]))
    if t == "complement":
        return Complement(region_from_json(data["part"]))
    if t == "mirror":
        return Mirror(region_from_json(data["part"]))
    raise ValueError(f"unknown region type {t!r}")


def region_contains(r: Region, z) -> bool | np.ndarray:
    out = r.contains(np.asarray(z, dtype=complex))
    return bool(out) if np.ndim(out) == 0 else out


# comb sets; tooth j sits at height 7j


def comb_cell(j: int) -> Region:
    """{Re z <= -3, |Im z - 7j| <= 3}."""
    return Box(-math.inf, -3.0, 7 * j - 3.0, 7 * j + 3.0)


def comb_base(teeth: int) -> Region:
    """{Re z >= -1} minus the open teeth {Re z > 5, |Im z - 7j| < 1}, j = 1..teeth."""
    cuts = tuple(Box(5.0, math.inf, 7 * j - 1.0, 7 * j + 1.0, strict=True)
                 for j in range(1, teeth + 1))
    base = re_at_least(-1.0)
    return base - Union(cuts) if cuts else base


def comb_derivative_base(teeth: int) -> Region:
    """{Re z >= 0} minus the open teeth {Re z > 4, |Im z - 7j| < 2}."""
    cuts = tuple(Box(4.0, math.inf, 7 * j - 2.0, 7 * j + 2.0, strict=True)
                 for j in range(1, teeth + 1))
    base = re_at_least(0.0)
    return base - Union(cuts) if cuts else base


def comb_derivative_cells(count: int) -> Region:
    """Union over j = 1..count of {Re z <= -4, |Im z - 7j| <= 2}."""
    cells = tuple(Box(-math.inf, -4.0, 7 * j - 2.0, 7 * j + 2.0) for j in range(1, count + 1))
    return Union(cells)


def teeth_within(R: float) -> int:
    """Number of comb teeth that can meet the disc of radius R."""
    return max(0, int(math.ceil((R + 3.0) / 7.0)))


def lattice(R: float, h: float) -> np.ndarray:
    if not (R > 0 and h > 0):
        raise ValueError("radius and pitch must be positive")
    m = int(math.floor(R / h + 1e-9))
    if (2 * m + 1) ** 2 > SAMPLE_BUDGET:
        raise RegionBudgetError(f"sampling grid of {(2 * m + 1) ** 2} points exceeds budget")
    ticks = np.arange(-m, m + 1) * h
    z = (ticks[None, :] + 1j * ticks[:, None]).ravel()  # row-major: Im outer, Re inner
    return z[np.abs(z) <= R * (1 + 1e-12)]


def sample_region(r: Region, R: float, h: float) -> np.ndarray:
    z = lattice(R, h)
    return z[r.contains(z)]


# --------------------------------------------------------------------------
# convex polyhedra


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def realify(m) -> np.ndarray:
    """Real 2n x 2n matrix of the complex-linear map z -> M z."""
    m = np.asarray(m, dtype=complex)
    r = np.zeros((2 * m.shape[0], 2 * m.shape[1]))
    r[0::2, 0::2] = m.real
    r[0::2, 1::2] = -m.imag
    r[1::2, 0::2] = m.imag
    r[1::2, 1::2] = m.real
    return r


def functional_coeffs(u) -> np.ndarray:
    """Complex coefficients c with Re(c . z) = u . x."""
    u = np.asarray(u, dtype=float)
    return u[0::2] - 1j * u[1::2]


def times_i(u) -> np.ndarray:
    """Real functional of i * l_u."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[0::2] = u[1::2]
    out[1::2] = -u[0::2]
    return out


@dataclass(frozen=True)
class ConvexBody:
    """{x in R^2n : A x <= b}, rows normalized to unit length."""

    A: np.ndarray
    b: np.ndarray
    product: tuple | None = None  # (k, l): body is F x G with F in C^k, G in C^l
    empty: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0] or A.shape[1] % 2:
            raise ValueError("halfspace matrix must be m x 2n with m offsets")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero halfspace normal")
        object.__setattr__(self, "A", A / norms[:, None])
        object.__setattr__(self, "b", b / norms)
        if self.product is not None:
            k, l = self.product
            if k + l != self.n:
                raise ValueError("product split does not match dimension")
            object.__setattr__(self, "product", (int(k), int(l)))

    @property
    def n(self) -> int:
        return self.A.shape[1] // 2

    # constructors

    @classmethod
    def from_halfspaces(cls, rows: Sequence[tuple], product=None) -> "ConvexBody":
        return cls(np.array([r[0] for r in rows], float), np.array([r[1] for r in rows], float),
                   product)

    @classmethod
    def box(cls, lo, hi) -> "ConvexBody":
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        d = len(lo)
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def ball(cls, center, radius: float, directions: int = 24, seed: int = 0) -> "ConvexBody":
        """Polytope containing the Euclidean ball: tangent halfspaces along
        the coordinate axes and ``directions`` extra fixed unit vectors."""
        c = to_real(np.atleast_1d(np.asarray(center, dtype=complex)))
        d = len(c)
        rng = np.random.default_rng(seed)
        extra = rng.normal(size=(directions, d))
        U = np.vstack([np.eye(d), -np.eye(d), extra])
        U /= np.linalg.norm(U, axis=1)[:, None]
        return cls(U, U @ c + radius)

    @classmethod
    def hull(cls, points) -> "ConvexBody":
        """Convex hull of complex points (needs full real dimension)."""
        x = to_real(np.asarray(points, dtype=complex))
        h = ConvexHull(x, qhull_options="QJ")
        eq = h.equations
        return cls(eq[:, :-1], -eq[:, -1])

    @classmethod
    def complex_hyperplane(cls, normal, offset=0j) -> "ConvexBody":
        """{<normal, z> = offset} as four real inequalities."""
        c = np.asarray(normal, dtype=complex)
        # Re(c.z) = u.x with u = (Re c, -Im c) interleaved
        u = np.empty(2 * len(c))
        u[0::2], u[1::2] = c.real, -c.imag
        v = times_i(u)
        o = complex(offset)
        return cls(np.vstack([u, -u, v, -v]),
                   np.array([o.real, -o.real, (1j * o).real, -(1j * o).real]))

    @classmethod
    def product_of(cls, F: "ConvexBody", G: "ConvexBody") -> "ConvexBody":
        k, l = F.n, G.n
        A = np.zeros((F.A.shape[0] + G.A.shape[0], 2 * (k + l)))
        A[: F.A.shape[0], : 2 * k] = F.A
        A[F.A.shape[0]:, 2 * k:] = G.A
        return cls(A, np.concatenate([F.b, G.b]), (k, l))

    # transformations

    def inflate(self, delta: float) -> "ConvexBody":
        return ConvexBody(self.A, self.b + delta, self.product)

    def translate(self, shift) -> "ConvexBody":
        return ConvexBody(self.A, self.b + self.A @ to_real(np.asarray(shift, complex)),
                          self.product)

    def image(self, matrix, shift) -> "ConvexBody":
        """Image under z -> M z + t."""
        minv = realify(np.linalg.inv(np.asarray(matrix, dtype=complex)))
        A = self.A @ minv
        return ConvexBody(A, self.b + A @ to_real(np.asarray(shift, complex)))

    def minkowski_box(self, shift, half_width: float) -> "ConvexBody":
        """Outer description of (self + shift) + complex box of the given half width."""
        moved = self.translate(shift)
        return ConvexBody(moved.A, moved.b + half_width * np.abs(moved.A).sum(axis=1),
                          self.product)

    def factors(self) -> tuple["ConvexBody", "ConvexBody"]:
        k, l = self.product
        first = np.all(self.A[:, 2 * k:] == 0, axis=1)
        return (ConvexBody(self.A[first, : 2 * k], self.b[first]),
                ConvexBody(self.A[~first, 2 * k:], self.b[~first]))

    # queries

    def slack(self, z) -> np.ndarray:
        """max_i (a_i . x - b_i) for complex points z of shape (..., n)."""
        return np.max(to_real(z) @ self.A.T - self.b, axis=-1)

    def contains(self, z, tol: float = FEAS_TOL) -> np.ndarray:
        return self.slack(z) <= tol

    def distance_lower_bound(self, z) -> np.ndarray:
        """Rigorous lower bound on Euclidean distance (largest violated halfspace)."""
        if self.product is not None:
            F, G = self.factors()
            k = self.product[0]
            z = np.asarray(z, dtype=complex)
            d1 = np.maximum(F.slack(z[..., :k]), 0)
            d2 = np.maximum(G.slack(z[..., k:]), 0)
            return np.hypot(d1, d2)
        return np.maximum(self.slack(z), 0)

    def feasible_point(self) -> np.ndarray | None:
        res = linprog(np.zeros(self.A.shape[1]), A_ub=self.A, b_ub=self.b,
                      bounds=[(None, None)] * self.A.shape[1], method="highs")
        return res.x if res.status == 0 else None

    def is_empty(self) -> bool:
        return self.empty or self.feasible_point() is None

    def support(self, u) -> float:
        """sup over the body of u . x (inf if unbounded)."""
        res = linprog(-np.asarray(u, float), A_ub=self.A, b_ub=self.b,
                      bounds=[(None, None)] * self.A.shape[1], method="highs")
        if res.status == 3:
            return math.inf
        if res.status != 0:
            raise GeometryError(f"support LP failed: {res.message}")
        return float(-res.fun)

    def to_json(self) -> dict:
        prod = None if self.product is None else {"k": self.product[0], "l": self.product[1]}
        return {"halfspaces": [{"u": [float(v) for v in a], "d": float(d)}
                               for a, d in zip(self.A, self.b)],
                "product": prod}

    @classmethod
    def from_json(cls, data: dict) -> "ConvexBody":
        hs = data["halfspaces"]
        prod = data.get("product")
        return cls(np.array([h["u"] for h in hs], float), np.array([h["d"] for h in hs], float),
                   None if prod is None else (prod["k"], prod["l"]))


def point_distance(F: ConvexBody, x: np.ndarray) -> float:
    """Euclidean distance from real point x to F by least-distance programming."""
    g = F.b - F.A @ x  # need A w <= g for w = y - x
    if np.all(g >= -FEAS_TOL):
        return 0.0
    d = F.A.shape[1]
    # LDP: min |w| s.t. G w >= h with G = -A, h = -g (Lawson-Hanson via NNLS)
    E = np.vstack([-F.A.T, -g[None, :]])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        raise GeometryError("least-distance program infeasible (empty body)")
    w = -r[:d] / r[-1]
    return float(np.linalg.norm(w))


def body_distance(F: ConvexBody, S) -> float:
    pts = to_real(np.atleast_2d(np.asarray(S, dtype=complex)))
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    return min(point_distance(F, x) for x in pts)


# --------------------------------------------------------------------------
# complex lines


class SweptBody:
    """M F + t + sum_i r_i D v_i, with D the closed unit disc and v_i in C^n.

    Images of a polyhedron under affine maps and translates by complex discs
    along a vector.  Support values are exact: one LP over F plus closed-form
    disc terms.
    """

    def __init__(self, base: ConvexBody, matrix=None, shift=None, discs=()):
        n = base.n
        self.base = base
        self.matrix = np.eye(n, dtype=complex) if matrix is None else np.asarray(matrix, complex)
        self.shift = np.zeros(n, complex) if shift is None else np.asarray(shift, complex)
        self.discs = tuple((np.asarray(v, complex), float(r)) for v, r in discs)

    @property
    def n(self) -> int:
        return self.base.n

    def affine(self, matrix, shift) -> "SweptBody":
        m = np.asarray(matrix, complex)
        return SweptBody(self.base, m @ self.matrix, m @ self.shift + np.asarray(shift, complex),
                         [(m @ v, r) for v, r in self.discs])

    def add_disc(self, center, radius: float, direction) -> "SweptBody":
        return SweptBody(self.base, self.matrix, self.shift + np.asarray(center, complex),
                         list(self.discs) + [(np.asarray(direction, complex), radius)])

    def support(self, u) -> float:
        u = np.asarray(u, float)
        h = self.base.support(realify(self.matrix).T @ u)
        h += float(u @ to_real(self.shift))
        c = functional_coeffs(u)
        for v, r in self.discs:
            h += r * abs(np.dot(c, v))
        return h

    def outer(self, directions) -> ConvexBody:
        """Polyhedron {u . x <= support(u)} over the given real directions."""
        rows = []
        for u in directions:
            h = self.support(u)
            if math.isfinite(h):
                rows.append((np.asarray(u, float), h))
        return ConvexBody.from_halfspaces(rows)


class ConditionI(str, Enum):
    HYPERPLANE = "Hyperplane"
    NO_COMPLEX_LINE = "NoComplexLine"
    CONTAINS_COMPLEX_LINE = "ContainsComplexLine"


def _nullspace(M: np.ndarray, tol: float = FEAS_TOL) -> np.ndarray:
    if M.size == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[rank:].T


def complex_lineality(F: ConvexBody) -> np.ndarray:
    """Basis of {v : A v = 0, A J v = 0}, the largest complex subspace of the
    recession cone's lineality space."""
    J = realify(1j * np.eye(F.n))
    return _nullspace(np.vstack([F.A, F.A @ J]))


def classify_condition_i(F: ConvexBody, n: int | None = None) -> ConditionI:
    if n is not None and n != F.n:
        raise ValueError("dimension mismatch")
    x0 = F.feasible_point()
    if x0 is None:
        raise GeometryError("body is empty")
    L = complex_lineality(F)
    dim = L.shape[1]
    if dim == 0:
        return ConditionI.NO_COMPLEX_LINE
    if dim == 2 * F.n - 2:
        comp = _nullspace(L.T)  # orthogonal complement, real dimension 2
        widths = [F.support(w) + F.support(-w) for w in comp.T]
        if all(math.isfinite(wd) and wd <= 1e-9 for wd in widths):
            return ConditionI.HYPERPLANE
    return ConditionI.CONTAINS_COMPLEX_LINE


# --------------------------------------------------------------------------
# separation / normalization


def separating_functional(F: ConvexBody, S: np.ndarray, objective=None,
                          independent_of=None, direction=None):
    """LP for (u, c) with u.x <= c - 1 on F and u.s >= c on the points S.

    ``independent_of``/``direction`` add w.u >= 1 for a direction w, used to
    force a functional that is C-independent of a previous one.
    Returns (u, c) or None.
    """
    m, d = F.A.shape
    S = np.atleast_2d(S)
    # variables: u (d), c (1), lam (m)
    A_eq = np.hstack([-np.eye(d), np.zeros((d, 1)), F.A.T])  # A^T lam = u
    b_eq = np.zeros(d)
    rows, rhs = [], []
    rows.append(np.concatenate([np.zeros(d), [-1.0], F.b]))  # b.lam - c <= -1
    rhs.append(-1.0)
    for s in S:
        rows.append(np.concatenate([-s, [1.0], np.zeros(m)]))  # c - u.s <= 0
        rhs.append(0.0)
    if direction is not None:
        rows.append(np.concatenate([-direction, [0.0], np.zeros(m)]))
        rhs.append(-1.0)
    cost = np.concatenate([np.zeros(d + 1), np.ones(m)])
    if objective is not None:
        cost[:d] = 1e-3 * objective
    bounds = [(-1e4, 1e4)] * d + [(None, None)] + [(0, None)] * m
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return res.x[:d], float(res.x[d])


def normalize_separation(F: ConvexBody, G, extra, rotations: int = 16):
    """Complex-affine T with T(F) in {Re z1 <= -1, Re z2 <= -1},
    T(co G) in {Re z1 >= 0} and T(extra) in {Re z2 >= 0}.

    Returns an ``Affine`` automorphism.
    """
    from .automorphisms import Affine

    n = F.n
    Gr = to_real(np.atleast_2d(np.asarray(G, dtype=complex)))
    Er = to_real(np.atleast_2d(np.asarray(extra, dtype=complex)))
    d = 2 * n
    for k in range(rotations):
        theta = 2 * math.pi * k / rotations
        obj = np.zeros(d)
        obj[0], obj[1] = math.cos(theta), math.sin(theta)
        first = separating_functional(F, Gr, objective=obj if k else None)
        if first is None:
            break
        u1, c1 = first
        span = np.column_stack([u1, times_i(u1)])
        comp = _nullspace(span.T)
        for w in comp.T:
            for sgn in (1.0, -1.0):
                second = separating_functional(F, Er, direction=sgn * w)
                if second is None:
                    continue
                u2, c2 = second
                M = np.array([functional_coeffs(u1), functional_coeffs(u2)])
                if np.linalg.matrix_rank(M, tol=1e-9) < 2:
                    continue
                full = _complete_rows(M, n)
                shift = np.zeros(n, dtype=complex)
                shift[0], shift[1] = -c1, -c2
                return Affine(full, shift)
    raise NormalizationError("no separating complex-affine normalization found")


def _complete_rows(M: np.ndarray, n: int) -> np.ndarray:
    if n == 2:
        return M
    _, _, vh = np.linalg.svd(M)
    return np.vstack([M, vh[2:]])
