"""Scene builders shared by the pipeline, CLI and acceptance tests."""
import math

import numpy as np

from holocurves.automorphisms import CompositeAut, HyperplaneUnion, Shear
from holocurves.numerics import EntireExpr
from holocurves.regions import ConvexBody


def cpair(z):
    z = complex(z)
    return [z.real, z.imag]


def point_rows(pts):
    return [{"alpha": cpair(a), "a": [cpair(c) for c in v]} for a, v in pts]


def halfspaces(*rows):
    """Rows (u, d) meaning u . x <= d in real coordinates (re z1, im z1, re z2, im z2)."""
    return {"halfspaces": [{"u": list(map(float, u)), "d": float(d)} for u, d in rows]}


def box(center, half):
    """Axis box around a complex point in real coordinates."""
    x = np.concatenate([[complex(c).real, complex(c).imag] for c in center])
    rows = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = 1
        rows += [(e, x[i] + half), (-e, -x[i] + half)]
    return halfspaces(*rows)


CONVEX_SCENES = {
    "quadrant": (halfspaces(((1, 0, 0, 0), -1), ((0, 0, 1, 0), -1)),
                 [(0j, (0, 0)), (1j, (1 + 1j, -3))]),
    "far_quadrant": (halfspaces(((1, 0, 0, 0), -9), ((0, 0, 1, 0), -9)), [(1, (1, 1))]),
    "thin_slab": (halfspaces(((1, 0, 0, 0), 0.1), ((-1, 0, 0, 0), 0.1), ((0, 0, 1, 0), -1)),
                  [(0j, (-1, -3)), (1, (1, -3))]),
    "capped_quadrant": (halfspaces(((1, 0, 0, 0), -1), ((0, 0, 1, 0), -1), ((0, 1, 0, 0), 3)),
                        [(0j, (0, 0)), (2, (2, -2))]),
    "box": (box((-3, -3), 1), [(0j, (0, 0)), (1, (-6, -6))]),
}


def convex_scene(name, R_ver=12.0):
    F, pts = CONVEX_SCENES[name]
    return {"pipeline": "prop1_convex", "F": F, "points": point_rows(pts),
            "params": {"R_ver": R_ver}}


def line_scene(seed):
    """k <= 4 points with second coordinates in 0.5 <= |z| <= 3."""
    rng = np.random.default_rng(100 + seed)
    k = 1 + seed % 4
    alphas = []
    while len(alphas) < k:
        z = complex(*rng.uniform(-2, 2, 2))
        if all(abs(z - w) > 0.2 for w in alphas):
            alphas.append(z)
    pts = [(a, (complex(*rng.uniform(-3, 3, 2)),
                rng.uniform(0.5, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi)))) for a in alphas]
    return {"pipeline": "prop1_line", "points": point_rows(pts), "params": {"R_ver": 3.0}}


def lemma3_instance(seed):
    """(K, A, H, p, q, eps): K a ball proxy far left, one or two coordinate hyperplanes."""
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    K = ConvexBody.ball(-(4 + 2 * rng.random(n)) + 0j, 1.0)
    idx = [n - 2, n - 1] if n == 3 and seed % 4 == 1 else [n - 1]
    H = HyperplaneUnion.coordinate(n, idx)
    p = 1 + rng.random(n) + 1j * rng.normal(size=n) * 0.5
    q = p + (rng.normal(size=n) + 1j * rng.normal(size=n)) * 0.5
    on_H = p + 3
    on_H[idx[0]] = 0
    return K, on_H[None, :], H, p, q, 0.1


UNIT = {"type": "ball", "center": [[0, 0]], "radius": 1.0}


def prop7_instance(seed):
    """(c, X) around unit balls F, G in C; every third instance swaps the blocks."""
    rng = np.random.default_rng(seed)
    c = np.array([rng.uniform(2, 4) * np.exp(1j * rng.uniform(0, 2 * np.pi)),
                  complex(*rng.uniform(-1.5, 1.5, 2))])
    if seed % 3 == 2:
        c = c[::-1].copy()
    X = rng.normal(size=2) + 1j * rng.normal(size=2)
    return c, X


def prop7_scene(c, X):
    return {"pipeline": "prop7", "k": 1, "l": 1,
            "F": {"type": "product", "F": UNIT, "G": UNIT},
            "jets": {"c": [cpair(v) for v in c], "X": [cpair(v) for v in X]},
            "params": {"R_ver": 5.0}}


def claim_triple(rng, r, big_move=False):
    """(K_prev, K_next, psi): nearly concentric ball proxies about 4r apart and a pair of shears
    that move K_prev by about 0.3r, or by about 10r with big_move."""
    n = 2
    center = rng.normal(size=n) + 1j * rng.normal(size=n)
    R1 = rng.uniform(2, 3)
    K_prev = ConvexBody.ball(center, R1)
    K_next = ConvexBody.ball(center + 0.1 * rng.normal(size=n), R1 - 4 * r)
    size = (10 * r) if big_move else (0.3 * r)
    g = EntireExpr.var(0).exp() * complex(*rng.normal(size=2))
    g = g * (size / max(1.0, abs(complex(*rng.normal(size=2)))) / math.exp(R1 + 3))
    shift = EntireExpr.const(size * 0.5, 1)
    psi = CompositeAut(n, (Shear(n, 0, g + shift), Shear(n, 1, g * 0.5)))
    return K_prev, K_next, psi
