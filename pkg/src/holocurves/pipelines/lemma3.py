"""Automorphisms that move one point to another, stay close to the identity on a
convex compact set K and fix a union H of coordinate hyperplanes pointwise.

The move is assembled from overshears whose exponent carries the product of
the H-coordinates (so H is fixed) and an exponential of a functional that
separates the moving point from K (so K barely moves).  Log-correcting
overshears then restore the finitely many points of A exactly.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

from ..automorphisms import (
    Affine, CompositeAut, HyperplaneUnion, Overshear, SingularMapError, apply_aut,
    fixes_hyperplanes, invert_aut, product_separation,
)
from ..numerics import DegenerateNodesError, EntireExpr, lagrange_interpolant, substitute
from ..regions import ConvexBody, separating_functional, to_complex, to_real
from .common import PipelineError, SceneError

BUDGET_RETRIES = 6
FAR_MARGIN = 2.0
NODE_GAP = 1e-10
COORD_FLOOR = 1e-6
SAMPLE_SEED = 0
MAX_POWER = 64


# --------------------------------------------------------------------------
# geometry of K


def support_point(K: ConvexBody, u) -> np.ndarray:
    res = linprog(-np.asarray(u, float), A_ub=K.A, b_ub=K.b,
                  bounds=[(None, None)] * K.A.shape[1], method="highs")
    if res.status != 0:
        raise PipelineError(f"K must be compact (support LP: {res.message})")
    return res.x


def sample_body(K: ConvexBody, count: int = 400, seed: int = SAMPLE_SEED) -> np.ndarray:
    """Boundary points in random directions plus random convex combinations of them."""
    rng = np.random.default_rng(seed)
    d = K.A.shape[1]
    dirs = np.vstack([np.eye(d), -np.eye(d), rng.normal(size=(max(8, count // 6), d))])
    rim = np.array([support_point(K, u) for u in dirs])
    w = rng.dirichlet(np.ones(len(rim)) * 0.3, size=max(0, count - len(rim)))
    pts = np.vstack([rim, w @ rim])
    return to_complex(pts)


def coordinate_radii(K: ConvexBody, angles: int = 16) -> np.ndarray:
    """Upper bounds on sup |z_m| over K (support along rotated coordinate functionals)."""
    n = K.n
    out = np.zeros(n)
    for m in range(n):
        best = -math.inf
        for th in 2 * np.pi * np.arange(angles) / angles:
            u = np.zeros(2 * n)
            u[2 * m], u[2 * m + 1] = math.cos(th), math.sin(th)
            best = max(best, K.support(u))
        out[m] = max(best, 0.0) / math.cos(math.pi / angles)
    return out


def _real_functional(coeffs) -> np.ndarray:
    """u with u . x = Re(coeffs . z)."""
    c = np.asarray(coeffs, complex)
    u = np.empty(2 * len(c))
    u[0::2], u[1::2] = c.real, -c.imag
    return u


# --------------------------------------------------------------------------
# separated overshears


def _others(n, axis):
    return [i for i in range(n) if i != axis]


def _modulus_supports(K: ConvexBody, ell, angles: int = 16) -> np.ndarray:
    """h(theta) = sup over K of Re(e^{-i theta} ell(z)) on an angle grid."""
    th = 2 * np.pi * np.arange(angles) / angles
    return np.array([K.support(_real_functional(np.exp(-1j * t) * ell)) for t in th])


def _sup_distance(h: np.ndarray, a: complex) -> float:
    """Upper bound on sup over K of |ell(z) - a| from the rotated supports."""
    th = 2 * np.pi * np.arange(len(h)) / len(h)
    return float(np.max(h - np.real(np.exp(-1j * th) * a))) / math.cos(math.pi / len(h))


def moving_overshear(n: int, axis: int, S, ell, x, target, K: ConvexBody,
                     radii: np.ndarray, budget: float):
    """Overshear sending x_axis to target_axis exactly while moving K by at most budget.

    The exponent is C prod_{s in S, s != axis} z_s times a separating factor that
    equals 1 at x and is small on K: preferably ((ell(z) - a) / (ell(x) - a))^N
    (polynomial growth), otherwise exp(lam (ell(z) - ell(x))).  ell has no
    z_axis coefficient and Re ell(K) < Re ell(x).
    Returns (Overshear or None, displacement bound).
    """
    x = np.asarray(x, complex)
    ell = np.asarray(ell, complex)
    if ell[axis] != 0:
        raise ValueError("separating functional must not involve the moving axis")
    if x[axis] == target:
        return None, 0.0
    if x[axis] == 0 or target == 0:
        raise PipelineError("overshears cannot move a coordinate to or from 0")
    hs = [s for s in S if s != axis]
    prod_x = complex(np.prod([x[s] for s in hs])) if hs else 1.0 + 0j
    C = complex(np.log(target / x[axis])) / prod_x
    lx = complex(ell @ x)
    gap = lx.real - K.support(_real_functional(ell))
    if not gap > 0:
        raise PipelineError("functional does not separate the point from K")
    room = math.log1p(budget / max(radii[axis], 1e-300))
    scale = abs(C) * float(np.prod([radii[s] for s in hs])) if hs else abs(C)
    need = math.log(max(scale, 1e-300)) - math.log(room)  # log of the required decay
    others = _others(n, axis)
    w = [EntireExpr.var(k, n - 1) for k in range(n - 1)]
    expo = EntireExpr.const(C, n - 1)
    for s in hs:
        expo = expo * w[others.index(s)]
    lin = EntireExpr.const(0, n - 1)
    for m in others:
        if ell[m] != 0:
            lin = lin + w[others.index(m)] * complex(ell[m])
    if need <= 0:
        return Overshear(n, axis, expo), radii[axis] * math.expm1(scale)
    h = _modulus_supports(K, ell)
    best = None
    for T in (1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0):
        a = lx - T * gap
        ratio = abs(lx - a) / max(_sup_distance(h, a), 1e-300)
        if ratio > 1 and (best is None or ratio > best[1]):
            best = (a, ratio)
    if best is not None and need / math.log(best[1]) <= MAX_POWER:
        a, ratio = best
        N = max(1, math.ceil(need / math.log(ratio)))
        u = (lin - a) * complex(1.0 / (lx - a))
        mono = EntireExpr.poly([0.0] * N + [1.0], u, arity=n - 1)
        bound = radii[axis] * math.expm1(scale * ratio ** -N)
        return Overshear(n, axis, expo * mono), bound
    lam = need / gap
    expo = expo * ((lin - lx) * lam).exp()
    bound = radii[axis] * math.expm1(scale * math.exp(-lam * gap))
    return Overshear(n, axis, expo), bound


def inverse_keeping(L: Affine, S) -> Affine:
    """Inverse of a map whose S-rows are unit rows; those rows are kept exact."""
    inv = L.inverse()
    M, t = inv.matrix.copy(), inv.shift.copy()
    for s in S:
        M[s] = np.eye(L.n)[s] / L.matrix[s, s]
        t[s] = 0
    return Affine(M, t)


def _separating_frame(K: ConvexBody, pts, S, n):
    """Linear map L (fixing the S-coordinates) and a free axis f0 with
    Re z'_f0 of every point exceeding sup over L(K) by at least 1."""
    sep = separating_functional(K, to_real(np.atleast_2d(pts)))
    if sep is None:
        return None
    u, c = sep
    coeffs = u[0::2] - 1j * u[1::2]
    free = [i for i in range(n) if i not in S]
    f0 = max(free, key=lambda i: abs(coeffs[i]))
    if abs(coeffs[f0]) < 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        # functional only sees the H-coordinates; tilt it slightly along z_f0
        R = coordinate_radii(K)[f0] + float(np.max(np.abs(np.atleast_2d(pts)[:, f0])))
        coeffs = coeffs.copy()
        coeffs[f0] = 0.25 / max(R, 1.0)
    M = np.eye(n, dtype=complex)
    M[f0] = coeffs
    try:
        L = Affine(M, np.zeros(n))
    except SingularMapError:
        return None
    LK = K.image(L.matrix, L.shift)
    Lp = L.apply(np.atleast_2d(pts))
    gap = np.min(Lp[:, f0].real) - LK.support(_real_functional(np.eye(n)[f0]))
    return (L, f0) if gap > 0 else None


def _carrier_segment(K: ConvexBody, x, y, S, budget: float):
    """Factors moving x to y (in the frame of K) with small displacement on K."""
    n = K.n
    frame = _separating_frame(K, np.vstack([x, y]), S, n)
    if frame is None:
        return None
    L, f0 = frame
    LK = K.image(L.matrix, L.shift)
    cur = L.apply(np.atleast_2d(x))[0]
    goal = L.apply(np.atleast_2d(y))[0]
    radii0 = coordinate_radii(LK)
    moves = 2 * (n - 1) + 1
    step = budget / moves
    factors, spent = [], 0.0
    e_f0 = np.eye(n, dtype=complex)[f0]

    def push(axis, ell, target):
        nonlocal cur, spent
        KK = LK.inflate(spent) if spent > 0 else LK
        fac, bound = moving_overshear(n, axis, S, ell, cur, target, KK, radii0 + spent, step)
        if fac is None:
            return
        factors.append(fac)
        spent += bound
        nxt = fac.apply(cur[None, :])[0]
        nxt[axis] = target  # the factor hits the target up to rounding
        cur = nxt

    far = {}
    for i in range(n):
        if i == f0:
            continue
        r = radii0[i] + FAR_MARGIN + budget
        far[i] = cur[i] if abs(cur[i]) >= r else cur[i] / abs(cur[i]) * r
        push(i, e_f0, far[i])
    j = max(far, key=lambda i: abs(far[i]) - radii0[i])
    ell = np.zeros(n, complex)
    ell[j] = np.conj(far[j]) / abs(far[j])
    push(f0, ell, goal[f0])
    for i in range(n):
        if i != f0:
            push(i, e_f0, goal[i])
    return [L] + factors + [inverse_keeping(L, S)], spent


def carrier(K: ConvexBody, p, q, S, budget: float):
    """Overshear chain (conjugated by linear maps that keep H) taking p to q."""
    seg = _carrier_segment(K, p, q, S, budget)
    if seg is not None:
        return seg[0]
    up = separating_functional(K, to_real(p[None, :]))
    uq = separating_functional(K, to_real(q[None, :]))
    if up is None or uq is None:
        raise PipelineError("points are not separated from K")
    d = up[0] / np.linalg.norm(up[0]) + uq[0] / np.linalg.norm(uq[0])
    if np.linalg.norm(d) < 1e-6:
        d = up[0] / np.linalg.norm(up[0])
    T = 1.0
    for _ in range(60):
        m = to_complex(to_real(p) + T * d)
        if np.all(np.abs(m[list(S)]) > COORD_FLOOR) if S else True:
            a = _carrier_segment(K, p, m, S, budget / 2)
            b = _carrier_segment(K, m, q, S, budget / 2)
            if a is not None and b is not None:
                return a[0] + b[0]
        T *= 2.0
    raise PipelineError("no waypoint joins p to q around K")


# --------------------------------------------------------------------------
# log corrections


def log_corrections(sources: np.ndarray, targets: np.ndarray):
    """Overshears psi_1..psi_n taking each source to its target coordinatewise.

    psi_i = z_i exp(nu f_i(nu)) with nu the product of the other coordinates and
    f_i(nu_b) = log(t_bi / s_bi) / nu_b (Lagrange data).
    """
    m, n = sources.shape
    cur = np.array(sources, complex)
    out = []
    for i in range(n):
        others = _others(n, i)
        nu = np.prod(cur[:, others], axis=1)
        vals = np.log(targets[:, i] / cur[:, i]) / nu
        keep = np.abs(targets[:, i] - cur[:, i]) > 0
        if not keep.any():
            continue
        nodes, data = [], []
        for k in np.argsort(nu.real + 1e-3 * nu.imag, kind="stable"):
            dup = [t for t, z in enumerate(nodes) if abs(z - nu[k]) < NODE_GAP * max(1, abs(z))]
            if dup:
                if abs(data[dup[0]] - vals[k]) > 1e-12 * max(1.0, abs(vals[k])):
                    raise PipelineError(f"coinciding products for axis {i}; separation failed")
                continue
            nodes.append(nu[k])
            data.append(vals[k])
        try:
            P = lagrange_interpolant(nodes, data)
        except DegenerateNodesError as exc:
            raise PipelineError(str(exc)) from exc
        w = [EntireExpr.var(k, n - 1) for k in range(n - 1)]
        prod = w[0]
        for e in w[1:]:
            prod = prod * e
        f = prod * substitute(P, [prod])
        fac = Overshear(n, i, f)
        out.append(fac)
        cur = fac.apply(cur)
        cur[:, i] = targets[:, i]
    return out


# --------------------------------------------------------------------------
# the move


def _coordinate_change(pts: np.ndarray, S, n):
    """Affine map keeping every {z_s = 0}, s in S, after which no coordinate of pts vanishes."""
    free = [i for i in range(n) if i not in S]
    scale = max(1.0, float(np.max(np.abs(pts)))) if len(pts) else 1.0
    if not len(pts) or np.all(np.abs(pts[:, free]) > COORD_FLOOR * scale):
        return None
    for kappa in (0.5, 0.5 + 0.25j, 1.0 - 0.5j, 2.0, 0.3j, 3.0 + 1j):
        M = np.eye(n, dtype=complex)
        shift = np.zeros(n, complex)
        for i in free:
            if S:
                M[i] = M[i] + kappa * (np.ones(n) - np.eye(n)[i])
            else:
                shift[i] = kappa * scale
        try:
            L = Affine(M, shift)
        except SingularMapError:
            continue
        img = L.apply(pts)
        if np.all(np.abs(img[:, free]) > COORD_FLOOR * scale):
            return L
    raise PipelineError("no linear change makes the coordinates non-zero")


def lemma3_move(K: ConvexBody, A, H: HyperplaneUnion | None, p, q, eps: float,
                samples: int = 400) -> CompositeAut:
    """Automorphism phi with phi(p) = q, phi = id on H cap A, |phi(z) - z| <= eps on K."""
    n = K.n
    p = np.asarray(p, complex)
    q = np.asarray(q, complex)
    A = np.asarray(A, complex).reshape(-1, n)
    H = H if H is not None else HyperplaneUnion(n, (), (), True)
    if not H.normalized:
        raise SceneError("H must be a union of coordinate hyperplanes")
    S = tuple(H.indices)
    for name, z in (("p", p), ("q", q)):
        if K.contains(z[None, :])[0] or (S and H.contains(z[None, :])[0]):
            raise SceneError(f"{name} lies in K or H")
    if np.array_equal(p, q):
        return CompositeAut.identity(n)
    onH = H.contains(A) if S and len(A) else np.zeros(len(A), bool)
    Boff = A[~onH]
    L0 = _coordinate_change(np.vstack([Boff, p[None, :], q[None, :]]), S, n)
    pre = [L0] if L0 is not None else []
    post = [inverse_keeping(L0, S)] if L0 is not None else []
    K0 = K.image(L0.matrix, L0.shift) if L0 is not None else K
    lift = (lambda z: L0.apply(np.atleast_2d(z))) if L0 is not None else np.atleast_2d
    A0, p0, q0 = lift(Boff) if len(Boff) else Boff, lift(p)[0], lift(q)[0]
    Ksamp = sample_body(K, samples)
    budget = float(eps)
    last = None
    for _ in range(BUDGET_RETRIES):
        car = CompositeAut(n, tuple(carrier(K0, p0, q0, S, budget / 2)))
        B = np.vstack([A0, q0[None, :]])
        sig = product_separation(B, budget / 4)
        src = apply_aut(sig, apply_aut(car, np.vstack([A0, p0[None, :]])))
        tgt = apply_aut(sig, B)
        corr = CompositeAut(n, tuple(log_corrections(src, tgt)))
        phi = CompositeAut(n, tuple(pre) + car.factors + sig.factors + corr.factors
                           + invert_aut(sig).factors + tuple(post))
        try:
            disp = float(np.max(np.linalg.norm(apply_aut(phi, Ksamp) - Ksamp, axis=1)))
        except ArithmeticError:
            disp = math.inf
        last = disp
        if disp <= eps:
            return phi
        budget /= 4
    raise PipelineError(f"displacement budget violated after retries (last {last:.3g} > {eps})")


# --------------------------------------------------------------------------
# certificate


def fixes_pointwise_structurally(phi: CompositeAut, H: HyperplaneUnion) -> bool:
    """Every non-affine factor fixes H pointwise, every affine factor maps H onto
    itself, and the affine factors compose to the identity on H."""
    S = H.indices
    n = phi.n
    inner = CompositeAut(n, tuple(f for f in phi.factors if not isinstance(f, Affine)))
    if not fixes_hyperplanes(inner, H):
        return False
    M = np.eye(n, dtype=complex)
    t = np.zeros(n, complex)
    for f in phi.factors:
        if isinstance(f, Affine):
            for s in S:
                row = f.matrix[s].copy()
                row[s] = 0
                if np.any(row != 0) or f.shift[s] != 0:
                    return False
            M, t = f.matrix @ M, f.matrix @ t + f.shift
    if not S:
        return True
    D = M - np.eye(n)
    for s in S:
        cols = [m for m in range(n) if m != s]
        if np.max(np.abs(D[:, cols])) > 1e-12 or np.max(np.abs(t)) > 1e-12:
            return False
    return True


def certify_move(phi: CompositeAut, K: ConvexBody, A, H, p, q, eps: float,
                 samples: int = 400, seed: int = SAMPLE_SEED) -> dict:
    n = phi.n
    p, q = np.asarray(p, complex), np.asarray(q, complex)
    res = float(np.linalg.norm(apply_aut(phi, p[None, :])[0] - q) / max(1.0, np.linalg.norm(q)))
    Ksamp = sample_body(K, samples, seed)
    try:
        disp = float(np.max(np.linalg.norm(apply_aut(phi, Ksamp) - Ksamp, axis=1)))
    except ArithmeticError:
        disp = math.inf
    A = np.asarray(A, complex).reshape(-1, n)
    H = H if H is not None else HyperplaneUnion(n, (), (), True)
    onH = A[H.contains(A)] if H.indices and len(A) else np.empty((0, n))
    fix_res = (float(np.max(np.abs(apply_aut(phi, onH) - onH))) if len(onH) else 0.0)
    structural = fixes_pointwise_structurally(phi, H) if H.indices else True
    sections = {
        "maps_p_to_q": {"pass": bool(res <= 1e-8), "residual": res, "threshold": 1e-8},
        "displacement": {"pass": bool(disp <= eps), "max_sampled": disp if math.isfinite(disp)
                         else None, "eps": float(eps), "samples": len(Ksamp),
                         "seed": int(seed)},
        "fixes_H_cap_A": {"pass": bool(structural and fix_res <= 1e-12),
                          "structural": structural, "max_residual": fix_res,
                          "points": len(onH)},
    }
    return sections
