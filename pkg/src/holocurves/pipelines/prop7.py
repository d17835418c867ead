"""Entire curves in C^{k+l} minus F x G with a prescribed 1-jet at 0.

One block (the one whose part of c is off its obstacle) runs along
c_P + (e^{rz} - 1) X_P / r: it stays in a ball around c_P missing the obstacle
unless |e^{rz} - 1| >= e + 1, and then Re z >= 1/r.  The other block is
g_0 + rho_0 (a e^{-kz} + b e^{-2kz}), a bounded exponential sum whose modulus on
Re z >= 1/r is at most |a| e^{-k/r} + |b| e^{-2k/r} < 1, so on that half-plane it
stays inside a polydisc around g_0 that misses its obstacle.
"""
from __future__ import annotations

import math

import numpy as np

from ..certify import check_avoidance, check_interpolation, curve_values
from ..numerics import EntireExpr, eval_expr
from ..regions import ConvexBody, point_distance, to_real
from .common import HoloCurve, SceneError

BALL_SHRINK = 0.9
BOUND_TARGET = 0.9
KAPPA_GRID = tuple(2.0 ** (i / 4) for i in range(-8, 81))
DICHOTOMY_SAMPLES = 10_000
DICHOTOMY_SEED = 0


def _far_center(body: ConvexBody, dim: int, c) -> np.ndarray:
    """c itself when it misses body, otherwise a point pushed out along the first axis."""
    if point_distance(body, to_real(c)) > 0:
        return np.asarray(c, dtype=complex)
    e = np.zeros(2 * dim)
    e[0] = 1.0
    out = np.asarray(c, dtype=complex).copy()
    out[0] = body.support(e) + 1.0 + 1j * out[0].imag
    return out


def bounded_block(c, X, g0, rho0: float, r: float):
    """Exponential sums f_m = g0_m + rho0 (a_m e^{-kz} + b_m e^{-2kz}) with jet (c, X) at 0.

    a + b = (c - g0)/rho0 and -k(a + 2b) = X/rho0; k is the smallest grid value
    with max_m |a_m| e^{-k/r} + |b_m| e^{-2k/r} <= BOUND_TARGET.
    Returns (expressions, k, bound, coefficient pairs).
    """
    c, X, g0 = (np.asarray(v, dtype=complex) for v in (c, X, g0))
    A, B = (c - g0) / rho0, X / rho0
    for k in KAPPA_GRID:
        b = -A - B / k
        a = A - b
        bound = float(np.max(np.abs(a) * math.exp(-k / r) + np.abs(b) * math.exp(-2 * k / r)))
        if bound <= BOUND_TARGET:
            break
    else:
        raise SceneError("no decay rate keeps the bounded block inside its polydisc")
    x = EntireExpr.var(0)
    e1 = (x * (-k)).exp()
    e2 = (x * (-2 * k)).exp()
    comps = [e1 * complex(rho0 * a[m]) + e2 * complex(rho0 * b[m]) + complex(g0[m])
             for m in range(len(c))]
    return comps, k, bound, [(complex(p), complex(q)) for p, q in zip(a, b)]


def prop7_jet(F: ConvexBody, G: ConvexBody, c, X) -> HoloCurve:
    """Entire f with f(0) = c, f'(0) = X avoiding F x G."""
    k, l = F.n, G.n
    c = np.asarray(c, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if c.shape != (k + l,) or X.shape != (k + l,):
        raise SceneError("c and X need k + l coordinates")
    d1 = point_distance(F, to_real(c[:k]))
    d2 = point_distance(G, to_real(c[k:]))
    if d1 <= 0 and d2 <= 0:
        raise SceneError("c lies in F x G")
    # P is the block that leaves its ball, Q the bounded one; the block farther
    # from its obstacle moves, which keeps r moderate
    if d1 / math.sqrt(k) >= d2 / math.sqrt(l):
        P, Q, bodyQ, dP = slice(0, k), slice(k, k + l), G, d1
    else:
        P, Q, bodyQ, dP = slice(k, k + l), slice(0, k), F, d2
    first_moves = P.start == 0
    kP, kQ = P.stop - P.start, Q.stop - Q.start
    x = EntireExpr.var(0)
    comps = [None] * (k + l)
    data = {"k": k, "l": l, "moving_block": "first" if first_moves else "second"}
    if not np.any(X[P]):
        # trivial case: the block off its obstacle stays constant
        for m in range(P.start, P.stop):
            comps[m] = EntireExpr.const(complex(c[m]))
        for m in range(Q.start, Q.stop):
            comps[m] = x * complex(X[m]) + complex(c[m])
        data.update({"trivial": True, "ball_radius": dP})
        return HoloCurve(tuple(comps), "prop7", [{"step": "trivial"}], data)
    s = BALL_SHRINK * dP / ((math.e + 1) * math.sqrt(kP))
    r = float(np.linalg.norm(X[P])) / (s * math.sqrt(kP))
    unit = X[P] / r
    E = (x * r).exp() - 1.0
    for i, m in enumerate(range(P.start, P.stop)):
        comps[m] = E * complex(unit[i]) + complex(c[m])
    g0 = _far_center(bodyQ, kQ, c[Q])
    rho0 = BALL_SHRINK * point_distance(bodyQ, to_real(g0)) / math.sqrt(kQ)
    if not rho0 > 0:
        raise SceneError("no polydisc around the bounded block misses its obstacle")
    qcomps, kappa, bound, coeffs = bounded_block(c[Q], X[Q], g0, rho0, r)
    for i, m in enumerate(range(Q.start, Q.stop)):
        comps[m] = qcomps[i]
    data.update({"trivial": False, "r": r, "scale": s, "ball_radius": (math.e + 1) * s
                 * math.sqrt(kP), "obstacle_distance": dP,
                 "center": [[z.real, z.imag] for z in g0], "polydisc_radius": rho0,
                 "kappa": kappa, "bound": bound,
                 "coefficients": [[[p.real, p.imag], [q.real, q.imag]] for p, q in coeffs]})
    stages = [{"step": "normalize", "r": r, "scale": s},
              {"step": "bounded_block", "kappa": kappa, "bound": bound,
               "coefficients": [[[p.real, p.imag], [q.real, q.imag]] for p, q in coeffs]}]
    return HoloCurve(tuple(comps), "prop7", stages, data)


def dichotomy_check(curve: HoloCurve, c, R: float, samples: int = DICHOTOMY_SAMPLES,
                    seed: int = DICHOTOMY_SEED) -> dict:
    """On random z with |Re z|, |Im z| <= R: the moving block is inside its ball,
    or Re z >= 1/r and the bounded block is inside its polydisc."""
    d = curve.data
    k, l = d["k"], d["l"]
    P = slice(0, k) if d["moving_block"] == "first" else slice(k, k + l)
    Q = slice(k, k + l) if d["moving_block"] == "first" else slice(0, k)
    rng = np.random.default_rng(seed)
    z = rng.uniform(-R, R, samples) + 1j * rng.uniform(-R, R, samples)
    c = np.asarray(c, dtype=complex)
    if d["trivial"]:
        vals = curve_values(curve, z)
        ok = np.all(np.abs(vals[:, P] - c[P]) == 0, axis=1)
        return {"pass": bool(ok.all()), "violations": int(np.sum(~ok)), "samples": samples,
                "box": R, "seed": seed, "trivial": True}
    # the moving block may overflow far out in Re z > 0; such rows are outside its
    # ball, and the bounded block is evaluated on its own
    moving = np.stack([np.asarray(eval_expr(curve.components[m], [z], mask=True))
                       for m in range(P.start, P.stop)], axis=-1)
    bounded = np.stack([np.asarray(eval_expr(curve.components[m], [z], mask=True))
                        for m in range(Q.start, Q.stop)], axis=-1)
    in_ball = ~np.any(np.isnan(moving), axis=1)
    with np.errstate(over="ignore"):
        in_ball[in_ball] = (np.linalg.norm(moving[in_ball] - c[P], axis=1)
                            < d["obstacle_distance"])
    g0 = np.array([complex(*p) for p in d["center"]])
    rho0, kappa, r = d["polydisc_radius"], d["kappa"], d["r"]
    # far left e^{rz} underflows past the guard; there |f - c| <= |u| (1 + e^{-700})
    # for f = c + u (e^{rz} - 1), with u read off the expressions and re-checked
    pm = np.array([0.5j, -0.5 / r, 0.25 / r + 1j])
    em = np.expm1(r * pm)
    fm = np.stack([np.asarray(eval_expr(curve.components[m], [pm], mask=True))
                   for m in range(P.start, P.stop)], axis=-1)
    u = (fm[0] - c[P]) / em[0]
    moving_ok = bool(np.all(np.abs(fm - c[P] - em[:, None] * u)
                            <= 1e-10 * (1 + np.abs(fm))))
    sunk = (np.any(np.isnan(moving), axis=1) & (r * z.real < -700) & moving_ok
            & (float(np.linalg.norm(u)) * (1 + 1e-300) < d["obstacle_distance"]))
    in_ball |= sunk
    right = z.real >= 1.0 / r
    close = np.all(np.abs(bounded - g0) < rho0, axis=1)
    # where e^{-kappa z} underflows past the guard, use the coefficient bound instead;
    # the coefficients are first matched against the expressions at probe points
    ab = np.array([[complex(*p), complex(*q)] for p, q in d["coefficients"]])
    probe = 1.0 / r + np.array([0, 0.5j, 1.0 / r, 2.0 / r + 1j])
    want = g0 + rho0 * (ab[:, 0] * np.exp(-kappa * probe)[:, None]
                        + ab[:, 1] * np.exp(-2 * kappa * probe)[:, None])
    got = np.stack([np.asarray(eval_expr(curve.components[m], [probe], mask=True))
                    for m in range(Q.start, Q.stop)], axis=-1)
    coeff_ok = bool(np.all(np.abs(got - want) <= 1e-10 * (1 + np.abs(want))))
    bound = float(np.max(np.abs(ab[:, 0]) * math.exp(-kappa / r)
                         + np.abs(ab[:, 1]) * math.exp(-2 * kappa / r)))
    underflow = right & np.any(np.isnan(bounded), axis=1)
    by_bound = underflow & coeff_ok & (bound < 1)
    in_disc = right & (close | by_bound)
    ok = in_ball | in_disc
    return {"pass": bool(ok.all()), "violations": int(np.sum(~ok)), "samples": samples,
            "box": R, "seed": seed, "trivial": False,
            "ball_hits": int(np.sum(in_ball)), "half_plane_hits": int(np.sum(~in_ball)),
            "coefficient_bound": bound, "coefficients_match": coeff_ok,
            "bounded_by_coefficients": int(np.sum(by_bound)),
            "moving_form_match": moving_ok, "ball_by_underflow": int(np.sum(sunk))}


def prop7_sections(curve: HoloCurve, F: ConvexBody, G: ConvexBody, c, X, R: float,
                   pitch: float, seed: int = DICHOTOMY_SEED) -> dict:
    """Jet at 0, the sampled dichotomy, and avoidance on the verification disc.

    Avoidance is structural when the dichotomy holds: the ball and the polydisc
    miss F and G respectively by construction."""
    jet = check_interpolation(curve, jets=[(0j, np.asarray(c, complex), np.asarray(X, complex))])
    dich = dichotomy_check(curve, c, R, seed=seed)
    avoid = check_avoidance(curve, ConvexBody.product_of(F, G), R, pitch,
                            structural=dich["pass"])
    return {"interpolation": jet, "dichotomy": dich, "avoidance": avoid}
