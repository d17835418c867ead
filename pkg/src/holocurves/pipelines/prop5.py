"""Curves through finitely many points avoiding a convex compact set, built stage by
stage as H_j = psi_j o H_{j-1}, plus the starting curve with exponential components."""
from __future__ import annotations

import math

import numpy as np

from ..automorphisms import CompositeAut, HyperplaneUnion, Shear, apply_aut, invert_aut
from ..certify import curve_derivatives, curve_values, properness_proxy
from ..numerics import EntireExpr, substitute
from ..regions import ConvexBody, lattice
from .common import HoloCurve, PipelineError, SceneError
from .lemma3 import lemma3_move, sample_body

CIRCLE_SAMPLES = 256
RHO_STEP = 0.5
RHO_TRIES = 8
PROXY_SPAN = 2.0
ZETA_CLEARANCE = (2.0, 1.0, 0.5, 0.05)
ZETA_ANGLES = 16
ON_CURVE_TOL = 1e-12
NODE_SPREAD = 1.5  # nodes sit within this distance outside the keep disc
KEEP_EXTRA = 0.5  # common keep radius is (stages + KEEP_EXTRA)


def prop2_initial(n: int) -> HoloCurve:
    """eta -> (exp(-eta^2), exp(-eta sqrt 2), exp(eta), ..., exp(eta))."""
    if n < 2:
        raise SceneError("need n >= 2")
    x = EntireExpr.var(0)
    comps = [(-(x * x)).exp(), (x * (-math.sqrt(2.0))).exp()] + [x.exp()] * (n - 2)
    return HoloCurve(tuple(comps[:n]), "prop2_initial", [{"step": "initial", "n": n}])


def line_curve(n: int) -> HoloCurve:
    """zeta -> (zeta, 0, ..., 0)."""
    x = EntireExpr.var(0)
    return HoloCurve(tuple([x] + [EntireExpr.const(0)] * (n - 1)), "line")


# --------------------------------------------------------------------------
# pieces of one stage


def _find_on_curve(curve: HoloCurve, alpha, R: float):
    """A parameter where the curve passes through alpha, or None."""
    t = lattice(R, 0.25)
    v = curve_values(curve, t)
    err = np.linalg.norm(v - alpha, axis=1)
    err[np.isnan(err)] = np.inf
    z = complex(t[int(np.argmin(err))])
    for _ in range(50):
        f = curve_values(curve, np.array([z]))[0] - alpha
        d = curve_derivatives(curve, np.array([z]))[0]
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(d)) or not np.any(d):
            return None
        step = complex(np.vdot(d, f) / np.vdot(d, d))
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    res = np.linalg.norm(curve_values(curve, np.array([z]))[0] - alpha)
    return z if res <= ON_CURVE_TOL * max(1.0, np.linalg.norm(alpha)) else None


def keep_set(curve: HoloCurve, rho: float, K: ConvexBody, extra=None) -> ConvexBody:
    """Convex compact set containing K, the points extra and the image of the disc
    |zeta| <= rho.

    The image of the disc lies in the convex hull of the image of its boundary
    circle; the sampled circle hull is inflated by the chord error bound.
    """
    pts = sample_body(K, 64)
    if extra is not None and len(extra):
        pts = np.vstack([pts, extra])
    if rho > 0:
        circ = rho * np.exp(2j * np.pi * np.arange(CIRCLE_SAMPLES) / CIRCLE_SAMPLES)
        img = curve_values(curve, circ)
        if np.any(np.isnan(img)):
            raise PipelineError("curve overflows on the keep circle")
        speed = float(np.max(np.linalg.norm(curve_derivatives(curve, circ), axis=1)))
        pad = speed * 2 * math.pi * rho / CIRCLE_SAMPLES
        pts = np.vstack([pts, img])
    else:
        pad = 0.0
    hull = ConvexBody.hull(pts)
    return hull.inflate(pad + 1e-9)


def modulus_bound(K: ConvexBody) -> float:
    """Upper bound on sup |z| over K from the coordinate box."""
    m = 2 * K.n
    eye = np.eye(m)
    return math.sqrt(sum(max(K.support(eye[i]), K.support(-eye[i]), 0.0) ** 2
                         for i in range(m)))


def properness_applies(K: ConvexBody, alpha) -> bool:
    """Growth condition (b) is required only when K lies in |z| <= |alpha| - 1/2."""
    return modulus_bound(K) <= float(np.linalg.norm(alpha)) - 0.5


def _choose_zeta(curve: HoloCurve, F: ConvexBody, rho: float, alpha, H,
                 cap: float | None = None):
    """Parameter outside the disc whose curve point lies off F and H.

    Larger clearance from F keeps the separating exponentials slow, so the
    first clearance level that has candidates wins; among those the outermost
    ring is used (the curve stays tame inside the node) and the point nearest to
    alpha is taken.  Rings run from rho + 1/2 up to cap.
    """
    top = rho + 4.0 if cap is None else max(cap, rho + 0.5)
    rings = np.arange(rho + 0.5, top + 1e-9, 0.5)
    t = np.concatenate([r * np.exp(2j * np.pi * np.arange(ZETA_ANGLES) / ZETA_ANGLES)
                        for r in rings])
    v = curve_values(curve, t)
    ok = ~np.any(np.isnan(v), axis=1)
    if H is not None and H.indices:
        ok &= ~H.contains(np.where(np.isnan(v), 0, v))
    dist = np.full(len(t), -np.inf)
    dist[ok] = F.distance_lower_bound(v[ok])
    for clearance in ZETA_CLEARANCE:
        cand = np.flatnonzero(dist > clearance)
        if len(cand):
            outer = cand[np.abs(t[cand]) >= np.abs(t[cand]).max() - 1e-9]
            k = outer[np.argmin(np.linalg.norm(v[outer] - alpha, axis=1))]
            return complex(t[k]), v[k]
    raise PipelineError("no admissible parameter outside the keep disc")


def _linear_factor_poly(roots, s1, D) -> EntireExpr:
    """P(s) = D (s - s1) prod_{l}(s - r_l) / prod_l (s1 - r_l): zero at s1 and the roots,
    derivative D at s1."""
    x = EntireExpr.var(0)
    P = (x - s1) * complex(D)
    for r in roots:
        P = P * (x - r) * complex(1.0 / (s1 - r))
    return P


def jet_correction(curve: HoloCurve, zeta1: complex, X, alphas):
    """Shears fixing the points alphas that turn the derivative at zeta1 parallel to X,
    then the reparametrization zeta1 + mu (zeta - zeta1) matching X exactly.

    Returns (factors, mu).
    """
    X = np.asarray(X, complex)
    n = len(X)
    k = int(np.argmax(np.abs(X)))
    v = curve_derivatives(curve, np.array([zeta1]))[0]
    if abs(v[k]) < 1e-12:
        raise PipelineError("derivative lost its dominant component")
    s_vals = np.asarray(alphas, complex)[:, k]
    s1 = s_vals[0]
    roots = []
    for s in s_vals[1:]:
        if abs(s - s1) < 1e-10:
            raise PipelineError("interpolation points share the pivot coordinate")
        if all(abs(s - r) > 1e-14 for r in roots):
            roots.append(s)
    factors = []
    others = lambda i: [m for m in range(n) if m != i]  # noqa: E731
    for i in range(n):
        if i == k:
            continue
        D = (X[i] * v[k] / X[k] - v[i]) / v[k]
        if D == 0:
            continue
        P = _linear_factor_poly(roots, s1, D)
        w = others(i).index(k)
        arg = EntireExpr.var(w, n - 1)
        factors.append(Shear(n, i, substitute(P, [arg])))
        v[i] = X[i] * v[k] / X[k]
    return factors, complex(X[k] / v[k])


def reparametrize(curve: HoloCurve, zeta1: complex, mu: complex) -> HoloCurve:
    if mu == 1:
        return curve
    x = EntireExpr.var(0)
    arg = (x - zeta1) * mu + zeta1 if zeta1 != 0 else x * mu
    return HoloCurve(tuple(substitute(c, [arg]) for c in curve.components), curve.pipeline,
                     list(curve.stages), dict(curve.data))


# --------------------------------------------------------------------------
# one stage


def interpolation_stage(curve: HoloCurve, nodes, alpha, K: ConvexBody, delta: float,
                        rho_prev: float, H: HyperplaneUnion | None = None, jet=None,
                        R_ver: float | None = None, zeta_cap: float | None = None,
                        keep_radius: float = 0.0):
    """H_j = psi_j o H_{j-1} through the next point alpha.

    nodes: [(zeta_l, alpha_l)] already interpolated; jet: (zeta_1, X) or None.
    zeta_cap bounds |zeta_j|.  The keep disc has radius max(rho_j, keep_radius):
    a common keep radius for all stages keeps every later keep circle inside the
    region where the earlier factors are controlled.
    Returns (curve, nodes, rho_j, record).
    """
    alpha = np.asarray(alpha, complex)
    n = curve.n
    if K.contains(alpha[None, :])[0]:
        raise SceneError("the next point lies in K")
    rho_min = rho_prev + 1.0
    hit = _find_on_curve(curve, alpha, rho_min + 8.0)
    if hit is not None:
        rec = {"step": "stage", "identity": True, "zeta": [hit.real, hit.imag],
               "rho": rho_min, "delta": delta}
        return curve, list(nodes) + [(hit, alpha)], max(rho_min, abs(hit)), rec
    A = np.array([a for _, a in nodes]).reshape(-1, n)
    last_err = None
    errors = []
    for attempt in range(RHO_TRIES):
        rho = rho_min + attempt * RHO_STEP
        try:
            R = max(rho, keep_radius)
            F = keep_set(curve, R, K, A)
            if F.contains(alpha[None, :])[0]:
                raise PipelineError("the next point lies in the hull of the keep set")
            zeta, p = _choose_zeta(curve, F, R, alpha, H, zeta_cap)
            psi = lemma3_move(F, A, H, p, alpha, delta)
            comps = psi.push_curve(list(curve.components))
            new = HoloCurve(tuple(comps), curve.pipeline, list(curve.stages), dict(curve.data))
            new_nodes = list(nodes) + [(zeta, alpha)]
            mu = 1.0 + 0j
            jet_facs = []
            if jet is not None:
                z1, X = jet
                pts = np.array([a for _, a in new_nodes])
                jet_facs, mu = jet_correction(new, z1, X, pts)
                if jet_facs:
                    new = HoloCurve(tuple(CompositeAut(n, tuple(jet_facs)).push_curve(
                        list(new.components))), new.pipeline, new.stages, new.data)
                new = reparametrize(new, z1, mu)
                new_nodes = [(z1 + (z - z1) / mu, a) for z, a in new_nodes]
            rho_j = rho
            ok_b = True
            if properness_applies(K, alpha):
                top = float(np.linalg.norm(alpha)) - 1.0
                radii = [rho_j + RHO_STEP * i for i in range(int(PROXY_SPAN / RHO_STEP) + 1)]
                proxy = properness_proxy(new, radii, threshold=top)
                ok_b = all(m is not None and m > top for m in proxy["min_modulus"])
            if not ok_b and attempt < RHO_TRIES - 1:
                last_err = "condition (b) failed on the proxy circles"
                errors.append(f"rho={rho}: {last_err}")
                continue
            rec = {"step": "stage", "identity": False, "zeta": [zeta.real, zeta.imag],
                   "rho": rho_j, "delta": delta, "factors": len(psi.factors),
                   "jet_shears": len(jet_facs), "mu": [mu.real, mu.imag], "b_proxy": ok_b}
            return new, new_nodes, rho_j, rec
        except PipelineError as exc:
            last_err = str(exc)
            errors.append(f"rho={rho}: {exc}")
    raise PipelineError("stage failed: " + "; ".join(errors or [str(last_err)]))


def stage_checks(prev: HoloCurve, cur: HoloCurve, nodes, K: ConvexBody, rho: float,
                 delta: float, jet=None, R_ver: float = 8.0, pitch: float = 0.25) -> dict:
    """Conditions (a) interpolation/jet, (b) proxy, (c) closeness on the disc and
    (d) avoidance of K on the sampled verification disc."""
    res = []
    for z, a in nodes:
        got = curve_values(cur, np.array([z]))[0]
        res.append(float(np.linalg.norm(got - a) / max(1.0, np.linalg.norm(a))))
    if jet is not None:
        z1, X = jet
        d = curve_derivatives(cur, np.array([z1]))[0]
        res.append(float(np.linalg.norm(d - X) / max(1.0, np.linalg.norm(X))))
    res = [r if math.isfinite(r) else math.inf for r in res]
    worst = max(res, default=0.0)
    a = {"pass": bool(worst <= 1e-8), "max": worst if math.isfinite(worst) else None,
         "threshold": 1e-8}
    t = lattice(rho, pitch)
    gap = np.linalg.norm(curve_values(cur, t) - curve_values(prev, t), axis=1)
    cmax = float(np.nanmax(gap)) if len(gap) else 0.0
    c = {"pass": bool(len(gap) and not np.any(np.isnan(gap)) and cmax <= delta),
         "max": cmax, "delta": float(delta), "grid": {"R": rho, "pitch": pitch,
                                                       "count": len(t)}}
    alpha_j = np.asarray(nodes[-1][1], complex)
    top = float(np.linalg.norm(alpha_j)) - 1.0
    radii = [rho + RHO_STEP * i for i in range(int(PROXY_SPAN / RHO_STEP) + 1)]
    b = properness_proxy(cur, radii, threshold=top)
    b["applies"] = properness_applies(K, alpha_j)
    b["pass"] = (not b["applies"]) or all(m is not None and m > top for m in b["min_modulus"])
    tv = lattice(R_ver, pitch)
    vals = curve_values(cur, tv)
    ok = ~np.any(np.isnan(vals), axis=1)
    margin = float(np.min(K.distance_lower_bound(vals[ok]))) if ok.any() else math.nan
    d = {"pass": bool(ok.all() and margin > 0), "margin": margin if math.isfinite(margin)
         else None, "unevaluable": int(np.sum(~ok)),
         "grid": {"R": R_ver, "pitch": pitch, "count": len(tv)}}
    return {"a": a, "b": b, "c": c, "d": d}


def prop5_run(K: ConvexBody, points, X, deltas=None, K_schedule=None, R_ver: float = 8.0):
    """Stages through points (the first is c = H(zeta_1) with H'(zeta_1) = X).

    The starting curve is the line through c in direction X; K_schedule gives
    the K_j (default: K itself at every stage).
    Returns (curve, nodes, records, checks, history) where history lists
    (curve, nodes) after each stage, starting with the line.
    """
    pts = [np.asarray(p, complex) for p in points]
    X = np.asarray(X, complex)
    n = len(X)
    if not np.any(X):
        raise SceneError("X must be non-zero")
    c = pts[0]
    x = EntireExpr.var(0)
    curve = HoloCurve(tuple(x * complex(X[m]) + complex(c[m]) for m in range(n)), "prop5")
    if np.any(K.distance_lower_bound(curve_values(curve, lattice(R_ver, 0.25))) <= 0):
        raise SceneError("the starting line meets K; move c or X")
    nodes = [(0j, c)]
    jet = (0j, X)
    rho = 0.0
    records, checks = [], []
    history = [(curve, list(nodes))]
    keep = len(pts) - 1 + KEEP_EXTRA
    for j, alpha in enumerate(pts[1:], start=1):
        delta = (deltas[j - 1] if deltas is not None else 2.0 ** -j)
        Kj = K_schedule[j - 1] if K_schedule is not None else K
        prev = curve
        curve, nodes, rho, rec = interpolation_stage(curve, nodes, alpha, Kj, delta, rho,
                                                     jet=jet, R_ver=R_ver,
                                                     zeta_cap=keep + NODE_SPREAD,
                                                     keep_radius=keep)
        records.append(rec)
        checks.append(stage_checks(prev, curve, nodes, Kj, rho, delta, jet, R_ver))
        history.append((curve, list(nodes)))
    return curve, nodes, records, checks, history


# --------------------------------------------------------------------------
# the claim


def boundary_distance(K_prev: ConvexBody, K_next: ConvexBody) -> float:
    """dist(K_next, boundary of K_prev) for K_next inside K_prev; <= 0 otherwise."""
    return float(min(b - K_next.support(a) for a, b in zip(K_prev.A, K_prev.b)))


def claim_check(K_prev: ConvexBody, K_next: ConvexBody, psi: CompositeAut, r: float,
                samples: int = 400, tol: float = 1e-9) -> dict:
    """If dist(K_next, bd K_prev) > r and psi moves sampled K_prev by at most r,
    every sampled x in K_next has psi^{-1}(x) in K_prev."""
    dist = boundary_distance(K_prev, K_next)
    S_prev = sample_body(K_prev, samples)
    try:
        disp = float(np.max(np.linalg.norm(apply_aut(psi, S_prev) - S_prev, axis=1)))
    except ArithmeticError:
        disp = math.inf
    out = {"boundary_distance": dist, "r": float(r), "max_displacement": disp}
    if not (dist > r and disp <= r):
        out.update(status="precondition_failed", holds=None)
        return out
    S_next = sample_body(K_next, samples, seed=1)
    back = apply_aut(invert_aut(psi), S_next)
    inside = K_prev.contains(back, tol=tol)
    out.update(status="claim_holds" if inside.all() else "claim_violated",
               holds=bool(inside.all()), violations=int(np.sum(~inside)), samples=len(S_next))
    return out
