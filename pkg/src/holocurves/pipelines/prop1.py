"""Entire curves through prescribed points avoiding a closed convex set in C^2."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..automorphisms import (
    Affine, CompositeAut, HyperplaneUnion, Shear, apply_aut, gamma_separation, invert_aut,
)
from ..numerics import EntireExpr, lagrange_interpolant, substitute, eval_expr
from .common import HoloCurve, PipelineError, SceneError

BRANCH_SEARCH_MAX = 5  # points; beyond this the principal branch is used


def _choose_branches(alphas, logs, R: float):
    """Shifts n_j in {0, -1, 1} minimizing max |Q| on the circle |t| = R."""
    k = len(alphas)
    circle = R * np.exp(2j * np.pi * np.arange(720) / 720)
    if k > BRANCH_SEARCH_MAX:
        shifts = (0,) * k
        return shifts, lagrange_interpolant(alphas, logs)
    best = None
    for shifts in itertools.product((0, -1, 1), repeat=k):
        vals = logs + 2j * np.pi * np.array(shifts)
        Q = lagrange_interpolant(alphas, vals)
        peak = float(np.max(np.abs(eval_expr(Q, [circle]))))
        if best is None or peak < best[0] - 1e-12:
            best = (peak, shifts, Q)
    return best[1], best[2]


def prop1_line(points, F: HyperplaneUnion | None = None, R_ver: float = 3.0) -> HoloCurve:
    """Curve through (alpha_j, a_j) avoiding {z2 = 0}.

    In coordinates where the second entries are distinct the curve is
    t -> (t + P(e^{Q(t)}), e^{Q(t)}); its second component is an exponential.
    """
    if F is not None and not (F.normalized and F.n == 2 and F.indices == [1]):
        raise SceneError("prop1_line expects F = {z2 = 0} in C^2")
    alphas = np.array([p[0] for p in points], dtype=complex)
    A = np.array([p[1] for p in points], dtype=complex).reshape(-1, 2)
    if np.any(A[:, 1] == 0):
        raise SceneError("points must lie off {z2 = 0}")
    stages = []
    if len(A) >= 2:
        gam, g = gamma_separation(A)
    else:
        gam, g = CompositeAut.identity(2), 0.0
    stages.append({"step": "gamma_separation", "gamma": g})
    B = apply_aut(gam, A) if len(A) else A
    x = EntireExpr.var(0)
    if len(A) == 0:
        Q = EntireExpr.const(0)
        P = EntireExpr.const(0)
        shifts = ()
    else:
        logs = np.log(B[:, 1])
        shifts, Q = _choose_branches(alphas, logs, R_ver)
        P = lagrange_interpolant(B[:, 1], B[:, 0] - alphas)
    stages.append({"step": "log_branches", "shifts": list(shifts)})
    E = Q.exp()
    frame = [x + substitute(P, [E]), E]
    comps = invert_aut(gam).push_curve(frame)
    return HoloCurve(tuple(comps), "prop1_line", stages,
                     {"avoid_axes": [1], "graph_frame": {"gamma": g}})


# --------------------------------------------------------------------------
# convex obstacles


from scipy.optimize import linprog  # noqa: E402

from ..approx import ExpSum, interp_exp_sum  # noqa: E402
from ..regions import (  # noqa: E402
    ConditionI, ConvexBody, SweptBody, body_distance, classify_condition_i,
    normalize_separation, to_real,
)

KAPPA_GRID = tuple(2.0 ** (i / 2) for i in range(-8, 13))
RELAX_FACTOR = 0.8
RELAX_STEPS = 5
EXP_HEADROOM = 500.0


def hull_meets_body(F: ConvexBody, pts: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether co(pts) meets F (LP feasibility in the simplex weights)."""
    pts = np.atleast_2d(pts)
    if len(pts) == 0:
        return False
    X = to_real(pts).T  # (2n, m)
    m = X.shape[1]
    res = linprog(np.zeros(m), A_ub=F.A @ X, b_ub=F.b + tol, A_eq=np.ones((1, m)),
                  b_eq=[1.0], bounds=[(0, None)] * m, method="highs")
    return res.status == 0


def invariant_holds(F: ConvexBody, processed: np.ndarray, remaining: np.ndarray) -> bool:
    if hull_meets_body(F, processed):
        return False
    return not np.any(F.contains(remaining)) if len(remaining) else True


E_RE_Z1 = np.array([1.0, 0.0, 0.0, 0.0])
E_RE_Z2 = np.array([0.0, 0.0, 1.0, 0.0])


def shear_outer(body: SweptBody, c: complex, tail: float) -> SweptBody:
    """{(z1 + d, z2) : z in body, |d - c| <= tail}."""
    return body.add_disc(np.array([c, 0]), tail, np.array([1.0, 0.0]))


def affine_outer(body: SweptBody, T: Affine) -> SweptBody:
    return body.affine(T.matrix, T.shift)


def polyhedral_outer(body: SweptBody, rows: np.ndarray) -> ConvexBody:
    """Outer polyhedron from exact support values along rows and the coordinate axes."""
    axes = np.vstack([np.eye(4), -np.eye(4)])
    return body.outer(np.vstack([rows, axes]))


def _small_exp_sum(nodes, values, x0: float, budget: float, constant=None,
                   max_re: float | None = None):
    """Exponential sum through (nodes, values) whose tail is <= budget on Re z <= x0.

    Returns the smallest kappa on the grid that works (slowest growth).
    """
    nodes = np.asarray(nodes, dtype=complex)
    top = float(np.max(nodes.real)) if len(nodes) else 0.0
    if max_re is not None:
        top = max(top, max_re)
    for kappa in KAPPA_GRID:
        if len(nodes) and kappa * len(nodes) * max(top, 0.0) > EXP_HEADROOM:
            break
        try:
            es = interp_exp_sum(nodes, values, kappa, constant=constant)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(es.coeffs)):
            continue
        if np.max(np.abs(es(nodes) - values), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(values), initial=0.0)):
            continue
        if es.tail_bound(x0) <= budget:
            return es
    return None


def _exp_sum_json(es: ExpSum) -> dict:
    return {"kappa": es.kappa, "coeffs": [[c.real, c.imag] for c in es.coeffs]}


def _distinct(vals: np.ndarray, gap: float = 1e-6) -> bool:
    if len(vals) < 2:
        return True
    d = np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(d.min() >= gap)


def _stretch_second(T: Affine, pts: np.ndarray) -> Affine:
    """Rescale the second functional about -1 so no point has -1 < Re z2 < 0."""
    img = T.apply(pts)
    v = img[:, 1].real
    inside = v[(v > -1) & (v < 0)]
    if len(inside) == 0:
        return T
    s = 1.0 / (float(inside.min()) + 1.0) * 1.001
    M = T.matrix.copy()
    t = T.shift.copy()
    M[1] *= s
    t[1] = s * (t[1] + 1) - 1
    return Affine(M, t)


def _shear_stage(body: SweptBody, F: ConvexBody, pts: np.ndarray, idx: int, log: list,
                 strict: bool = False):
    """One induction step: returns (factors, swept image, polyhedral image, points, sum).

    When no shear keeps the invariant, eps is relaxed to 0.8 eps (at most
    RELAX_STEPS times, never with strict): a smaller tail shrinks the swept image.
    """
    G, nxt = pts[:idx], pts[idx]
    T = normalize_separation(F, G if len(G) else np.empty((0, 2)), nxt[None, :])
    T = _stretch_second(T, pts)
    S1 = affine_outer(body, T)
    F1 = polyhedral_outer(S1, F.image(T.matrix, T.shift).A)
    P1 = T.apply(pts)
    x0 = S1.support(E_RE_Z2)  # sup Re z2 over the image of F
    if not x0 <= -1 + 1e-9:
        raise PipelineError("normalization did not place F in {Re z2 <= -1}")
    eps0 = min(1.0, body_distance(F1, P1))
    right = P1[P1[:, 1].real >= 0]
    beta = np.unique(np.round(right[:, 1], 14))
    a1 = P1[idx, 0]
    M = max(0.0, -a1.real) + 2.0
    for step in range(1 if strict else RELAX_STEPS + 1):
        eps = eps0 * RELAX_FACTOR ** step
        for c in [a1] + [-M * 2 ** i for i in range(8)]:
            f = _small_exp_sum(beta, np.zeros(len(beta)), x0, eps / 2, constant=c)
            if f is None:
                continue
            S = Shear(2, 0, f.expr())
            tail = f.tail_bound(x0)
            S2 = shear_outer(S1, c, tail)
            F2 = polyhedral_outer(S2, F1.A)
            P2 = S.apply(P1)
            if invariant_holds(F2, P2[: idx + 1], P2[idx + 1:]):
                log.append({"step": "shear", "index": idx, "eps": eps, "relaxed": step,
                            "target": [c.real, c.imag], "tail_bound": tail,
                            "sup_re_z2": x0, "f": _exp_sum_json(f)})
                return [T, S], S2, F2, P2, f
    raise PipelineError(f"no admissible shear at stage {idx}")


def prop1_convex(points, F: ConvexBody, R_ver: float = 12.0, L_grid=(1, 2, 4, 8, 16, 32),
                 strict: bool = False) -> HoloCurve:
    """Curve through (alpha_j, a_j) avoiding a convex polyhedron F with no complex line."""
    if F.n != 2:
        raise SceneError("prop1_convex works in C^2")
    if classify_condition_i(F) is not ConditionI.NO_COMPLEX_LINE:
        raise SceneError("F must contain no complex line")
    alphas = np.array([p[0] for p in points], dtype=complex)
    pts = np.array([p[1] for p in points], dtype=complex).reshape(-1, 2)
    if len(pts) and np.any(F.contains(pts, tol=0.0)):
        raise SceneError("points must lie outside F")
    k = len(pts)
    log: list = []
    factors: list = []
    sums: dict = {}
    Fc, P = F, pts
    body = SweptBody(F)
    for idx in range(k):
        if invariant_holds(Fc, P[: idx + 1], P[idx + 1:]):
            log.append({"step": "skip", "index": idx})
            continue
        facs, body, Fc, P, f = _shear_stage(body, Fc, P, idx, log, strict)
        sums[str(len(factors) + 1)] = _exp_sum_json(f)
        factors.extend(facs)
    if k and hull_meets_body(Fc, P):
        raise PipelineError("convex hull of the points still meets F after the induction")

    # final normalization: F in {Re z1 <= -1, Re z2 <= -1}, points in {Re z1 >= 0, Re z2 >= 0}
    probe = P if k else np.array([[1.0 + 0j, 1.0 + 0j]])
    if not k:
        # any point off F serves as the separated set
        x = Fc.feasible_point()
        u = Fc.A[0]
        probe = (x + (1.0 + abs(Fc.b[0] - u @ x)) * u)
        probe = (probe[0::2] + 1j * probe[1::2])[None, :]
    T0 = normalize_separation(Fc, probe, probe)
    best = None
    for lam in (1.0, 2.0, 4.0, 8.0, 16.0):
        for delta in (0.0, 1e-2, 1e-1, 0.5):
            M = T0.matrix.copy()
            t = T0.shift.copy()
            M[1] = M[1] + delta * M[0]
            t[1] = t[1] + delta * t[0]
            M[0] = lam * M[0]
            t[0] = lam * (t[0] + 1) - 1
            T = Affine(M, t)
            Q = T.apply(P) if k else np.empty((0, 2))
            if k and not _distinct(Q[:, 1]):
                continue
            cand = _final_functions(alphas, Q, R_ver, L_grid)
            if cand is None:
                continue
            if best is None or cand["growth"] < best[1]["growth"] - 1e-12:
                best = (T, cand, lam, delta)
            break
    if best is None:
        raise PipelineError("no admissible final interpolation data")
    T, cand, lam, delta = best
    g, h, s = cand["g"], cand["h"], cand["s"]
    facs = [T]
    if g is not None:
        sums[str(len(factors) + 1)] = _exp_sum_json(g)
        facs.append(Shear(2, 0, g.expr()))
    psi = CompositeAut(2, tuple(factors + facs))
    x = EntireExpr.var(0)
    Tt = x + s
    frame = [Tt, substitute(h.expr(), [Tt])]
    comps = invert_aut(psi).push_curve(frame)
    log.append({"step": "final", "lambda": lam, "delta": delta, "shift": [s.real, s.imag],
                "g": None if g is None else _exp_sum_json(g), "h": _exp_sum_json(h),
                "h_bound": h.bound(0.0)})
    relaxations = [{"stage": e["index"], "steps": e["relaxed"], "eps": e["eps"]}
                   for e in log if e.get("relaxed")]
    data = {"frame": {"automorphism": psi.to_json(), "shift": [s.real, s.imag],
                      "h": _exp_sum_json(h), "shear_sums": sums},
            "relaxations": relaxations, "strict": strict}
    return HoloCurve(tuple(comps), "prop1_convex", log, data)


def _final_functions(alphas, Q, R_ver: float, L_grid):
    """Choose the parameter shift s, g (|g| <= 1 on Re <= -1) and h (|h| < 1 on Re <= 0).

    Among admissible choices the one with the smallest growth exponent on the
    verification disc is kept.
    """
    k = len(alphas)
    best = None
    if k == 0:
        h = ExpSum(1.0, (0j,))
        return {"g": None, "h": h, "s": 0j, "growth": 0.0}
    base = float(-np.min(alphas.real))
    for L in L_grid:
        # shift so that Re(alpha + s) >= L; centre the g data when possible
        centre = complex(np.mean(Q[:, 0] - alphas))
        for s in (centre, complex(base + L, 0.0) + 1j * centre.imag):
            ap = alphas + s
            if np.min(ap.real) < L - 1e-12:
                continue
            v = ap - Q[:, 0]
            if k == 1 or np.max(np.abs(v - v[0])) == 0:
                g = None if np.max(np.abs(v)) == 0 else (
                    ExpSum(1.0, (complex(v[0]),)) if abs(v[0]) <= 1 else None)
                if g is None and np.max(np.abs(v)) > 0:
                    g = _small_exp_sum(Q[:, 1], v, -1.0, 1.0 - 1e-9, constant=0j)
                    if g is None:
                        continue
            else:
                g = _small_exp_sum(Q[:, 1], v, -1.0, 1.0 - 1e-9, constant=0j)
                if g is None:
                    continue
            h = _small_exp_sum(ap, Q[:, 1], 0.0, 0.9, constant=0j)
            if h is None:
                continue
            top = float(np.max(ap.real)) + R_ver
            hmax = h.tail_bound(top)
            growth = h.kappa * (len(h.coeffs) - 1) * top
            if g is not None and len(g.coeffs) > 1:
                growth = max(growth, g.kappa * (len(g.coeffs) - 1) * hmax)
            cand = {"g": g, "h": h, "s": s, "growth": growth}
            if best is None or growth < best["growth"] - 1e-12:
                best = cand
    return best


def _exp_sum_from_json(data) -> ExpSum:
    return ExpSum(float(data["kappa"]), tuple(complex(a, b) for a, b in data["coeffs"]))


def verify_frame(frame: dict, components, F: ConvexBody) -> dict:
    """Structural avoidance certificate for a curve Psi^{-1}(T, h(T)).

    Replays the automorphism factors on an outer polyhedral description of F,
    bounding every shear by the tail of its exponential sum, and checks
    Psi(F) in {Re z1 <= 0, Re z2 <= -1}, |h| < 1 on {Re T <= 0} and that the
    curve components are exactly the pulled-back frame curve.
    """
    out = {"pass": False}
    try:
        psi = CompositeAut.from_json(frame["automorphism"])
        h = _exp_sum_from_json(frame["h"])
        sums = {int(k): _exp_sum_from_json(v) for k, v in frame.get("shear_sums", {}).items()}
        shift = complex(*frame["shift"])
    except (KeyError, TypeError, ValueError) as exc:
        out["reason"] = f"malformed frame: {exc}"
        return out
    body = SweptBody(F)
    for i, fac in enumerate(psi.factors):
        if isinstance(fac, Affine):
            body = affine_outer(body, fac)
        elif isinstance(fac, Shear) and fac.axis == 0 and i in sums:
            es = sums[i]
            if fac.f.to_json() != es.expr().to_json():
                out["reason"] = f"factor {i} is not the recorded exponential sum"
                return out
            x0 = body.support(E_RE_Z2)
            if not math.isfinite(x0):
                out["reason"] = f"Re z2 unbounded on the image before factor {i}"
                return out
            body = shear_outer(body, es.coeffs[0], es.tail_bound(x0))
        else:
            out["reason"] = f"factor {i} has no outer bound"
            return out
    sup1 = body.support(E_RE_Z1)
    sup2 = body.support(E_RE_Z2)
    hb = h.bound(0.0) if h.kappa > 0 else math.inf
    x = EntireExpr.var(0)
    Tt = x + shift
    comps = invert_aut(psi).push_curve([Tt, substitute(h.expr(), [Tt])])
    same = [c.to_json() for c in comps] == [c.to_json() for c in components]
    ok = bool(sup1 <= 1e-9 and sup2 <= -1 + 1e-9 and hb < 1 and same)
    out.update({"pass": ok, "sup_re_z1": float(sup1), "sup_re_z2": float(sup2),
                "h_bound": float(hb), "curve_matches_frame": same})
    return out
