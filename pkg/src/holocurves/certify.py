"""Certificate sections for constructed curves.

Every section is recomputed from the curve expressions and the obstacle
description alone.  Sampled sections carry their grid metadata; structural
sections never look at a grid.
"""
from __future__ import annotations

import math

import numpy as np

from .automorphisms import HyperplaneUnion
from .numerics import eval_expr, derivative_values, nonvanishing
from .regions import lattice

SCHEMA = 1
INTERP_TOL = 1e-8
IMMERSION_FLOOR = 1e-10
INJECTIVITY_TOL = 1e-9
INJECTIVITY_GAP = 0.01
PROXY_ANGLES = 720
PROXY_NOTE = ("PROXY: minimum modulus on circles of a finite-stage curve; "
              "properness of any limit is not claimed")


def fnum(x):
    """JSON-safe number: finite float or None."""
    x = float(x)
    return x if math.isfinite(x) else None


def grid_meta(R: float, pitch: float, count: int) -> dict:
    return {"R": float(R), "pitch": float(pitch), "count": int(count)}


def curve_values(curve, t) -> np.ndarray:
    """Components at t, shape (m, n); rows that overflow come back as NaN."""
    t = np.asarray(t, dtype=complex)
    cols = [np.broadcast_to(eval_expr(c, [t], mask=True), t.shape) for c in curve.components]
    out = np.stack(cols, -1).astype(complex)
    out[np.any(np.isnan(out), axis=1)] = np.nan
    return out


def curve_derivatives(curve, t) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    cols = [np.broadcast_to(derivative_values(c, t, 1, mask=True), t.shape)
            for c in curve.components]
    out = np.stack(cols, -1).astype(complex)
    out[np.any(np.isnan(out), axis=1)] = np.nan
    return out


# --------------------------------------------------------------------------
# sections


def check_interpolation(curve, points=(), jets=()) -> dict:
    """points: [(alpha, a)]; jets: [(t0, value vector, derivative vector)]."""
    res = []
    for alpha, a in points:
        got = curve_values(curve, np.array([alpha]))[0]
        a = np.asarray(a, dtype=complex)
        res.append(float(np.linalg.norm(got - a) / max(1.0, np.linalg.norm(a))))
    for t0, c, X in jets:
        got = curve_values(curve, np.array([t0]))[0]
        d = curve_derivatives(curve, np.array([t0]))[0]
        c, X = np.asarray(c, dtype=complex), np.asarray(X, dtype=complex)
        res.append(float(np.linalg.norm(got - c) / max(1.0, np.linalg.norm(c))))
        res.append(float(np.linalg.norm(d - X) / max(1.0, np.linalg.norm(X))))
    res = [r if math.isfinite(r) else math.inf for r in res]
    worst = max(res, default=0.0)
    return {"pass": bool(worst <= INTERP_TOL), "threshold": INTERP_TOL,
            "residuals": [fnum(r) for r in res], "max": fnum(worst)}


def obstacle_distance(F, z: np.ndarray) -> np.ndarray:
    """Lower bound on the distance from points z (m, n) to F (exact for hyperplanes)."""
    if isinstance(F, HyperplaneUnion):
        return F.distance(z)
    return F.distance_lower_bound(z)


def structural_avoidance(curve, F) -> bool:
    """Coordinate-hyperplane obstacles are avoided when the matching components
    are products of exponentials and non-zero constants."""
    if not isinstance(F, HyperplaneUnion) or not F.normalized:
        return False
    return all(nonvanishing(curve.components[i]) for i in F.indices)


def check_avoidance(curve, F, R: float, pitch: float, structural: bool | None = None) -> dict:
    t = lattice(R, pitch)
    vals = curve_values(curve, t)
    ok = ~np.any(np.isnan(vals), axis=1)
    margin = float(np.min(obstacle_distance(F, vals[ok]))) if ok.any() else math.nan
    unevaluable = int(np.sum(~ok))
    struct = structural_avoidance(curve, F) if structural is None else bool(structural)
    sampled_pass = bool(ok.any() and margin > 0 and unevaluable == 0)
    return {"pass": bool(struct or sampled_pass), "structural": struct,
            "margin": fnum(margin), "unevaluable": unevaluable,
            "grid": grid_meta(R, pitch, len(t))}


def check_immersion(curve, R: float, pitch: float, structural: bool = False) -> dict:
    t = lattice(R, pitch)
    d = curve_derivatives(curve, t)
    ok = ~np.any(np.isnan(d), axis=1)
    floor = float(np.min(np.linalg.norm(d[ok], axis=1))) if ok.any() else math.nan
    unevaluable = int(np.sum(~ok))
    sampled = bool(ok.any() and floor > IMMERSION_FLOOR)
    return {"pass": bool(sampled and (unevaluable == 0 or structural)),
            "threshold": IMMERSION_FLOOR, "floor": fnum(floor), "structural": structural,
            "unevaluable": unevaluable, "grid": grid_meta(R, pitch, len(t))}


def check_injectivity(curve, R: float, pitch: float, structural: bool = False) -> dict:
    t = lattice(R, pitch)
    v = curve_values(curve, t)
    ok = ~np.any(np.isnan(v), axis=1)
    t, v = t[ok], v[ok]
    best = math.inf
    for i in range(len(t) - 1):
        gap = np.abs(t[i + 1:] - t[i])
        far = gap >= INJECTIVITY_GAP
        if far.any():
            sep = np.linalg.norm(v[i + 1:][far] - v[i], axis=1)
            best = min(best, float(sep.min()))
    unevaluable = int(np.sum(~ok))
    sampled = bool(best >= INJECTIVITY_TOL)
    return {"pass": bool(sampled and (unevaluable == 0 or structural)),
            "threshold": INJECTIVITY_TOL, "parameter_gap": INJECTIVITY_GAP,
            "min_separation": fnum(best), "structural": structural,
            "unevaluable": unevaluable, "grid": grid_meta(R, pitch, len(t))}


def properness_proxy(curve, radii, threshold: float | None = None) -> dict:
    angles = np.exp(2j * np.pi * np.arange(PROXY_ANGLES) / PROXY_ANGLES)
    mins = []
    for r in radii:
        v = curve_values(curve, r * angles)
        norms = np.linalg.norm(v, axis=1)
        mins.append(float(np.min(norms)) if not np.any(np.isnan(norms)) else math.nan)
    increasing = all(b > a for a, b in zip(mins, mins[1:]))
    final_ok = bool(mins and math.isfinite(mins[-1])
                    and mins[-1] > (0.0 if threshold is None else threshold))
    return {"pass": bool(increasing and final_ok), "enforced": threshold is not None,
            "label": PROXY_NOTE, "radii": [float(r) for r in radii],
            "min_modulus": [fnum(m) for m in mins],
            "threshold": None if threshold is None else float(threshold),
            "angles": PROXY_ANGLES}


def lempert_witness(alpha1: complex, alpha2: complex, R: float) -> float:
    """|alpha2 - alpha1| / R for the disc zeta -> phi(alpha1 + R zeta)."""
    return abs(alpha2 - alpha1) / R


def lempert_section(points, R_ver: float, avoidance_pass: bool) -> dict:
    if len(points) < 2:
        return {"witness": None, "reason": "fewer than two interpolation points"}
    a1, a2 = complex(points[0][0]), complex(points[1][0])
    R = R_ver - abs(a1)
    if not avoidance_pass:
        return {"witness": None, "reason": "avoidance not certified"}
    if R < abs(a2 - a1) or R <= 0:
        return {"witness": None, "reason": "disc around alpha_1 leaves the verified radius"}
    return {"witness": lempert_witness(a1, a2, R), "alpha": [[a1.real, a1.imag],
            [a2.real, a2.imag]], "disc_radius": R}


def kobayashi_section(X, R_ver: float, avoidance_pass: bool) -> dict:
    if not avoidance_pass:
        return {"witness": None, "reason": "avoidance not certified"}
    norm = float(np.linalg.norm(np.asarray(X, dtype=complex)))
    return {"witness": norm / R_ver, "disc_radius": float(R_ver),
            "note": "disc zeta -> f(R zeta) has derivative R X at 0"}


def assemble(sections: dict, R_ver: float, pitch: float, extra: dict | None = None) -> dict:
    """Certificate with overall pass = every enforced section passes."""
    verdicts = []
    for name, sec in sections.items():
        if isinstance(sec, dict) and "pass" in sec and sec.get("enforced", True):
            verdicts.append(bool(sec["pass"]))
    cert = {"schema": SCHEMA, "R_ver": float(R_ver), "pitch": float(pitch),
            "pass": all(verdicts), "sections": sections}
    if extra:
        cert.update(extra)
    return cert
