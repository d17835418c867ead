"""Immersions of C through finitely many points avoiding a product F x G.

Each point c of the data set is assigned to the block where it is far from the
obstacle: to the first block when c' is far from F, otherwise to the second.
The first-block points a_0, a_1, ... are attached to the comb sets A_0, A_1, ...
(the right half-plane with teeth cut out and the left cells), the second-block
points b_0, b_1, ... to their mirror images.  Every coordinate is fitted to a
constant plus a slowly decaying bump on these sets and interpolates all the
points at the nodes 2, -2, -7 + 7ij, 7 + 7ij.
"""
from __future__ import annotations

import math

import numpy as np

from ..approx import ApproxTask, BasisSpec, Clause, RootDecayTarget, solve_with_escalation
from ..certify import (
    IMMERSION_FLOOR, check_avoidance, check_interpolation, curve_values,
    fnum, grid_meta,
)
from ..numerics import Jet, derivative_values
from ..regions import (
    ConvexBody, Mirror, comb_base, comb_cell, comb_derivative_base, comb_derivative_cells,
    point_distance, sample_region, to_real,
)
from .common import HoloCurve, PipelineError, SceneError

T_STEP = 0.01
T_XMAX = 100.0
T_MARGIN = 1.01
TAIL_XMAX = 1e7  # past this the left side of the t-inequality only gains
TAIL_COUNT = 20000
DECAY = 1.0 / 3.0
START_DEGREE = 16
RELAX_FACTOR = 0.8
RELAX_STEPS = 5
MAX_COLUMNS = 600


# --------------------------------------------------------------------------
# the constant t


def t_margin(t: float, x) -> np.ndarray:
    """Left minus right side of t exp(x^(1/3) - (x+2)^(1/4)) >= 4e(1-t)(x+2)^(4/3)."""
    x = np.asarray(x, dtype=float)
    return (t * np.exp(np.cbrt(x) - (x + 2) ** 0.25)
            - 4 * math.e * (1 - t) * (x + 2) ** (4.0 / 3.0))


def minimal_t(x) -> np.ndarray:
    """Smallest t meeting the inequality at x."""
    x = np.asarray(x, dtype=float)
    c = 4 * math.e * (x + 2) ** (4.0 / 3.0)
    return c / (np.exp(np.cbrt(x) - (x + 2) ** 0.25) + c)


def t_scan(step: float = T_STEP, x_max: float = T_XMAX, margin: float = T_MARGIN) -> dict:
    """t from the grid [0, x_max] and a logarithmic tail up to TAIL_XMAX.

    The tail matters: the worst x lies near 390, beyond the grid.  The safety
    margin shrinks 1 - t by the factor ``margin``.
    """
    x = np.arange(0.0, x_max + step / 2, step)
    need = minimal_t(x)
    i = int(np.argmax(need))
    tail = np.logspace(math.log10(x_max), math.log10(TAIL_XMAX), TAIL_COUNT)
    tneed = minimal_t(tail)
    k = int(np.argmax(tneed))
    base = max(float(need[i]), float(tneed[k]))
    t = 1.0 - (1.0 - base) / margin
    return {"t": t, "grid_min_t": float(need[i]), "grid_worst_x": float(x[i]),
            "tail_min_t": float(tneed[k]), "tail_worst_x": float(tail[k]),
            "grid_margin_min": float(np.min(t_margin(t, x))),
            "tail_margin_min": float(np.min(t_margin(t, tail))),
            "step": step, "x_max": x_max, "safety": margin}


# --------------------------------------------------------------------------
# splitting the points


def split_points(points, F: ConvexBody, G: ConvexBody, eps: float | None = None):
    """Assign each point to the block where a polydisc of radius eps misses the obstacle.

    eps is at most min over points of max(dist(c', F)/sqrt k, dist(c'', G)/sqrt l),
    so a polydisc of radius eps around the chosen block never meets its obstacle.
    Returns (first, second, eps) with first/second lists of full points.
    """
    k, l = F.n, G.n
    pts = [np.asarray(p, dtype=complex) for p in points]
    if not pts:
        raise SceneError("no points")
    d = [(point_distance(F, to_real(p[:k])), point_distance(G, to_real(p[k:]))) for p in pts]
    auto = min(max(a / math.sqrt(k), b / math.sqrt(l)) for a, b in d)
    eps = auto if eps is None else min(float(eps), auto)
    if not eps > 0:
        raise SceneError("a point lies in F x G")
    first = [p for p, (a, _) in zip(pts, d) if a >= eps * math.sqrt(k)]
    second = [p for p, (a, _) in zip(pts, d) if a < eps * math.sqrt(k)]
    return first, second, eps


def _anchor(body: ConvexBody, eps: float, dim: int) -> np.ndarray:
    """A point whose eps-polydisc misses body (stands in for an empty point list)."""
    e = np.zeros(2 * dim)
    e[0] = 1.0
    out = np.zeros(dim, dtype=complex)
    out[0] = body.support(e) + eps * math.sqrt(dim) + 1.0
    return out


def first_nodes(count: int):
    """Parameters of a_0, a_1, ...: 2, then -7 + 7ij."""
    return [2.0 + 0j] + [complex(-7, 7 * j) for j in range(1, count)]


def second_nodes(count: int):
    """Parameters of b_0, b_1, ...: -2, then 7 + 7ij."""
    return [-2.0 + 0j] + [complex(7, 7 * j) for j in range(1, count)]


def fit_radius(J: int) -> float:
    return max(8.0, 7.0 * math.hypot(1.0, J) + 3.0)


# --------------------------------------------------------------------------
# tasks


def coordinate_task(m: int, k: int, A_pts, B_pts, rows, eps: float, t: float,
                    R_fit: float, pitch: float = 0.5) -> ApproxTask:
    """Clauses and interpolation rows for coordinate m (0-based).

    First block: a_0 + (eps/2) t e^{-(z+2)^(1/4)} on A_0 and
    a_j + (eps/2) t e^{-(-z-2)^(1/4)} on A_j.  Second block: the mirror images,
    b_0 + (eps/2) t e^{-(2-z)^(1/4)} and b_j + (eps/2) t e^{-(z-2)^(1/4)}.
    Tolerance (eps/2)(1-t) e^{-|z|^(1/3)} throughout.
    """
    amp, tol = 0.5 * eps * t, 0.5 * eps * (1 - t)
    Ja, Jb = len(A_pts) - 1, len(B_pts) - 1
    clauses = []
    if m < k:
        clauses.append(Clause(comb_base(Jb), RootDecayTarget(A_pts[0][m], amp, 1), tol, DECAY))
        for j in range(1, Ja + 1):
            clauses.append(Clause(comb_cell(j), RootDecayTarget(A_pts[j][m], amp, -1), tol,
                                  DECAY))
    else:
        clauses.append(Clause(Mirror(comb_base(Ja)),
                              RootDecayTarget(B_pts[0][m], amp, -1, 2.0), tol, DECAY))
        for j in range(1, Jb + 1):
            clauses.append(Clause(Mirror(comb_cell(j)),
                                  RootDecayTarget(B_pts[j][m], amp, 1, -2.0), tol, DECAY))
    jets = tuple(Jet(z, (complex(p[m]),)) for z, p in rows)
    return ApproxTask(tuple(clauses), jets, R_fit, R_fit, pitch, pitch / 2)


def _fit_coordinates(k, l, A_pts, B_pts, rows, eps, t, R_fit):
    """Fit every coordinate; returns (components, fit records, worst residual ratio)."""
    comps, fits, worst = [], [], 0.0
    for m in range(k + l):
        task = coordinate_task(m, k, A_pts, B_pts, rows, eps, t, R_fit)
        f, rep, attempts = solve_with_escalation(task, BasisSpec(START_DEGREE, (0.0,), R_fit),
                                                 MAX_COLUMNS)
        if f.arity != 1:
            raise PipelineError("fit returned a non-univariate expression")
        comps.append(f)
        ratios = [a["worst_ratio"] for a in attempts if "worst_ratio" in a]
        worst = max(worst, min(ratios) if ratios else 0.0)
        fits.append({"coordinate": m, "success": rep.success,
                     "ver_residuals": [fnum(r) for r in rep.ver_residuals],
                     "tolerances": [c.tol for c in task.clauses],
                     "jet_residuals": [fnum(r) for r in rep.jet_residuals],
                     "attempts": attempts})
    return comps, fits, worst


def prop6_immersion(points, F: ConvexBody, G: ConvexBody, J: int = 3,
                    eps: float | None = None, strict: bool = False) -> HoloCurve:
    """Immersion through the points avoiding F x G (fits may fail; see the stages)."""
    k, l = F.n, G.n
    first, second, eps = split_points(points, F, G, eps)
    if len(first) > J + 1 or len(second) > J + 1:
        raise SceneError(f"at most {J + 1} points per block with J = {J}")
    scan = t_scan()
    t = scan["t"]
    virtual = []
    A_pts, B_pts = list(first), list(second)
    if not A_pts:
        A_pts = [np.concatenate([_anchor(F, eps, k), np.zeros(l, complex)])]
        virtual.append("first")
    if not B_pts:
        B_pts = [np.concatenate([np.zeros(k, complex), _anchor(G, eps, l)])]
        virtual.append("second")
    rows = []
    if first:
        rows += list(zip(first_nodes(len(first)), first))
    if second:
        rows += list(zip(second_nodes(len(second)), second))
    Jmax = max(len(A_pts), len(B_pts)) - 1
    R_fit = fit_radius(Jmax)
    eps0 = eps
    comps, fits, worst = _fit_coordinates(k, l, A_pts, B_pts, rows, eps, t, R_fit)
    relaxations = []
    # relaxing eps scales bump and tolerance together; the ladder stops at the
    # first step that does not bring the worst residual ratio down
    for step in range(1, 0 if strict else RELAX_STEPS + 1):
        if all(fi["success"] for fi in fits):
            break
        trial = eps0 * RELAX_FACTOR ** step
        c2, f2, w2 = _fit_coordinates(k, l, A_pts, B_pts, rows, trial, t, R_fit)
        relaxations.append({"steps": step, "eps": trial, "worst_ratio": fnum(w2),
                            "kept": bool(w2 < worst)})
        if not w2 < worst:
            break
        comps, fits, worst, eps = c2, f2, w2, trial
    stages = [{"step": "t_scan", **scan},
              {"step": "split", "eps": eps0, "first": len(first), "second": len(second),
               "virtual_anchors": virtual},
              {"step": "fits", "R_fit": R_fit, "coordinates": fits,
               "certified_fit": all(fi["success"] for fi in fits)}]
    if relaxations:
        stages.append({"step": "relax", "eps_start": eps0, "eps": eps, "ladder": relaxations})
    data = {"k": k, "l": l, "eps": eps, "t": t, "J": Jmax, "strict": strict,
            "relaxations": [r for r in relaxations if r["kept"]],
            "a": [[[z.real, z.imag] for z in p] for p in A_pts],
            "b": [[[z.real, z.imag] for z in p] for p in B_pts],
            "rows": [{"node": [z.real, z.imag], "point": [[c.real, c.imag] for c in p]}
                     for z, p in rows]}
    return HoloCurve(tuple(comps), "prop6", stages, data)


# --------------------------------------------------------------------------
# certificate sections


def _pts(data):
    return [np.array([complex(*c) for c in p]) for p in data]


def _derivative_sets(k: int, m: int, Ja: int, Jb: int):
    """Where f'_m must not vanish: E_0 and the cells E (mirrored for the second block)."""
    if m < k:
        return comb_derivative_base(Jb), comb_derivative_cells(Ja)
    return Mirror(comb_derivative_base(Ja)), Mirror(comb_derivative_cells(Jb))


def comb_closeness(curve: HoloCurve, R: float, pitch: float) -> dict:
    """max |f_m - a_{j,m}| / eps over sampled A_j (and the mirrored sets for b_j)."""
    d = curve.data
    k, eps = d["k"], d["eps"]
    A_pts, B_pts = _pts(d["a"]), _pts(d["b"])
    Ja, Jb = len(A_pts) - 1, len(B_pts) - 1
    worst, count, bad = 0.0, 0, 0
    sets = [(comb_base(Jb), A_pts[0], range(k))]
    sets += [(comb_cell(j), A_pts[j], range(k)) for j in range(1, Ja + 1)]
    sets += [(Mirror(comb_base(Ja)), B_pts[0], range(k, curve.n))]
    sets += [(Mirror(comb_cell(j)), B_pts[j], range(k, curve.n)) for j in range(1, Jb + 1)]
    for region, point, coords in sets:
        z = sample_region(region, R, pitch)
        if len(z) == 0:
            continue
        vals = curve_values(curve, z)
        bad += int(np.sum(np.any(np.isnan(vals), axis=1)))
        ok = ~np.any(np.isnan(vals), axis=1)
        for m in coords:
            r = np.abs(vals[ok, m] - point[m]) / eps
            if len(r):
                worst = max(worst, float(r.max()))
        count += len(z)
    return {"pass": bool(worst < 1 and bad == 0), "max_ratio": fnum(worst),
            "unevaluable": bad, "eps": eps, "grid": grid_meta(R, pitch, count)}


def derivative_floor(curve: HoloCurve, R: float, pitch: float) -> dict:
    """min |f'_m| on sampled E_0 and E (mirrored for the second block)."""
    d = curve.data
    k = d["k"]
    Ja, Jb = len(d["a"]) - 1, len(d["b"]) - 1
    floors, count, bad = [], 0, 0
    for m, f in enumerate(curve.components):
        lo = math.inf
        for region in _derivative_sets(k, m, Ja, Jb):
            z = sample_region(region, R, pitch)
            if len(z) == 0:
                continue
            dv = np.asarray(derivative_values(f, z, 1, mask=True))
            ok = ~np.isnan(dv)
            bad += int(np.sum(~ok))
            if ok.any():
                lo = min(lo, float(np.min(np.abs(dv[ok]))))
            count += len(z)
        floors.append(lo)
    floor = min(floors)
    return {"pass": bool(floor > IMMERSION_FLOOR and bad == 0), "threshold": IMMERSION_FLOOR,
            "floor": fnum(floor), "per_coordinate": [fnum(x) for x in floors],
            "unevaluable": bad, "grid": grid_meta(R, pitch, count)}


def derivative_bound(curve: HoloCurve, R: float, pitch: float) -> dict:
    """The Cauchy-estimate floor on sampled E_0, with the measured fit residual.

    eps t / (8 |z+2|^(4/3)) e^{-|z+2|^(1/4)} - rho (eps/2)(1-t) e^{1-|z|^(1/3)}, where
    rho is the worst measured residual on A_0 relative to its tolerance (rho <= 1
    when the fit meets the clause).  Reported, not enforced: it only holds when
    the clause does.
    """
    d = curve.data
    k, eps, t = d["k"], d["eps"], d["t"]
    A_pts, B_pts = _pts(d["a"]), _pts(d["b"])
    Ja, Jb = len(A_pts) - 1, len(B_pts) - 1
    out = []
    for m, f in enumerate(curve.components):
        if m < k:
            region, base, w = comb_derivative_base(Jb), comb_base(Jb), 1
            target = RootDecayTarget(A_pts[0][m], 0.5 * eps * t, 1)
        else:
            region, base, w = Mirror(comb_derivative_base(Ja)), Mirror(comb_base(Ja)), -1
            target = RootDecayTarget(B_pts[0][m], 0.5 * eps * t, -1, 2.0)
        zs = sample_region(base, R, pitch)
        vals = curve_values(HoloCurve((f, f)), zs)[:, 0]
        tol = 0.5 * eps * (1 - t)
        res = np.abs(vals - target(zs)) * np.exp(np.abs(zs) ** DECAY) / tol
        rho = float(np.nanmax(res)) if len(res) else 0.0
        z = sample_region(region, R, pitch)
        s = np.abs(w * z + 2)
        lower = eps * t / (8 * s ** (4.0 / 3.0)) * np.exp(-s ** 0.25)
        slack = lower - rho * tol * np.exp(1 - np.abs(z) ** DECAY)
        out.append({"coordinate": m, "residual_ratio": fnum(rho),
                    "min_bound": fnum(float(np.min(slack))) if len(z) else None})
    ok = all(o["min_bound"] is not None and o["min_bound"] > 0 for o in out)
    return {"pass": ok, "enforced": False, "coordinates": out}


def t_section(t: float) -> dict:
    x = np.arange(0.0, T_XMAX + T_STEP / 2, T_STEP)
    marg = t_margin(t, x)
    i = int(np.argmin(marg))
    return {"pass": bool(marg[i] >= 0), "t": t, "margin_min": float(marg[i]),
            "worst_x": float(x[i]), "grid": {"x_max": T_XMAX, "step": T_STEP}}


def prop6_sections(curve: HoloCurve, F: ConvexBody, G: ConvexBody, R: float,
                   pitch: float) -> dict:
    rows = [(complex(*r["node"]), np.array([complex(*c) for c in r["point"]]))
            for r in curve.data["rows"]]
    return {"interpolation": check_interpolation(curve, rows),
            "t_inequality": t_section(curve.data["t"]),
            "immersion": derivative_floor(curve, R, pitch),
            "derivative_bound": derivative_bound(curve, R, pitch),
            "comb_closeness": comb_closeness(curve, R, pitch),
            "avoidance": check_avoidance(curve, ConvexBody.product_of(F, G), R, pitch)}
