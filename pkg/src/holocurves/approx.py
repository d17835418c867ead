"""Entire functions close to prescribed targets on unbounded regions.

Tasks are truncated to a disc, sampled, and solved as a minimax problem over
a dictionary of terms (z/s)^m e^{kz}.  Jet constraints are eliminated
exactly first (particular solution plus nullspace), and the remaining freedom
is fitted with Lawson-style iteratively reweighted least squares.  Residuals
are then re-measured on an independent finer grid.

Exponential sums sum_m c_m e^{m kappa z} get their own small toolkit: on a
half-plane {Re z <= x0} their modulus is bounded by sum |c_m| e^{m kappa x0},
which is a global bound rather than a sampled one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import (
    EntireExpr, ExprOverflowError, Jet, cfrom, cpair, eval_expr, eval_jet,
    lagrange_interpolant,
)
from .regions import Region, lattice, region_from_json

IRLS_ITERS = 40
IRLS_DAMPING = 0.8
RIDGE = 1e-12
MAX_DEGREE = 64
MAX_RATES = 32
JET_TOL = 1e-8


# --------------------------------------------------------------------------
# targets and tasks


@dataclass(frozen=True)
class ConstTarget:
    value: complex

    def __call__(self, z):
        return np.full(np.shape(z), complex(self.value))

    def to_json(self):
        return {"kind": "const", "value": cpair(self.value)}


@dataclass(frozen=True)
class ExprTarget:
    expr: EntireExpr

    def __call__(self, z):
        return np.asarray(eval_expr(self.expr, [np.asarray(z, dtype=complex)]))

    def to_json(self):
        return {"kind": "expr", "expr": self.expr.to_json()}


@dataclass(frozen=True)
class RootDecayTarget:
    """base + amp * exp(-(sign * z + offset)^(1/4)), principal fourth root.

    offset defaults to 2 * sign, i.e. sign * (z + 2).  Not entire (branch cut
    where the root argument is a negative real); used as a sampling target on
    regions that stay off the cut.
    """

    base: complex
    amp: float
    sign: int
    offset: float | None = None

    def argument(self, z):
        off = 2.0 * self.sign if self.offset is None else self.offset
        return self.sign * np.asarray(z, dtype=complex) + off

    def __call__(self, z):
        return self.base + self.amp * np.exp(-(self.argument(z) ** 0.25))

    def to_json(self):
        out = {"kind": "root_decay", "base": cpair(self.base), "amp": self.amp,
               "sign": self.sign}
        if self.offset is not None:
            out["offset"] = self.offset
        return out


def target_from_json(data):
    if isinstance(data, (int, float, list)):
        return ConstTarget(cfrom(data))
    kind = data["kind"]
    if kind == "const":
        return ConstTarget(cfrom(data["value"]))
    if kind == "expr":
        return ExprTarget(EntireExpr.from_json(data["expr"]))
    if kind == "root_decay":
        off = data.get("offset")
        return RootDecayTarget(cfrom(data["base"]), float(data["amp"]), int(data["sign"]),
                               None if off is None else float(off))
    raise ValueError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class Clause:
    """|f - target| <= tol (uniform) or <= tol * exp(-|z|^decay) (decay)."""

    region: Region
    target: object
    tol: float
    decay: float | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("clause tolerance must be positive")
        if not callable(self.target):
            object.__setattr__(self, "target", ConstTarget(complex(self.target)))

    def weight(self, z) -> np.ndarray:
        if self.decay is None:
            return np.ones(np.shape(z))
        return np.exp(np.abs(z) ** self.decay)

    def to_json(self):
        return {"region": self.region.to_json(), "target": self.target.to_json(),
                "tol": self.tol, "weight": "uniform" if self.decay is None
                else {"decay": self.decay}}

    @classmethod
    def from_json(cls, data):
        w = data.get("weight", "uniform")
        decay = None if w == "uniform" else float(w["decay"])
        return cls(region_from_json(data["region"]), target_from_json(data["target"]),
                   float(data["tol"]), decay)


@dataclass(frozen=True)
class ApproxTask:
    clauses: tuple = ()
    jets: tuple = ()
    R_fit: float = 8.0
    R_ver: float = 12.0
    fit_pitch: float = 0.25
    ver_pitch: float = 0.125

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        object.__setattr__(self, "jets", tuple(self.jets))
        if self.R_ver < self.R_fit:
            raise ValueError("verification radius must be at least the fit radius")
        pts = [j.point for j in self.jets]
        if len(set(pts)) != len(pts):
            raise ValueError("jet points must be pairwise distinct")
        if not self.clauses and not self.jets:
            raise ValueError("task needs at least one clause or jet")

    def to_json(self):
        return {"clauses": [c.to_json() for c in self.clauses],
                "jets": [j.to_json() for j in self.jets],
                "R_fit": self.R_fit, "R_ver": self.R_ver,
                "fit_pitch": self.fit_pitch, "ver_pitch": self.ver_pitch}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(Clause.from_json(c) for c in data.get("clauses", [])),
                   tuple(Jet.from_json(j) for j in data.get("jets", [])),
                   float(data.get("R_fit", 8.0)), float(data.get("R_ver", 12.0)),
                   float(data.get("fit_pitch", 0.25)), float(data.get("ver_pitch", 0.125)))


@dataclass(frozen=True)
class BasisSpec:
    degree: int = 10
    rates: tuple = (0.0,)
    scale: float | None = None  # polynomial variable is z / scale

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(complex(r) for r in self.rates))
        if self.degree < 0 or self.degree > MAX_DEGREE:
            raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
        if not 0 < len(self.rates) <= MAX_RATES:
            raise ValueError(f"between 1 and {MAX_RATES} rates")

    @property
    def size(self) -> int:
        return (self.degree + 1) * len(self.rates)


@dataclass
class FitReport:
    success: bool
    fit_residuals: list
    ver_residuals: list
    jet_residuals: list
    basis_size: int
    condition: float
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"success": self.success,
                "fit_residuals": [float(r) for r in self.fit_residuals],
                "ver_residuals": [float(r) for r in self.ver_residuals],
                "jet_residuals": [float(r) for r in self.jet_residuals],
                "basis_size": self.basis_size, "condition": float(self.condition),
                "notes": list(self.notes)}


# --------------------------------------------------------------------------
# dictionary


def _term_derivative(z, m, k, s, order):
    """d^order/dz^order of (z/s)^m e^{kz} at points z."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    ekz = np.exp(k * z) if k != 0 else np.ones(z.shape, dtype=complex)
    for i in range(min(order, m) + 1):
        dpoly = math.perm(m, i) * z ** (m - i) / s ** m
        kpow = k ** (order - i) if order - i > 0 else 1.0
        if order - i > 0 and k == 0:
            continue
        out += math.comb(order, i) * dpoly * kpow
    return out * ekz


def design_matrix(z, basis: BasisSpec, scale: float, order: int = 0) -> np.ndarray:
    cols = [_term_derivative(z, m, k, scale, order)
            for k in basis.rates for m in range(basis.degree + 1)]
    return np.column_stack(cols) if cols else np.zeros((len(z), 0))


def basis_expr(coeffs, basis: BasisSpec, scale: float) -> EntireExpr:
    x = EntireExpr.var(0)
    u = x * (1.0 / scale)
    total = None
    D = basis.degree + 1
    for idx, k in enumerate(basis.rates):
        c = coeffs[idx * D:(idx + 1) * D]
        if not np.any(c):
            continue
        term = EntireExpr.poly(c, u)
        if k != 0:
            term = term * (x * k).exp()
        total = term if total is None else total + term
    return total if total is not None else EntireExpr.const(0)


# --------------------------------------------------------------------------
# residual measurement


def _clause_samples(clause: Clause, R: float, h: float) -> np.ndarray:
    z = lattice(R, h)
    return z[clause.region.contains(z)]


def clause_residual(f: EntireExpr, clause: Clause, z: np.ndarray) -> float:
    """max over z of |f - target| * weight (compare against clause.tol)."""
    if len(z) == 0:
        return 0.0
    try:
        vals = np.asarray(eval_expr(f, [z]))
    except ExprOverflowError:
        return math.inf
    r = np.abs(vals - clause.target(z)) * clause.weight(z)
    return float(np.max(r)) if np.all(np.isfinite(r)) else math.inf


def jet_residuals(f: EntireExpr, jets: Sequence[Jet]) -> list:
    out = []
    for jet in jets:
        got = eval_jet(f, jet.point, jet.order).values
        for g, want in zip(got, jet.values):
            out.append(abs(g - want) / max(1.0, abs(want)))
    return out


def verify_residual(f: EntireExpr, task: ApproxTask, h: float | None = None) -> FitReport:
    """Fresh residual measurement on the verification disc at pitch h."""
    h = task.ver_pitch if h is None else h
    ver = [clause_residual(f, c, _clause_samples(c, task.R_ver, h)) for c in task.clauses]
    jets = jet_residuals(f, task.jets)
    ok = all(r <= c.tol for r, c in zip(ver, task.clauses)) and all(j <= JET_TOL for j in jets)
    return FitReport(ok, [], ver, jets, 0, math.nan, [f"verification pitch {h}"])


# --------------------------------------------------------------------------
# solver


def _nullspace(C: np.ndarray, tol: float = 1e-12):
    if C.shape[0] == 0:
        return np.eye(C.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(C)
    rank = int(np.sum(s > tol * s[0])) if len(s) else 0
    return vh[rank:].conj().T


def _jet_system(jets, basis, scale):
    rows, rhs = [], []
    for jet in jets:
        for order, v in enumerate(jet.values):
            rows.append(design_matrix(np.array([jet.point]), basis, scale, order)[0])
            rhs.append(v)
    P = basis.size
    if not rows:
        return np.zeros((0, P), dtype=complex), np.zeros(0, dtype=complex)
    return np.array(rows), np.array(rhs, dtype=complex)


def _hermite_fallback(task: ApproxTask) -> EntireExpr:
    if all(j.order == 0 for j in task.jets):
        return lagrange_interpolant([j.point for j in task.jets], [j.values[0] for j in task.jets])
    count = sum(j.order + 1 for j in task.jets)
    pts = np.array([j.point for j in task.jets])
    scale = max(1.0, float(np.max(np.abs(pts))))
    basis = BasisSpec(count - 1, (0.0,))
    C, d = _jet_system(task.jets, basis, scale)
    coeffs = np.linalg.solve(C, d)
    coeffs = coeffs + np.linalg.solve(C, d - C @ coeffs)
    return basis_expr(coeffs, basis, scale)


def solve_task(task: ApproxTask, basis: BasisSpec) -> tuple[EntireExpr, FitReport]:
    if not task.clauses:
        f = _hermite_fallback(task)
        jets = jet_residuals(f, task.jets)
        return f, FitReport(all(j <= JET_TOL for j in jets), [], [], jets,
                            sum(j.order + 1 for j in task.jets), 1.0,
                            ["no clauses: minimal-degree interpolant"])
    scale = basis.scale or task.R_fit
    blocks, targets = [], []
    for clause in task.clauses:
        z = _clause_samples(clause, task.R_fit, task.fit_pitch)
        if len(z) == 0:
            continue
        w = clause.weight(z) / clause.tol
        blocks.append(design_matrix(z, basis, scale) * w[:, None])
        targets.append(clause.target(z) * w)
    notes = []
    if not blocks:
        notes.append("no clause samples inside the fit disc")
        f = _hermite_fallback(task) if task.jets else EntireExpr.const(0)
        report = verify_residual(f, task)
        report.notes = notes + report.notes
        return f, report
    Phi = np.vstack(blocks)
    t = np.concatenate(targets)
    C, d = _jet_system(task.jets, basis, scale)

    colmax = np.max(np.abs(Phi), axis=0)
    if C.shape[0]:
        colmax = np.maximum(colmax, np.max(np.abs(C), axis=0))
    colmax[colmax == 0] = 1.0
    Phi_s, C_s = Phi / colmax, C / colmax

    if C_s.shape[0]:
        c0 = np.linalg.lstsq(C_s, d, rcond=None)[0]
        c0 = c0 + np.linalg.lstsq(C_s, d - C_s @ c0, rcond=None)[0]
    else:
        c0 = np.zeros(Phi_s.shape[1], dtype=complex)
    N = _nullspace(C_s)
    M = Phi_s @ N
    b = t - Phi_s @ c0
    cond = float(np.linalg.cond(M)) if M.shape[1] else 1.0

    if M.shape[1] == 0:
        y = np.zeros(0, dtype=complex)
    else:
        y = _irls(M, b)
    coeffs = (c0 + N @ y) / colmax
    f = basis_expr(coeffs, basis, scale)
    fit_res = [clause_residual(f, c, _clause_samples(c, task.R_fit, task.fit_pitch))
               for c in task.clauses]
    ver = verify_residual(f, task)
    ok = ver.success and all(r <= c.tol for r, c in zip(fit_res, task.clauses))
    return f, FitReport(ok, fit_res, ver.ver_residuals, ver.jet_residuals, basis.size,
                        cond, notes)


def _irls(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lawson iteration for min_y max_i |M y - b|_i."""
    m, p = M.shape
    omega = np.full(m, 1.0 / m)
    ridge = math.sqrt(RIDGE) * np.eye(p)
    best_y, best = None, math.inf
    for _ in range(IRLS_ITERS):
        sw = np.sqrt(omega)
        A = np.vstack([M * sw[:, None], ridge])
        rhs = np.concatenate([b * sw, np.zeros(p)])
        y = np.linalg.lstsq(A, rhs, rcond=None)[0]
        r = np.abs(M @ y - b)
        peak = float(r.max())
        if peak < best:
            best, best_y = peak, y
        if peak == 0:
            break
        update = omega * r ** IRLS_DAMPING  # damped Lawson step
        total = update.sum()
        if total == 0:
            break
        omega = update / total
    return best_y


def escalation_ladder(basis: BasisSpec):
    """Bases tried in order: the given one, doubled degrees up to the cap,
    then extra rates +-1/2 and +-1/4 at the cap."""
    yield basis
    d = basis.degree
    while d < MAX_DEGREE:
        d = min(MAX_DEGREE, max(1, 2 * d))
        yield BasisSpec(d, basis.rates, basis.scale)
    rates = list(basis.rates)
    for extra in (0.5, -0.5, 0.25, -0.25):
        if complex(extra) not in rates and len(rates) < MAX_RATES:
            rates.append(complex(extra))
    yield BasisSpec(MAX_DEGREE, tuple(rates), basis.scale)


def solve_with_escalation(task: ApproxTask, basis: BasisSpec, max_columns: int = 600):
    """Try the escalation ladder until a fit succeeds.

    Returns (f, report, attempts); on failure the best attempt (smallest
    worst tol-relative verification residual) is returned with success False.
    """
    attempts = []
    best = None
    for b in escalation_ladder(basis):
        if b.size > max_columns:
            attempts.append({"degree": b.degree, "rates": len(b.rates), "skipped": "size"})
            continue
        f, rep = solve_task(task, b)
        ratio = max([r / c.tol for r, c in zip(rep.ver_residuals, task.clauses)] or [0.0])
        attempts.append({"degree": b.degree, "rates": len(b.rates), "worst_ratio": ratio,
                         "success": rep.success})
        if best is None or ratio < best[2]:
            best = (f, rep, ratio)
        if rep.success:
            return f, rep, attempts
    return best[0], best[1], attempts


# --------------------------------------------------------------------------
# exponential sums


@dataclass(frozen=True)
class ExpSum:
    """sum_m coeffs[m] * exp(m * kappa * z), kappa > 0."""

    kappa: float
    coeffs: tuple

    def expr(self) -> EntireExpr:
        x = EntireExpr.var(0)
        return EntireExpr.poly(self.coeffs, (x * self.kappa).exp())

    def __call__(self, z):
        w = np.exp(self.kappa * np.asarray(z, dtype=complex))
        return np.polyval(np.asarray(self.coeffs)[::-1], w)

    def tail_bound(self, x0: float, start: int = 1) -> float:
        """sup over Re z <= x0 of |sum_{m >= start} c_m e^{m kappa z}|, rigorously."""
        return float(sum(abs(c) * math.exp(m * self.kappa * x0)
                         for m, c in enumerate(self.coeffs) if m >= start))

    def bound(self, x0: float) -> float:
        return abs(self.coeffs[0]) + self.tail_bound(x0) if self.coeffs else 0.0


def vandermonde_solve(nodes, values, powers) -> np.ndarray:
    """Coefficients c with sum_p c_p w^p = value at each node (square system)."""
    w = np.asarray(nodes, dtype=complex)
    V = np.array([[wi ** p for p in powers] for wi in w])
    c = np.linalg.solve(V, np.asarray(values, dtype=complex))
    return c + np.linalg.solve(V, np.asarray(values, dtype=complex) - V @ c)


def interp_exp_sum(nodes, values, kappa: float, constant: complex | None = None) -> ExpSum:
    """Exponential sum through (nodes, values).

    With ``constant`` given, c_0 is pinned to it and the remaining len(nodes)
    coefficients m = 1..k are solved; otherwise m = 0..k-1.
    """
    z = np.asarray(nodes, dtype=complex)
    v = np.asarray(values, dtype=complex)
    if len(z) == 0:
        return ExpSum(kappa, (0j if constant is None else complex(constant),))
    w = np.exp(kappa * z)
    if constant is None:
        c = vandermonde_solve(w, v, range(len(z)))
        return ExpSum(kappa, tuple(complex(x) for x in c))
    c = vandermonde_solve(w, v - constant, range(1, len(z) + 1))
    return ExpSum(kappa, (complex(constant),) + tuple(complex(x) for x in c))
