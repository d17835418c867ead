"""Lie-Trotter splitting of time-dependent sums of complete shear/overshear fields.

A shear field moves z_axis with velocity g(others); an overshear field with
velocity z_axis * g(others).  Both integrate in closed form, so a frozen
window of the field is an exact shear/overshear automorphism.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .automorphisms import CompositeAut, Overshear, Shear, apply_aut
from .numerics import EntireExpr, cfrom, cpair, eval_expr


@dataclass(frozen=True)
class FieldTerm:
    kind: str  # "shear" | "overshear"
    axis: int
    g: EntireExpr
    weight: tuple = (1.0,)  # polynomial in t, ascending coefficients

    def __post_init__(self):
        if self.kind not in ("shear", "overshear"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if len(self.weight) > 4:
            raise ValueError("time weight degree is at most 3")
        if not 0 <= self.axis <= self.g.arity:
            raise ValueError("axis out of range")
        object.__setattr__(self, "weight", tuple(float(w) for w in self.weight))

    @property
    def n(self) -> int:
        return self.g.arity + 1

    def time_weight(self, t: float) -> float:
        return float(np.polyval(self.weight[::-1], t))

    def velocity(self, z: np.ndarray) -> np.ndarray:
        """Autonomous part of the field at points z (shape (..., n))."""
        others = [z[..., i] for i in range(self.n) if i != self.axis]
        v = np.zeros_like(z)
        gv = eval_expr(self.g, others)
        v[..., self.axis] = gv * z[..., self.axis] if self.kind == "overshear" else gv
        return v

    def to_json(self):
        return {"kind": self.kind, "axis": self.axis, "g": self.g.to_json(),
                "weight": list(self.weight)}

    @classmethod
    def from_json(cls, data):
        return cls(data["kind"], int(data["axis"]), EntireExpr.from_json(data["g"]),
                   tuple(data.get("weight", [1.0])))


def exact_flow(term: FieldTerm, s: float):
    """Time-s map of the autonomous field."""
    g = term.g * float(s)
    if term.kind == "shear":
        return Shear(term.n, term.axis, g)
    return Overshear(term.n, term.axis, g)


@dataclass(frozen=True)
class SplittingSchedule:
    N: int
    terms: tuple

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        object.__setattr__(self, "terms", tuple(self.terms))
        if len({t.n for t in self.terms}) > 1:
            raise ValueError("terms disagree on dimension")

    @property
    def n(self) -> int:
        return self.terms[0].n


def splitting_compose(sched: SplittingSchedule) -> CompositeAut:
    """h_{N-1} o ... o h_0, each window freezing the weights at t = j/N."""
    factors = []
    for j in range(sched.N):
        t = j / sched.N
        for term in sched.terms:
            factors.append(exact_flow(term, term.time_weight(t) / sched.N))
    return CompositeAut(sched.n, tuple(factors))


def reference_flow(terms: Sequence[FieldTerm], z0, rtol: float = 1e-13,
                   atol: float = 1e-15) -> np.ndarray:
    """Time-one map of the time-dependent field by adaptive DOP853."""
    z0 = np.asarray(z0, dtype=complex)

    def rhs(t, y):
        out = np.zeros_like(y)
        for term in terms:
            out += term.time_weight(t) * term.velocity(y)
        return out

    sol = solve_ivp(rhs, (0.0, 1.0), z0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return sol.y[:, -1]


def convergence_study(terms: Sequence[FieldTerm], Ns: Sequence[int], probes) -> list:
    """Rows (N, max probe error) sorted by N."""
    probes = np.atleast_2d(np.asarray(probes, dtype=complex))
    ref = np.array([reference_flow(terms, p) for p in probes])
    rows = []
    for N in sorted(Ns):
        a = splitting_compose(SplittingSchedule(N, tuple(terms)))
        got = apply_aut(a, probes)
        rows.append((N, float(np.max(np.linalg.norm(got - ref, axis=1)))))
    return rows


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "error"])
    for N, err in rows:
        w.writerow([N, repr(float(err))])
    return buf.getvalue()


def schedule_from_json(data: dict):
    """Returns (terms, N list, probes)."""
    terms = tuple(FieldTerm.from_json(t) for t in data["terms"])
    Ns = [int(n) for n in data.get("N", [8, 16, 32, 64])]
    probes = np.array([[cfrom(c) for c in p] for p in data["probes"]])
    return terms, Ns, probes


def schedule_to_json(terms, Ns, probes) -> dict:
    return {"terms": [t.to_json() for t in terms], "N": list(Ns),
            "probes": [[cpair(c) for c in p] for p in np.atleast_2d(probes)]}


def noncommuting_benchmark():
    """dz1/dt = z2, dz2/dt = z1 split into its two shear parts."""
    x = EntireExpr.var(0)
    return (FieldTerm("shear", 0, x), FieldTerm("shear", 1, x))


def commuting_benchmark():
    """Overshear on axis 0 and shear on axis 1 in C^3, with constant g."""
    return (FieldTerm("overshear", 0, EntireExpr.const(0.5, 2)),
            FieldTerm("shear", 1, EntireExpr.const(0.25, 2)))
