"""Curves, scenes and shared helpers for the construction pipelines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..automorphisms import HyperplaneUnion
from ..numerics import EntireExpr, cfrom, cpair, eval_expr, derivative_values
from ..regions import ConvexBody


class SceneError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


@dataclass
class HoloCurve:
    """An entire curve C -> C^n given by n expressions of one variable."""

    components: tuple
    pipeline: str = ""
    stages: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        self.components = tuple(self.components)
        if len(self.components) < 2:
            raise ValueError("a curve needs at least two components")
        if any(c.arity != 1 for c in self.components):
            raise ValueError("curve components must have arity 1")

    @property
    def n(self) -> int:
        return len(self.components)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([np.asarray(eval_expr(c, [t])) for c in self.components], axis=-1)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([np.asarray(derivative_values(c, t, 1)) for c in self.components],
                        axis=-1)

    def to_json(self) -> dict:
        out = {"components": [c.to_json() for c in self.components]}
        if self.pipeline:
            out["pipeline"] = self.pipeline
        if self.data:
            out["data"] = self.data
        return out

    @classmethod
    def from_json(cls, data: dict, pipeline: str = "") -> "HoloCurve":
        return cls(tuple(EntireExpr.from_json(c) for c in data["components"]),
                   data.get("pipeline", pipeline), [], dict(data.get("data", {})))


def cvec(v) -> np.ndarray:
    return np.array([cfrom(c) for c in v], dtype=complex)


def vjson(v) -> list:
    return [cpair(c) for c in np.atleast_1d(v)]


def parse_body(data: dict) -> ConvexBody:
    """Halfspace list, or the shorthand {"type": "ball", "center", "radius"}."""
    if not isinstance(data, dict):
        raise SceneError("a convex body must be a JSON object")
    if data.get("type") == "ball":
        return ConvexBody.ball(cvec(data["center"]), float(data["radius"]))
    if "halfspaces" in data:
        return ConvexBody.from_json(data)
    raise SceneError("unrecognized convex body description")


def parse_factors(data: dict) -> tuple[ConvexBody, ConvexBody]:
    """(F, G) from {"type": "product", "F", "G"}."""
    if not isinstance(data, dict) or data.get("type") != "product":
        raise SceneError("expected a product obstacle {type: product, F, G}")
    return parse_body(data["F"]), parse_body(data["G"])


def parse_obstacle(data: dict):
    """ConvexBody, HyperplaneUnion, or product {"type": "product", "F", "G"}."""
    if data is None:
        return None
    if not isinstance(data, dict):
        raise SceneError("an obstacle must be a JSON object")
    if data.get("type") == "hyperplanes":
        return HyperplaneUnion.from_json(data)
    if data.get("type") == "product":
        return ConvexBody.product_of(*parse_factors(data))
    return parse_body(data)


def obstacle_json(F) -> dict:
    return F.to_json()


def parse_points(scene: dict):
    """[(alpha, a)] from scene["points"] = [{"alpha": [re, im], "a": [[re, im], ...]}]."""
    out = []
    for p in scene.get("points", []):
        out.append((cfrom(p["alpha"]), cvec(p["a"])))
    alphas = [a for a, _ in out]
    if len(set(alphas)) != len(alphas):
        raise SceneError("parameter points must be pairwise distinct")
    return out


def params(scene: dict) -> dict:
    return dict(scene.get("params", {}))
