import math

import numpy as np
import pytest
from scipy.optimize import brentq

from helpers import CONVEX_SCENES, claim_triple, convex_scene, lemma3_instance, point_rows
from holocurves.automorphisms import HyperplaneUnion
from holocurves.certify import curve_values
from holocurves.cli import Options, certify, construct
from holocurves.numerics import EntireExpr, Exp, nonvanishing
from holocurves.pipelines import (
    PipelineError, SceneError, certify_move, claim_check, lemma3_move, prop1_line,
    prop2_initial, prop5_run, prop7_jet, prop7_sections, t_scan,
)
from holocurves.pipelines import prop1 as prop1_mod
from holocurves.pipelines.prop5 import interpolation_stage, stage_checks
from holocurves.pipelines.prop6 import minimal_t, split_points, t_margin
from holocurves.regions import ConvexBody

Z2 = HyperplaneUnion.coordinate(2, [1])
T = np.array([0, 1, -1, 2j, 0.5 - 0.3j])


def values(curve, t=T):
    return curve_values(curve, np.asarray(t, dtype=complex))


# --------------------------------------------------------------------------
# line obstacle


def test_line_single_point_is_constant_graph():
    c = prop1_line([(0, np.array([0, 1]))], Z2)
    assert np.allclose(values(c), np.stack([T, np.ones_like(T)], -1), atol=0, rtol=1e-15)


def test_line_single_point_with_shift():
    c = prop1_line([(0, np.array([3, math.e]))], Z2)
    want = np.stack([T + 3, np.full_like(T, math.e)], -1)
    assert np.max(np.abs(values(c) - want)) <= 1e-14


def test_line_two_points():
    pts = [(0, np.array([0, 1])), (1, np.array([0, 2]))]
    c = prop1_line(pts, Z2)
    assert c.stages[0]["gamma"] == 0.0  # second coordinates already distinct
    for a, v in pts:
        assert np.linalg.norm(values(c, [a])[0] - v) <= 1e-9


def test_line_second_component_is_exponential():
    c = prop1_line([(0, np.array([1, 1])), (1j, np.array([2, 1])), (2, np.array([0, -1]))], Z2)
    assert nonvanishing(c.components[1])


def test_line_rejects_points_on_obstacle():
    with pytest.raises(SceneError):
        prop1_line([(0, np.array([1, 0]))], Z2)


# --------------------------------------------------------------------------
# convex obstacle


@pytest.mark.parametrize("name", sorted(CONVEX_SCENES))
def test_convex_scenes_certify(name):
    scene = convex_scene(name)
    obj = construct(scene, Options())
    cert = certify(scene, obj, Options())
    assert cert["pass"], cert["sections"]
    assert cert["sections"]["avoidance"]["margin"] > 0
    assert cert["sections"]["interpolation"]["max"] <= 1e-8


def test_far_quadrant_hits_point():
    scene = convex_scene("far_quadrant")
    c = construct(scene, Options())["curve"]
    assert np.linalg.norm(values(c, [1])[0] - np.array([1, 1])) <= 1e-8


def test_thin_slab_needs_a_shear():
    stages = construct(convex_scene("thin_slab"), Options())["stages"]
    assert sum(s["step"] == "shear" for s in stages) >= 1


def test_convex_without_points():
    F, _ = CONVEX_SCENES["quadrant"]
    scene = {"pipeline": "prop1_convex", "F": F, "points": [], "params": {"R_ver": 12.0}}
    cert = certify(scene, construct(scene, Options()), Options())
    assert cert["pass"] and cert["sections"]["interpolation"]["residuals"] == []


def test_convex_rejects_complex_line():
    F = {"halfspaces": [{"u": [1, 0, 0, 0], "d": -1.0}]}  # contains {z1 = -2} x C
    scene = {"pipeline": "prop1_convex", "F": F, "points": point_rows([(0, (0, 0))])}
    with pytest.raises(SceneError):
        construct(scene, Options())


def _refuse_large_budgets(monkeypatch, factor):
    """Inside shear stages, make exponential sums unavailable until eps has
    shrunk by ``factor``."""
    real_sum, real_stage = prop1_mod._small_exp_sum, prop1_mod._shear_stage
    first, active = [], []

    def fake_sum(nodes, values, x0, budget, constant=None, max_re=None):
        if active:
            if not first:
                first.append(budget)
            if budget > first[0] * factor:
                return None
        return real_sum(nodes, values, x0, budget, constant, max_re)

    def stage(*args, **kwargs):
        active.append(True)
        try:
            return real_stage(*args, **kwargs)
        finally:
            active.pop()

    monkeypatch.setattr(prop1_mod, "_small_exp_sum", fake_sum)
    monkeypatch.setattr(prop1_mod, "_shear_stage", stage)


def test_relaxation_ladder_is_recorded(monkeypatch):
    _refuse_large_budgets(monkeypatch, 0.7)
    scene = convex_scene("thin_slab")
    obj = construct(scene, Options())
    cert = certify(scene, obj, Options())
    assert cert["relaxations"] == [{"stage": 1, "steps": 2, "eps":
                                    obj["curve"].data["relaxations"][0]["eps"]}]
    shear = [s for s in obj["stages"] if s["step"] == "shear"][0]
    assert shear["relaxed"] == 2
    assert cert["pass"] and cert["strict"] is False


def test_strict_disables_relaxation(monkeypatch):
    _refuse_large_budgets(monkeypatch, 0.7)
    with pytest.raises(PipelineError):
        construct(convex_scene("thin_slab"), Options(strict=True))


# --------------------------------------------------------------------------
# point moves


def test_lemma3_identity_when_p_equals_q():
    K = ConvexBody.ball(np.array([-5, -5], complex), 1)
    phi = lemma3_move(K, [], Z2, [2, 1], [2, 1], 0.1)
    assert phi.factors == ()


def test_lemma3_reference_instance():
    K = ConvexBody.ball(np.array([-5, -5], complex), 1)
    phi = lemma3_move(K, [], Z2, [2, 1], [3, 1], 0.1)
    secs = certify_move(phi, K, [], Z2, [2, 1], [3, 1], 0.1)
    assert all(s["pass"] for s in secs.values()), secs


@pytest.mark.parametrize("seed", range(4))
def test_lemma3_random_instances(seed):
    K, A, H, p, q, eps = lemma3_instance(seed)
    phi = lemma3_move(K, A, H, p, q, eps)
    secs = certify_move(phi, K, A, H, p, q, eps)
    assert all(s["pass"] for s in secs.values()), secs
    assert secs["fixes_H_cap_A"]["structural"]


def test_lemma3_rejects_p_in_K():
    K = ConvexBody.ball(np.array([2, 1], complex), 1)
    with pytest.raises(SceneError):
        lemma3_move(K, [], Z2, [2, 1], [3, 1], 0.1)


# --------------------------------------------------------------------------
# exhausting curves


def test_prop2_initial_values():
    c = prop2_initial(3)
    assert np.array_equal(values(c, [0])[0], np.ones(3))
    c2 = prop2_initial(2)
    assert np.allclose(values(c2, [1])[0], [math.exp(-1), math.exp(-math.sqrt(2))],
                       rtol=1e-15, atol=0)
    assert all(isinstance(comp.root, Exp) for comp in c.components)


def test_stage_on_curve_point_is_identity():
    K = ConvexBody.ball(np.array([0, 3], complex), 0.5)
    x = EntireExpr.var(0)
    from holocurves.pipelines import HoloCurve
    line = HoloCurve((x, x * 0.5))
    alpha = np.array([2, 1], complex)
    cur, nodes, rho, rec = interpolation_stage(line, [(0j, np.zeros(2))], alpha, K, 0.5, 0.0)
    assert rec["identity"] and cur is line
    assert abs(nodes[-1][0] - 2) < 1e-12
    chk = stage_checks(line, cur, nodes, K, rho, 0.5)
    assert chk["c"]["max"] == 0.0


def test_prop5_run_demo_scene():
    K = ConvexBody.ball(np.array([0, 3], complex), 0.5)
    pts = [np.array(p, complex) for p in ([0, 0], [2, -3], [-1, 3j], [1, -3j])]
    curve, nodes, records, checks, history = prop5_run(K, pts, np.array([1, 0]), R_ver=3.0)
    assert len(history) == 4 and len(records) == 3
    assert [r["delta"] for r in records] == [0.5, 0.25, 0.125]
    for chk in checks:
        for key in "acd":
            assert chk[key]["pass"], (key, chk[key])


@pytest.mark.parametrize("seed", range(10))
def test_claim_holds_under_preconditions(seed):
    rng = np.random.default_rng(seed)
    K_prev, K_next, psi = claim_triple(rng, 0.1)
    out = claim_check(K_prev, K_next, psi, 0.1)
    assert out["status"] == "claim_holds", out


@pytest.mark.parametrize("seed", range(3))
def test_claim_precondition_violations(seed):
    rng = np.random.default_rng(50 + seed)
    K_prev, K_next, psi = claim_triple(rng, 0.1, big_move=True)
    out = claim_check(K_prev, K_next, psi, 0.1)
    assert out["max_displacement"] > out["boundary_distance"]
    assert out["status"] == "precondition_failed" and out["holds"] is None


# --------------------------------------------------------------------------
# immersions into the complement of a product


def test_t_at_zero_matches_root_oracle():
    root = brentq(lambda t: t_margin(t, 0.0), 0.5, 1 - 1e-15)
    assert abs(minimal_t(0.0) - root) <= 1e-12
    assert 0.985 < root < 0.99


def test_t_scan_covers_grid_and_tail():
    s = t_scan()
    x = np.arange(0, 100.005, 0.01)
    oracle = max(brentq(lambda t: t_margin(t, xi), 0.5, 1 - 1e-15) for xi in x[::50])
    assert s["t"] >= oracle
    assert s["grid_margin_min"] >= 0 and s["tail_margin_min"] >= 0
    assert np.min(t_margin(s["t"], x)) >= 0


def test_split_points():
    F = ConvexBody.ball(np.array([0j]), 1)
    G = ConvexBody.ball(np.array([0j]), 1)
    first, second, eps = split_points([[3, 0], [0, 3]], F, G)
    assert len(first) == 1 and len(second) == 1
    assert abs(eps - 2) < 1e-6
    with pytest.raises(SceneError):
        split_points([[0, 0]], F, G)


# --------------------------------------------------------------------------
# jets


def test_prop7_first_block_is_shifted_exponential():
    F = ConvexBody.ball(np.array([0j]), 1)
    c, X = np.array([3, 0.5]), np.array([1 + 1j, 2])
    f = prop7_jet(F, F, c, X)
    r = f.data["r"]
    z = np.array([0, 0.1, -0.2j])
    u = X[0] / r
    assert np.allclose(values(f, z)[:, 0], c[0] + u * np.expm1(r * z), rtol=1e-13, atol=1e-15)
    secs = prop7_sections(f, F, F, c, X, 5.0, 0.25)
    assert secs["dichotomy"]["violations"] == 0 and secs["interpolation"]["pass"]


def test_prop7_trivial_case():
    F = ConvexBody.ball(np.array([0j]), 1)
    c, X = np.array([3, 0.5]), np.array([0, 2])
    f = prop7_jet(F, F, c, X)
    assert f.data["trivial"]
    assert prop7_sections(f, F, F, c, X, 5.0, 0.25)["dichotomy"]["pass"]


def test_prop7_underflow_on_the_left():
    # c1 barely off F: the rate r is large and e^{rz} underflows for Re z < -700/r
    F = ConvexBody.ball(np.array([0j]), 1)
    c, X = np.array([1.02, 0.3j]), np.array([-1 + 1j, 0.5])
    f = prop7_jet(F, F, c, X)
    d = prop7_sections(f, F, F, c, X, 5.0, 0.25)["dichotomy"]
    assert d["ball_by_underflow"] > 0 and d["pass"]


def test_prop7_rejects_c_in_obstacle():
    F = ConvexBody.ball(np.array([0j]), 1)
    with pytest.raises(SceneError):
        prop7_jet(F, F, np.array([0, 0]), np.array([1, 1]))


def _stub_fits(monkeypatch, ratios):
    """Replace the coordinate fits by stubs whose worst ratio follows ``ratios``."""
    from holocurves.pipelines import prop6 as prop6_mod
    seen = []

    def fake(k, l, A_pts, B_pts, rows, eps, t, R_fit):
        r = ratios[min(len(seen), len(ratios) - 1)]
        seen.append(eps)
        x = EntireExpr.var(0)
        return [x, x], [{"success": r <= 1}], r

    monkeypatch.setattr(prop6_mod, "_fit_coordinates", fake)
    return prop6_mod, seen


UNIT_BALL = ConvexBody.ball(np.array([0j]), 1)


def test_product_ladder_keeps_improving_steps(monkeypatch):
    mod, seen = _stub_fits(monkeypatch, [10.0, 5.0, 7.0])
    c = mod.prop6_immersion([[3, 0], [0, 3]], UNIT_BALL, UNIT_BALL, J=1)
    assert len(seen) == 3
    assert [r["steps"] for r in c.data["relaxations"]] == [1]
    assert abs(c.data["eps"] - 0.8 * seen[0]) < 1e-12


def test_product_ladder_stops_on_success_and_strict(monkeypatch):
    mod, seen = _stub_fits(monkeypatch, [10.0, 0.5])
    c = mod.prop6_immersion([[3, 0], [0, 3]], UNIT_BALL, UNIT_BALL, J=1)
    assert len(seen) == 2 and c.data["relaxations"][0]["steps"] == 1
    mod, seen = _stub_fits(monkeypatch, [10.0, 0.5])
    c = mod.prop6_immersion([[3, 0], [0, 3]], UNIT_BALL, UNIT_BALL, J=1, strict=True)
    assert len(seen) == 1 and c.data["relaxations"] == [] and c.data["strict"]
