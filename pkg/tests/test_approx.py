import math

import numpy as np
from hypothesis import given, settings, strategies as st

from holocurves.approx import (
    ApproxTask, BasisSpec, Clause, ConstTarget, ExprTarget, RootDecayTarget, interp_exp_sum,
    solve_task, solve_with_escalation, target_from_json, verify_residual,
)
from holocurves.numerics import EntireExpr, Jet, eval_expr, is_entire, lagrange_interpolant
from holocurves.regions import Disk, HalfPlane, re_at_least, re_at_most

x = EntireExpr.var(0)
EVERYWHERE = HalfPlane(0.0, math.inf)


def test_clause_free_task_is_interpolation():
    task = ApproxTask(jets=(Jet(2, (1,)), Jet(-2, (0,))))
    f, rep = solve_task(task, BasisSpec())
    assert rep.success
    for z in (0, 1j, 5):
        assert abs(eval_expr(f, [z]) - (z + 2) / 4) < 1e-14


def test_zero_target_gives_zero_function():
    task = ApproxTask((Clause(EVERYWHERE, 0, 1e-9),), (Jet(0, (0,)),))
    f, rep = solve_task(task, BasisSpec(4))
    assert rep.success
    assert max(rep.ver_residuals) <= 1e-9


def test_step_task_is_unattainable_and_reported():
    # |f - 1| <= 1/4 on Re <= -1, |f| <= 1/4 on Re >= 0 (disc 8), f(1 + i) = 0
    task = ApproxTask((Clause(re_at_most(-1), 1, 0.25), Clause(re_at_least(0), 0, 0.25)),
                      (Jet(1 + 1j, (0,)),))
    f, rep = solve_task(task, BasisSpec(10, (0, -1, -2)))
    assert rep.success is False
    assert max(rep.ver_residuals) > 0.25
    assert max(rep.jet_residuals) <= 1e-8  # jets stay exact even when the fit fails
    assert is_entire(f)


def test_exponential_target_is_recovered():
    target = ExprTarget((-x).exp() * 2)
    task = ApproxTask((Clause(re_at_least(0), target, 1e-6),), (Jet(0, (2,)),),
                      R_fit=4, R_ver=6)
    f, rep = solve_task(task, BasisSpec(3, (0, -1)))
    assert rep.success, rep.ver_residuals


def test_verification_of_exact_constant():
    task = ApproxTask((Clause(Disk(0j, 3), 2 + 1j, 1e-6),), R_fit=3, R_ver=4)
    rep = verify_residual(EntireExpr.const(2 + 1j), task)
    assert rep.ver_residuals == [0.0] and rep.success


def test_decay_weight_on_exact_target():
    target = RootDecayTarget(1.0, 0.3, 1)
    # the target itself is not entire, so check the weighted residual of the
    # target against itself through a constant clause-free comparison
    z = np.array([0.5, 3 + 2j, 10 - 1j])
    assert np.allclose(target(z) - target(z), 0)
    task = ApproxTask((Clause(re_at_least(0), 3.0, 1e-6, decay=1 / 3),), R_fit=4, R_ver=6)
    rep = verify_residual(EntireExpr.const(3.0), task)
    assert rep.ver_residuals == [0.0]


def test_halving_pitch_keeps_residual_within_factor_two():
    task = ApproxTask((Clause(re_at_most(-1), 1, 0.25), Clause(re_at_least(0), 0, 0.25)),
                      (Jet(1 + 1j, (0,)),))
    f, rep = solve_task(task, BasisSpec(10, (0, -1, -2)))
    again = verify_residual(f, task, task.ver_pitch / 2)
    assert max(again.ver_residuals) <= 2 * max(rep.ver_residuals)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_clause_free_matches_lagrange(seed, count):
    rng = np.random.default_rng(seed)
    nodes = []
    while len(nodes) < count:
        z = complex(*rng.uniform(-2, 2, 2))
        if all(abs(z - w) >= 0.1 for w in nodes):
            nodes.append(z)
    vals = rng.normal(size=count) + 1j * rng.normal(size=count)
    task = ApproxTask(jets=tuple(Jet(z, (v,)) for z, v in zip(nodes, vals)))
    f, _ = solve_task(task, BasisSpec())
    p = lagrange_interpolant(nodes, vals)
    zs = np.array(nodes)
    assert np.max(np.abs(eval_expr(f, [zs]) - eval_expr(p, [zs]))) <= 1e-10 * np.max(np.abs(vals))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_successful_fits_keep_jets(seed):
    rng = np.random.default_rng(seed)
    a = complex(*rng.normal(size=2))
    d = complex(*rng.normal(size=2))
    target = ExprTarget((-x).exp() * a)
    task = ApproxTask((Clause(re_at_least(0), target, 0.05),), (Jet(0.5, (a, d)),),
                      R_fit=4, R_ver=5, fit_pitch=0.5, ver_pitch=0.25)
    f, rep, _ = solve_with_escalation(task, BasisSpec(4, (0, -1)), max_columns=200)
    assert is_entire(f)
    if rep.success:
        assert max(rep.jet_residuals) <= 1e-8


def test_target_json_round_trip():
    for t in (ConstTarget(1 - 2j), ExprTarget(x * x), RootDecayTarget(1j, 0.5, -1, 2.0)):
        u = target_from_json(t.to_json())
        z = np.array([1.0, 2j, -0.5 + 0.5j])
        assert np.array_equal(t(z), u(z))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_exp_sum_interpolates_and_tail_bound_holds(seed, count):
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(0, 1, count) + 1j * rng.uniform(-1, 1, count)
    if count > 1 and np.min(np.abs(np.subtract.outer(nodes, nodes))
                            + np.eye(count)) < 0.1:
        return
    vals = rng.normal(size=count) + 1j * rng.normal(size=count)
    s = interp_exp_sum(nodes, vals, 1.0, constant=0.5)
    assert np.max(np.abs(s(nodes) - vals)) <= 1e-8 * max(1.0, np.max(np.abs(vals)))
    # sampled sup over Re z <= -1 never exceeds the bound
    z = -1 - rng.uniform(0, 5, 200) + 1j * rng.uniform(-10, 10, 200)
    assert np.max(np.abs(s(z) - 0.5)) <= s.tail_bound(-1.0) * (1 + 1e-12)
