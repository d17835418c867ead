import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holocurves.numerics import (
    ArityError, DegenerateNodesError, EntireExpr, ExprOverflowError, eval_expr, eval_jet,
    lagrange_interpolant, nonvanishing,
)
from conftest import random_expr, random_points

x = EntireExpr.var(0)


def test_shifted_exponential_vanishes_at_origin():
    f = (x * 2.5).exp() - 1
    assert eval_expr(f, [0]) == 0


def test_constant_and_poly_values():
    assert eval_expr(EntireExpr.const(5 + 2j), [17.0]) == 5 + 2j
    assert eval_expr(EntireExpr.poly([1, 1]), [1j]) == 1 + 1j


def test_arity_mismatch():
    with pytest.raises(ArityError):
        eval_expr(x, [1, 2])
    with pytest.raises(ArityError):
        EntireExpr.var(1, 1)


def test_overflow_reports_path_and_mask_gives_nan():
    f = (x * 1000).exp() + 1
    with pytest.raises(ExprOverflowError) as info:
        eval_expr(f, [1.0])
    assert "exp" in str(info.value)
    out = eval_expr(f, [np.array([1.0, 0.0])], mask=True)
    assert np.isnan(out[0]) and out[1] == 2


def test_large_negative_exponent_is_guarded_too():
    with pytest.raises(ExprOverflowError):
        eval_expr((x * -800).exp(), [1.0])


def test_jet_of_shifted_exponential():
    r = 1.7
    j = eval_jet((x * r).exp() - 1, 0, 1)
    assert j.values[0] == 0
    assert abs(j.values[1] - r) < 1e-15


def test_constant_jet():
    j = eval_jet(EntireExpr.const(3 - 1j), 0.4, 2)
    assert j.values == (3 - 1j, 0, 0)


def test_poly_derivative_against_finite_difference(rng):
    c = rng.normal(size=7) + 1j * rng.normal(size=7)
    f = EntireExpr.poly(c)
    z0, h = 0.3 + 0.1j, 1e-5
    fd = (eval_expr(f, [z0 + h]) - eval_expr(f, [z0 - h])) / (2 * h)
    d = eval_jet(f, z0, 1).values[1]
    assert abs(d - fd) <= 1e-6 * abs(d)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jet_order_zero_is_evaluation(seed):
    rng = np.random.default_rng(seed)
    f = random_expr(rng, 4)
    z = complex(*rng.uniform(-1.5, 1.5, 2))
    assert eval_jet(f, z, 2).values[0] == eval_expr(f, [z])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivative_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    f = random_expr(rng, 4)
    h = 1e-5
    for z in random_points(rng, 5, 2.0)[:, 0]:
        fd = (eval_expr(f, [z + h]) - eval_expr(f, [z - h])) / (2 * h)
        d = eval_jet(f, z, 1).values[1]
        assert abs(d - fd) <= 1e-6 * max(1.0, abs(d))


def test_second_derivative_of_gaussian():
    f = (-(x * x)).exp()
    z = 0.7 - 0.2j
    want = (4 * z * z - 2) * np.exp(-z * z)  # d^2/dz^2 e^{-z^2}
    assert abs(eval_jet(f, z, 2).values[2] - want) < 1e-13


def test_two_node_interpolant_is_the_line():
    p = lagrange_interpolant([2, -2], [1, 0])
    for z in (0, 1j, 3 - 2j):
        assert abs(eval_expr(p, [z]) - (z + 2) / 4) < 1e-14


def test_single_node_interpolant_is_constant():
    p = lagrange_interpolant([7], [3])
    assert eval_expr(p, [-11 + 4j]) == 3


def test_random_nodes_in_unit_disc(rng):
    z = random_points(rng, 5, 1.0)[:, 0]
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    p = lagrange_interpolant(z, v)
    assert np.max(np.abs(eval_expr(p, [z]) - v)) <= 1e-10 * np.max(np.abs(v))


def test_duplicate_nodes_rejected():
    with pytest.raises(DegenerateNodesError):
        lagrange_interpolant([1, 1 + 1e-14], [0, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_interpolant_exact_at_nodes(seed, count):
    rng = np.random.default_rng(seed)
    nodes = []
    while len(nodes) < count:
        z = complex(*rng.uniform(-2, 2, 2))
        if all(abs(z - w) >= 0.1 for w in nodes):
            nodes.append(z)
    v = rng.normal(size=count) + 1j * rng.normal(size=count)
    p = lagrange_interpolant(nodes, v)
    got = eval_expr(p, [np.array(nodes)])
    assert np.max(np.abs(got - v)) <= 1e-10 * np.max(np.abs(v))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_json_round_trip_is_bit_exact(seed):
    rng = np.random.default_rng(seed)
    f = random_expr(rng, 4, arity=2)
    g = EntireExpr.from_json(f.to_json())
    assert g.to_json() == f.to_json()
    z = random_points(rng, 10, 2.0, 2)
    a = eval_expr(f, [z[:, 0], z[:, 1]])
    b = eval_expr(g, [z[:, 0], z[:, 1]])
    assert np.array_equal(a, b)


def test_nonvanishing_is_structural():
    assert nonvanishing((x * x).exp() * 3)
    assert not nonvanishing(x + 1)
    assert not nonvanishing((x * x).exp() * 0)


def test_exp_guard_threshold_is_not_hit_just_below():
    assert math.isfinite(abs(eval_expr((x * 699).exp(), [1.0])))
