import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holocurves.automorphisms import CompositeAut, apply_aut
from holocurves.flows import (
    FieldTerm, SplittingSchedule, commuting_benchmark, convergence_study, exact_flow,
    noncommuting_benchmark, reference_flow, schedule_from_json, schedule_to_json,
    splitting_compose, table_csv,
)
from holocurves.numerics import EntireExpr

# the splitting error grows linearly with |z|, so benchmark probes sit near 0
PROBES = np.array([[0.05, 0.02j], [0.03j, 0.04], [-0.03 + 0.01j, 0.02 - 0.02j]])
WIDE = np.array([[0.5, 0.2], [1 + 1j, -0.3j], [-0.7, 0.4 + 0.1j]])
NS = (8, 16, 32, 64)


def test_noncommuting_rates_are_first_order():
    rows = convergence_study(noncommuting_benchmark(), NS, PROBES)
    errs = [e for _, e in rows]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.6 <= r <= 2.4 for r in ratios), ratios
    assert errs[-1] < 1e-3


def test_noncommuting_reference_is_cosh_sinh():
    # dz1 = z2, dz2 = z1: closed form in cosh/sinh
    for z in WIDE:
        ref = reference_flow(noncommuting_benchmark(), z)
        want = np.array([np.cosh(1) * z[0] + np.sinh(1) * z[1],
                         np.sinh(1) * z[0] + np.cosh(1) * z[1]])
        assert np.max(np.abs(ref - want)) < 1e-11


def test_commuting_benchmark_is_exact():
    probes = np.array([[0.5, 0.2, 1j], [1 + 1j, -0.3j, 2.0]])
    for _, e in convergence_study(commuting_benchmark(), NS, probes):
        assert e <= 1e-12


def test_one_window_reproduces_autonomous_field():
    term = FieldTerm("overshear", 1, EntireExpr.var(0) * 0.3)
    a = splitting_compose(SplittingSchedule(1, (term,)))
    ref = reference_flow((term,), WIDE[1])
    assert np.max(np.abs(apply_aut(a, WIDE[1:2])[0] - ref)) < 1e-11


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["shear", "overshear"]), st.integers(0, 1),
       st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_group_law(kind, axis, c, s1, s2, phase):
    g = EntireExpr.var(0).exp() * complex(c, phase)
    term = FieldTerm(kind, axis, g)
    z = np.array([[0.3 - 0.2j, 0.7 + 0.1j]])
    def flow(s):
        return CompositeAut(2, (exact_flow(term, s),))
    once = apply_aut(flow(s1 + s2), z)
    twice = apply_aut(flow(s2), apply_aut(flow(s1), z))
    assert np.max(np.abs(once - twice)) <= 1e-12 * max(1.0, np.max(np.abs(once)))


def test_time_weight_and_validation():
    t = FieldTerm("shear", 0, EntireExpr.var(0), (1.0, 2.0, 0.0, -1.0))
    assert t.time_weight(0.5) == 1 + 1 - 0.125
    with pytest.raises(ValueError):
        FieldTerm("spin", 0, EntireExpr.var(0))
    with pytest.raises(ValueError):
        FieldTerm("shear", 0, EntireExpr.var(0), (1, 1, 1, 1, 1))
    with pytest.raises(ValueError):
        SplittingSchedule(0, (t,))


def test_schedule_json_round_trip_and_csv():
    terms = noncommuting_benchmark()
    data = schedule_to_json(terms, NS, PROBES)
    t2, n2, p2 = schedule_from_json(data)
    assert [t.to_json() for t in t2] == [t.to_json() for t in terms]
    assert n2 == list(NS) and np.array_equal(p2, PROBES)
    text = table_csv([(8, 0.5), (16, 0.25)])
    assert text.splitlines() == ["N,error", "8,0.5", "16,0.25"]
