import math

import numpy as np
from hypothesis import given, settings, strategies as st

from holocurves.automorphisms import HyperplaneUnion
from holocurves.certify import (
    PROXY_NOTE, assemble, check_avoidance, check_immersion, check_injectivity,
    check_interpolation, kobayashi_section, lempert_section, lempert_witness, properness_proxy,
)
from holocurves.numerics import EntireExpr
from holocurves.pipelines import HoloCurve
from holocurves.regions import ConvexBody

t = EntireExpr.var(0)
one = EntireExpr.const(1.0, 1)
LINE = HoloCurve((t, one))


def test_interpolation_exact_point():
    sec = check_interpolation(LINE, [(0, (0, 1))])
    assert sec["residuals"] == [0.0] and sec["pass"]


def test_interpolation_jet_of_exponential():
    r = 0.7
    f = HoloCurve(((t * r).exp() - 1, (t * 2 * r).exp() - 1))
    sec = check_interpolation(f, jets=[(0, (0, 0), (r, 2 * r))])
    assert max(sec["residuals"]) == 0.0 and sec["pass"]


def test_interpolation_perturbed_fails():
    sec = check_interpolation(HoloCurve((t + 1e-6, one)), [(0, (0, 1))])
    assert abs(sec["max"] - 1e-6) < 1e-15
    assert not sec["pass"]


def test_avoidance_of_hyperplane():
    F = HyperplaneUnion.coordinate(2, [1])
    sec = check_avoidance(LINE, F, 3, 0.25)
    assert sec["pass"] and sec["structural"]  # constant 1 never vanishes
    assert sec["margin"] == 1.0
    assert set(sec["grid"]) == {"R", "pitch", "count"}


def test_exponential_components_avoid_structurally():
    curve = HoloCurve(((-t * t).exp(), (t * -math.sqrt(2)).exp(), (t * t * 0.5).exp()))
    F = HyperplaneUnion.coordinate(3, [0, 1])
    # a tiny grid cannot change the verdict
    sec = check_avoidance(curve, F, 40, 20.0)
    assert sec["structural"] and sec["pass"]


def test_curve_through_body_fails():
    F = ConvexBody.ball(np.array([0, 1]), 0.5)
    sec = check_avoidance(LINE, F, 2, 0.25)
    assert sec["margin"] <= 0 and not sec["pass"]


def test_immersion_examples():
    sec = check_immersion(LINE, 2, 0.25)
    assert sec["pass"] and sec["floor"] == 1.0
    cusp = check_immersion(HoloCurve((t * t, t * t * t)), 2, 0.25)
    assert cusp["floor"] == 0.0 and not cusp["pass"]


def test_injectivity_examples():
    sec = check_injectivity(HoloCurve((t, (t * 0.5).exp())), 1, 0.25)
    assert sec["pass"] and sec["min_separation"] >= 0.25 - 1e-12
    fold = check_injectivity(HoloCurve((t * t, EntireExpr.const(0.0, 1))), 1, 0.25)
    assert fold["min_separation"] == 0.0 and not fold["pass"]


def test_properness_proxy_examples():
    radii = [1, 2, 4, 8]
    sec = properness_proxy(LINE, radii)
    for r, m in zip(radii, sec["min_modulus"]):
        assert abs(m - math.sqrt(r * r + 1)) < 1e-12
    assert sec["pass"] and sec["label"] == PROXY_NOTE and not sec["enforced"]
    bounded = HoloCurve(((-t * t).exp(), (t * -math.sqrt(2)).exp()))
    sec = properness_proxy(bounded, radii)
    assert not sec["pass"]


def test_lempert_witness_formula():
    assert lempert_witness(0, 1, 10) == 0.1
    assert lempert_witness(0, 1, 20) == 0.05
    sec = lempert_section([(0, None), (1, None)], 10, True)
    assert sec["witness"] == 0.1
    assert lempert_section([(0, None), (1, None)], 10, False)["witness"] is None
    assert lempert_section([(0, None)], 10, True)["witness"] is None


@settings(max_examples=50)
@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5),
       st.floats(10, 100))
def test_lempert_halves_with_radius(a, b, R):
    assert math.isclose(lempert_witness(a, b, 2 * R), lempert_witness(a, b, R) / 2)


def test_kobayashi_section():
    sec = kobayashi_section([3, 4], 5, True)
    assert sec["witness"] == 1.0
    assert kobayashi_section([3, 4], 5, False)["witness"] is None


def test_assemble_ignores_unenforced_sections():
    cert = assemble({"a": {"pass": True}, "proxy": {"pass": False, "enforced": False},
                     "info": {"witness": 0.1}}, 3, 0.25)
    assert cert["pass"] and cert["schema"] == 1
    cert = assemble({"a": {"pass": True}, "b": {"pass": False}}, 3, 0.25)
    assert not cert["pass"]


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3))
def test_halving_pitch_keeps_strong_passes(re, im, lift):
    # a graph curve lifted off {z2 = 0}; margin well above threshold stays a pass
    curve = HoloCurve((t, (t * complex(re, im) * 0.1).exp() * lift))
    F = HyperplaneUnion.coordinate(2, [1])
    coarse = check_avoidance(curve, F, 2, 0.5, structural=False)
    fine = check_avoidance(curve, F, 2, 0.25, structural=False)
    if coarse["pass"] and coarse["margin"] >= 2e-12:
        assert fine["pass"]
    assert check_immersion(curve, 2, 0.25)["pass"] == check_immersion(curve, 2, 0.5)["pass"]
