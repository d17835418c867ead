import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holocurves.automorphisms import (
    Affine, CompositeAut, HyperplaneUnion, Overshear, ProductFlow, SeparationError, Shear,
    apply_aut, fixes_hyperplanes, gamma_separation, invert_aut, product_families,
    product_separation, separation_overshear,
)
from holocurves.numerics import EntireExpr
from conftest import random_expr, random_points

z2 = EntireExpr.var(0)


def random_composite(rng, n: int, count: int) -> CompositeAut:
    facs = []
    for _ in range(count):
        kind = rng.integers(3)
        if kind == 0:
            M = np.eye(n) + 0.3 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
            facs.append(Affine(M, 0.5 * (rng.normal(size=n) + 1j * rng.normal(size=n))))
        else:
            f = random_expr(rng, 2, n - 1) * 0.1
            cls = Shear if kind == 1 else Overshear
            facs.append(cls(n, int(rng.integers(n)), f))
    return CompositeAut(n, tuple(facs))


def test_identity_keeps_points():
    z = np.array([[1, 2j]])
    assert np.array_equal(apply_aut(CompositeAut.identity(2), z), z)


def test_shear_adds_other_coordinate():
    a = CompositeAut(2, (Shear(2, 0, z2),))
    assert np.array_equal(apply_aut(a, np.array([[1, 3]], complex)), [[4, 3]])


def test_zero_overshear_is_identity(rng):
    a = CompositeAut(2, (Overshear(2, 0, EntireExpr.const(0)),))
    z = random_points(rng, 20, 3.0, 2)
    assert np.array_equal(apply_aut(a, z), z)


def test_inverse_of_shear_negates_function(rng):
    S = Shear(2, 0, z2 * z2 + 1)
    inv = invert_aut(CompositeAut(2, (S,)))
    assert len(inv.factors) == 1 and inv.factors[0].axis == 0
    z = random_points(rng, 50, 3.0, 2)
    assert np.max(np.abs(apply_aut(inv, apply_aut(CompositeAut(2, (S,)), z)) - z)) <= 1e-12


def test_inverse_of_identity():
    assert invert_aut(CompositeAut.identity(3)).factors == ()


def test_four_factor_round_trip(rng):
    a = random_composite(rng, 2, 4)
    z = random_points(rng, 100, 3.0, 2)
    assert np.max(np.abs(apply_aut(invert_aut(a), apply_aut(a, z)) - z)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 6))
def test_round_trip_random_composites(seed, n, count):
    rng = np.random.default_rng(seed)
    a = random_composite(rng, n, count)
    z = random_points(rng, 100, 3.0, n)
    w = apply_aut(a, z)
    back = apply_aut(invert_aut(a), w)
    scale = max(1.0, float(np.max(np.abs(w))))
    assert np.max(np.abs(back - z)) <= 1e-10 * scale


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shears_change_only_their_axis(seed):
    rng = np.random.default_rng(seed)
    n = 3
    axis = int(rng.integers(n))
    f = random_expr(rng, 3, n - 1) * 0.3
    z = random_points(rng, 40, 2.0, n)
    for fac in (Shear(n, axis, f), Overshear(n, axis, f)):
        w = fac.apply(z)
        keep = [i for i in range(n) if i != axis]
        assert np.array_equal(w[:, keep], z[:, keep])


def test_overshear_keeps_axis_hyperplane(rng):
    f = random_expr(rng, 3, 2)
    z = random_points(rng, 30, 2.0, 3)
    z[:, 1] = 0
    assert np.all(Overshear(3, 1, f).apply(z)[:, 1] == 0)


def test_overshear_with_product_factor_fixes_hyperplane():
    f = z2 * (z2 + 2).exp()
    H = HyperplaneUnion.coordinate(2, [1])
    assert fixes_hyperplanes(CompositeAut(2, (Overshear(2, 0, f),)), H)


def test_constant_shear_moves_hyperplane():
    H = HyperplaneUnion.coordinate(2, [1])
    assert not fixes_hyperplanes(CompositeAut(2, (Shear(2, 0, EntireExpr.const(1)),)), H)


def test_separation_gadget_fixes_coordinate_hyperplanes():
    for n in (2, 3, 4):
        H = HyperplaneUnion.coordinate(n, list(range(1, n)))
        a = CompositeAut(n, (separation_overshear(n, 0, 0.3),))
        assert fixes_hyperplanes(a, H)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_structural_fix_holds_on_samples(seed):
    rng = np.random.default_rng(seed)
    n = 3
    H = HyperplaneUnion.coordinate(n, [2])
    g = random_expr(rng, 2, n - 1) * 0.2
    # overshear on axis 0; its function carries the factor z3 (position 1 among the others)
    f = EntireExpr.var(1, n - 1) * g
    a = CompositeAut(n, (Overshear(n, 0, f), Shear(n, 1, f)))
    assert fixes_hyperplanes(a, H)
    h = H.sample(500, 10.0, rng)
    try:
        w = apply_aut(a, h)
    except ArithmeticError:
        return
    assert np.max(np.abs(w - h)) <= 1e-9


def test_gamma_zero_when_already_separated():
    a, g = gamma_separation(np.array([[0, 1], [0, 2]], complex))
    assert g == 0.0 and a.factors == ()


def test_gamma_separates_equal_second_coordinates():
    pts = np.array([[1, 1], [2, 1]], complex)
    a, g = gamma_separation(pts)
    assert g > 0
    img = apply_aut(a, pts)
    # independent oracle: the closed form z2 e^{-g z1 z2}
    want = pts[:, 1] * np.exp(-g * pts[:, 0] * pts[:, 1])
    assert np.allclose(img[:, 1], want, rtol=1e-14)
    assert abs(img[0, 1] - img[1, 1]) > 1e-6


def test_gamma_fails_for_inseparable_points():
    # equal second coordinates and z1 z2 = 0 for both: the flow fixes them
    with pytest.raises(SeparationError):
        gamma_separation(np.array([[0, 0], [1, 0]], complex))


def test_product_flow_inverse():
    P = ProductFlow(2, 0, 1, 0.7)
    z = np.array([[0.3 + 1j, -0.5 + 0.2j]])
    assert np.allclose(P.inverse().apply(P.apply(z)), z, atol=1e-14)


def test_product_separation_trivial_cases():
    assert product_separation(np.array([[1, 2, 3]], complex), 0.1).factors == ()
    pts = np.array([[1, 2, 3], [2, 3, 5]], complex)
    assert product_separation(pts, 0.1).factors == ()


def test_product_separation_repairs_all_families():
    pts = np.array([[1, 1, 1], [1, 1, 2]], complex)
    before = product_families(pts)
    assert abs(before[2][0] - before[2][1]) == 0  # z1 z2 agree
    a = product_separation(pts, 0.1)
    img = apply_aut(a, pts)
    for fam in product_families(img).values():
        assert abs(fam[0] - fam[1]) >= 1e-8
    assert np.max(np.abs(img - pts)) <= 0.1


def test_product_separation_needs_nonzero_coordinates():
    with pytest.raises(ValueError):
        product_separation(np.array([[0, 1], [1, 1]], complex), 0.1)


def test_composite_json_round_trip(rng):
    a = random_composite(rng, 3, 5)
    b = CompositeAut.from_json(a.to_json())
    z = random_points(rng, 10, 1.0, 3)
    assert np.array_equal(apply_aut(a, z), apply_aut(b, z))
