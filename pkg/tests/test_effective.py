import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robinspec.effective import (
    REMAINDER,
    corner_spectrum,
    mccartin_multiset,
    mccartin_reference,
    predict,
)
from robinspec.errors import FormulaInapplicable
from robinspec.geometry import (
    equilateral,
    half_disk,
    half_ellipse,
    l_shape,
    polygon_from_vertices,
    rectangle,
    square,
)


def test_square_corner_spectrum():
    cs = corner_spectrum(square(1.0))
    assert cs.K == 4
    np.testing.assert_allclose(cs.energies, -2.0, rtol=1e-14)
    assert list(cs.vertices) == [0, 1, 2, 3]


def test_triangle_corner_spectrum():
    cs = corner_spectrum(equilateral(1.0))
    assert cs.K == 3
    np.testing.assert_allclose(cs.energies, -4.0, rtol=1e-14)


def test_l_shape_concave_vertex_contributes_nothing():
    p = l_shape(1.0)
    cs = corner_spectrum(p)
    assert cs.K == 5
    concave = int(np.argmax(p.half_angles))
    assert concave not in set(cs.vertices.tolist())


def test_formula_mode_rejects_sharp_corner():
    p = polygon_from_vertices([[0, 0], [1, 0], [0, 0.2]])
    with pytest.raises(FormulaInapplicable):
        corner_spectrum(p, mode="formula")


def test_square_thm1():
    pred = predict(square(1.0), 20.0, 1, "thm1")
    assert pred.K == 4
    assert pred.side_levels[0].value == pytest.approx(-400 + math.pi**2, abs=1e-12)
    assert pred.side_levels[0].value == pytest.approx(-390.1304, abs=1e-4)
    np.testing.assert_allclose([c.value for c in pred.corner_levels], -800.0, rtol=1e-14)
    assert pred.remainder == REMAINDER["thm1"]


def test_half_disk_thm3():
    pred = predict(half_disk(1.0), 20.0, 1, "thm3")
    assert pred.side_levels[0].value == pytest.approx(-419.5, abs=1e-9)
    assert pred.terms["J*"] == [1]
    assert pred.terms["H*"] == pytest.approx(1.0)


def test_rectangle_direct_sum_merge():
    pred = predict(rectangle(1.0, 2.0), 10.0, 3, "thm1")
    np.testing.assert_allclose(pred.side_values(), -100 + np.array([1 / 4, 1 / 4, 1]) * math.pi**2, rtol=1e-13)
    assert pred.side_values()[2] == pytest.approx(-100 + math.pi**2)


def test_thm1_needs_straight_sides():
    with pytest.raises(FormulaInapplicable, match="curved"):
        predict(half_disk(1.0), 10.0, 1, "thm1")


def test_thm2_rejects_curvature_maximum_at_vertex():
    # constant curvature attains its maximum at the ends of the arc
    with pytest.raises(FormulaInapplicable):
        predict(half_disk(1.0), 10.0, 1, "thm2")


def test_thm2_half_ellipse():
    # a tall half-ellipse has its curvature maximum b/a^2 = 2 at the top of the arc, inside the side
    pred = predict(half_ellipse(1.0, 2.0), 30.0, 2, "thm2")
    assert pred.terms["J*"] == [1]
    assert pred.terms["H*"] == pytest.approx(2.0, rel=1e-6)
    assert len(pred.side_levels) == 2
    # a wide one reaches its maximum curvature at the corners
    with pytest.raises(FormulaInapplicable):
        predict(half_ellipse(2.0, 1.0), 30.0, 2, "thm2")


def test_thm2_dirichlet_and_neumann_variants_close():
    pred = predict(half_ellipse(1.0, 2.0), 40.0, 2, "thm2")
    gap = pred.variant_gap()
    assert gap is not None
    assert np.all(gap >= -1e-9)
    assert gap[0] < 1e-2


def test_thm3_equals_thm1_on_straight_polygons():
    for p in (square(1.0), rectangle(1.0, 2.0), equilateral(1.0)):
        a = predict(p, 17.0, 4, "thm1")
        b = predict(p, 17.0, 4, "thm3")
        assert np.array_equal(a.levels(), b.levels())


def test_thm3_needs_constant_curvature():
    with pytest.raises(FormulaInapplicable):
        predict(half_ellipse(2.0, 1.0), 10.0, 1, "thm3")


def test_attestation():
    assert "verified" in predict(square(1.0), 10.0, 1).hypothesis
    assert "asserted" in predict(equilateral(1.0), 10.0, 1).hypothesis
    ok = predict(equilateral(1.0), 10.0, 1, attestation={0: "nonresonant", 1: "nonresonant", 2: "nonresonant"})
    assert "verified" in ok.hypothesis
    with pytest.raises(FormulaInapplicable):
        predict(equilateral(1.0), 10.0, 1, attestation={0: "resonant", 1: "nonresonant", 2: "nonresonant"})
    with pytest.raises(FormulaInapplicable):
        predict(equilateral(1.0), 10.0, 1, attestation={0: "nonresonant"})


def test_bad_arguments():
    with pytest.raises(ValueError):
        predict(square(1.0), 10.0, 0)
    with pytest.raises(ValueError):
        predict(square(1.0), 10.0, 1, "thm4")


def test_mccartin_multiset():
    z = mccartin_multiset(1.0, 4)
    assert z[0] == 0.0
    assert z[1] == pytest.approx((2 * math.pi / 3) ** 2, rel=1e-14)
    assert z[1] == pytest.approx(4.3865, abs=1e-4)
    assert z[2] == z[1]
    assert z[3] == pytest.approx(4 * (2 * math.pi / 3) ** 2)


def test_mccartin_reference_scaling():
    ref = mccartin_reference(2.0, 10.0, 3)
    np.testing.assert_allclose(ref.corner_levels, -400.0)
    np.testing.assert_allclose(ref.z, mccartin_multiset(1.0, 3) / 4.0, rtol=1e-14)
    np.testing.assert_allclose(ref.side_levels, -100.0 + ref.z)


def _rigid(points, angle, shift, roll):
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    pts = np.asarray(points, dtype=float) @ R.T + np.asarray(shift)
    return np.roll(pts, roll, axis=0)


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(-math.pi, math.pi), dx=st.floats(-5, 5), dy=st.floats(-5, 5), roll=st.integers(0, 4),
       alpha=st.floats(5.0, 50.0))
def test_thm1_invariant_under_rigid_motion(angle, dx, dy, roll, alpha):
    pts = [[0, 0], [2, 0], [2.5, 1], [1, 1.8], [-0.3, 0.9]]
    a = predict(polygon_from_vertices(pts), alpha, 4)
    b = predict(polygon_from_vertices(_rigid(pts, angle, (dx, dy), roll)), alpha, 4)
    np.testing.assert_allclose(np.sort(a.side_values()), np.sort(b.side_values()), rtol=1e-9)
    np.testing.assert_allclose(np.sort([c.value for c in a.corner_levels]),
                               np.sort([c.value for c in b.corner_levels]), rtol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 8), st.floats(0.3, 3.0))
def test_corner_count_equals_convex_vertices(n, ell):
    from robinspec.geometry import regular_ngon

    p = regular_ngon(n, ell)
    cs = corner_spectrum(p)
    if np.all(p.half_angles >= math.pi / 6 - 1e-12):
        assert cs.K == len(p.convex_vertices)
