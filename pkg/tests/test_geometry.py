import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from robinspec.errors import (
    ChainNotClosed,
    DegenerateAngle,
    DeltaTooLarge,
    NoConvergence,
    ObtuseHalfAngle,
    SelfIntersection,
)
from robinspec.geometry import (
    ArcSide,
    Germ,
    StraightSide,
    bisector_point,
    build_polygon,
    decompose,
    equilateral,
    half_disk,
    half_ellipse,
    l_shape,
    load_polygon,
    polygon_by_name,
    polygon_from_vertices,
    rectangle,
    square,
    truncated_sector,
)

SQUARE_SPEC = [
    {"start": [0, 0], "end": [1, 0]},
    {"end": [1, 1]},
    {"end": [0, 1]},
    {"end": [0, 0]},
]


def test_unit_square_from_spec():
    p = build_polygon(SQUARE_SPEC)
    assert p.n_sides == 4
    np.testing.assert_allclose(p.lengths, 1.0, atol=1e-15)
    np.testing.assert_allclose(p.half_angles, math.pi / 4, atol=1e-14)
    assert p.is_straight


def test_square_with_headings_and_turns():
    p = build_polygon([
        {"start": [0, 0], "length": 1, "heading": 0.0},
        {"length": 1, "turn_deg": 90},
        {"length": 1, "turn_deg": 90},
        {"length": 1, "turn_deg": 90},
    ])
    np.testing.assert_allclose(p.area(), 1.0, atol=1e-12)


def test_equilateral_half_angles():
    p = equilateral(1.0)
    assert p.n_sides == 3
    np.testing.assert_allclose(p.half_angles, math.pi / 6, atol=1e-14)
    np.testing.assert_allclose(p.area(), math.sqrt(3) / 4, rtol=1e-12)


def test_half_disk_sides_and_angles():
    p = half_disk(1.0)
    assert p.n_sides == 2
    np.testing.assert_allclose(p.lengths, [2.0, math.pi], rtol=1e-12)
    assert float(p.sides[0].curvature(0.5)) == 0.0
    assert float(p.sides[1].curvature(1.0)) == pytest.approx(1.0)
    np.testing.assert_allclose(p.half_angles, math.pi / 4, atol=1e-12)
    # independent recomputation of cos(2 theta) from the tangents
    for j in range(2):
        assert p.recomputed_cos2theta(j) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(p.area(), math.pi / 2, rtol=1e-9)


def test_half_disk_from_description_matches_builtin():
    p = build_polygon({"sides": [
        {"start": [-1, 0], "end": [1, 0]},
        {"end": [-1, 0], "curvature": 1.0},
    ]})
    q = half_disk(1.0)
    np.testing.assert_allclose(p.lengths, q.lengths, rtol=1e-12)
    np.testing.assert_allclose(p.half_angles, q.half_angles, atol=1e-12)
    np.testing.assert_allclose(p.sides[1].point(1.0), q.sides[1].point(1.0), atol=1e-12)


def test_general_side_half_ellipse():
    p = half_ellipse(2.0, 1.0)
    np.testing.assert_allclose(p.half_angles, math.pi / 4, atol=1e-8)
    np.testing.assert_allclose(p.area(), math.pi, rtol=1e-8)
    # curvature of the ellipse at the top is b / a^2
    arc = p.sides[1]
    s_top = 0.5 * arc.length
    assert float(arc.curvature(s_top)) == pytest.approx(1.0 / 4.0, rel=1e-6)


def test_l_shape_has_one_concave_vertex():
    p = l_shape(1.0)
    th = np.sort(p.half_angles)
    np.testing.assert_allclose(th[:-1], math.pi / 4, atol=1e-14)
    assert th[-1] == pytest.approx(3 * math.pi / 4)
    assert len(p.convex_vertices) == 5


def test_chain_not_closed():
    with pytest.raises(ChainNotClosed):
        build_polygon([{"start": [0, 0], "end": [1, 0]}, {"end": [1, 1]}, {"end": [0.1, 1]}, {"end": [0, 0.2]}])


def test_degenerate_angle_straight_continuation():
    with pytest.raises(DegenerateAngle):
        polygon_from_vertices([[0, 0], [1, 0], [2, 0], [2, 1], [0, 1]])


def test_degenerate_right_half_angle():
    # a straight angle (theta = pi/2) inside a chain is rejected
    with pytest.raises(DegenerateAngle):
        polygon_from_vertices([[0, 0], [0.5, 0], [1, 0], [0, 1]])


def test_self_intersection():
    with pytest.raises(SelfIntersection):
        polygon_from_vertices([[0, 0], [1, 1], [1, 0], [0, 1]])


def test_builtin_names():
    assert polygon_by_name("square(2)").area() == pytest.approx(4.0)
    assert polygon_by_name("rectangle(1,2)").perimeter() == pytest.approx(6.0)
    assert polygon_by_name("half-disk(1)").n_sides == 2
    assert load_polygon("equilateral(1)").n_sides == 3


def test_load_polygon_yaml(tmp_path):
    f = tmp_path / "tri.yaml"
    f.write_text("name: tri\nsides:\n  - {start: [0, 0], end: [1, 0]}\n  - {end: [0, 1]}\n  - {end: [0, 0]}\n")
    p = load_polygon(str(f))
    assert p.name == "tri"
    assert p.area() == pytest.approx(0.5)


def test_clockwise_input_rejected():
    with pytest.raises(ValueError, match="counterclockwise"):
        polygon_from_vertices([[0, 0], [0, 1], [1, 1], [1, 0]])


# ---------------------------------------------------------------------------
# truncated sectors


def test_sector_quarter_is_unit_square():
    s = truncated_sector(math.pi / 4, 1.0)
    h = math.sqrt(2) / 2
    np.testing.assert_allclose(s.O, [0, 0], atol=1e-15)
    np.testing.assert_allclose(s.A_plus, [h, h], atol=1e-15)
    np.testing.assert_allclose(s.A_minus, [h, -h], atol=1e-15)
    np.testing.assert_allclose(s.B, [math.sqrt(2), 0], atol=1e-15)
    assert s.area() == pytest.approx(1.0)
    assert s.region().area() == pytest.approx(1.0, abs=1e-12)


def test_sector_pi3_corners():
    s = truncated_sector(math.pi / 3, 2.0)
    np.testing.assert_allclose(s.B, [4.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(s.A_plus, [1.0, math.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(s.A_minus, [1.0, -math.sqrt(3)], atol=1e-14)


def test_sector_pi6_area_shoelace():
    s = truncated_sector(math.pi / 6, 1.0)
    c = s.corners()
    x, y = c[:, 0], c[:, 1]
    shoelace = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert shoelace == pytest.approx(1 / math.sqrt(3), rel=1e-14)
    assert s.area() == pytest.approx(1 / math.sqrt(3), rel=1e-14)


def test_sector_obtuse_rejected():
    with pytest.raises(ObtuseHalfAngle):
        truncated_sector(math.pi / 2, 1.0)


def test_sector_partitions():
    reg = truncated_sector(math.pi / 3, 2.0).region()
    assert reg.partition_length("star") == pytest.approx(4.0)
    assert {p.partition for p in reg.pieces} == {"star", "ext"}


# ---------------------------------------------------------------------------
# bisector points


def _wedge(theta):
    """Straight sides of a counter-clockwise boundary through a vertex at the origin opening towards +x."""
    inc = StraightSide((math.cos(theta), math.sin(theta)), (0.0, 0.0))
    out = StraightSide((0.0, 0.0), (math.cos(theta), -math.sin(theta)))
    return Germ.incoming(inc), Germ.outgoing(out)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, math.pi / 3, 1.3])
def test_bisector_straight_wedge(theta):
    gm, gp = _wedge(theta)
    t = 0.07
    bp = bisector_point(gm, gp, t, theta)
    np.testing.assert_allclose(bp.Y, [t / math.sin(theta), 0.0], atol=1e-14)
    assert bp.lam_plus == pytest.approx(t / math.tan(theta), rel=1e-12)
    assert bp.lam_minus == pytest.approx(t / math.tan(theta), rel=1e-12)


def _arc_germs(theta):
    """Two unit-curvature (convex) arcs meeting at the origin with half-angle theta."""
    out = ArcSide((0.0, 0.0), -theta, 1.0, 1.0)
    # mirror image of ``out`` in the x-axis, traversed backwards
    end, tan = out.point(1.0), out.tangent(1.0)
    inc = ArcSide((end[0], -end[1]), math.atan2(tan[1], -tan[0]), 1.0, 1.0)
    return inc, out


def test_bisector_arcs_distance_conditions():
    theta = math.pi / 3
    inc, out = _arc_germs(theta)
    np.testing.assert_allclose(inc.end, [0.0, 0.0], atol=1e-14)
    gm, gp = Germ.incoming(inc), Germ.outgoing(out)
    t = 0.01
    bp = bisector_point(gm, gp, t, theta)
    # independent closest-point projection onto each circle
    for arc in (inc, out):
        c, R = arc.center, arc.radius
        assert abs(abs(np.hypot(*(bp.Y - c)) - R)) == pytest.approx(t, abs=1e-9)
    assert bp.lam_plus / t == pytest.approx(1 / math.tan(theta), rel=2e-2)


def test_bisector_small_t_ratio():
    inc, out = _arc_germs(math.pi / 4)
    gm, gp = Germ.incoming(inc), Germ.outgoing(out)
    r = [bisector_point(gm, gp, t, math.pi / 4).lam_plus / t for t in (1e-2, 1e-3, 1e-4)]
    errs = [abs(x - 1.0) for x in r]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0.3, 1.3), t=st.floats(1e-3, 5e-2))
def test_bisector_swap_symmetry(theta, t):
    # the offset arcs only meet while t is below the lens inradius 1 - cos(theta)
    assume(t < 0.8 * (1.0 - math.cos(theta)))
    inc, out = _arc_germs(theta)
    gm, gp = Germ.incoming(inc), Germ.outgoing(out)
    a = bisector_point(gm, gp, t, theta)
    # mirror the picture: swapping the roles of the sides reflects across the bisector
    flip = np.array([1.0, -1.0])
    mirror = lambda g: Germ(lambda s: g.point(s) * flip, lambda s: g.tangent(s) * flip,
                            lambda s: g.normal(s) * flip, g.curvature, g.length)
    b = bisector_point(mirror(gp), mirror(gm), t, theta)
    np.testing.assert_allclose(b.Y * flip, a.Y, atol=1e-12)
    assert b.lam_plus == pytest.approx(a.lam_minus, abs=1e-12)
    assert b.lam_minus == pytest.approx(a.lam_plus, abs=1e-12)


# ---------------------------------------------------------------------------
# decomposition


def test_square_intervals():
    dec = decompose(square(1.0), 0.1)
    for a, b in dec.intervals:
        assert a == pytest.approx(0.1, abs=1e-14)
        assert b == pytest.approx(0.9, abs=1e-14)


@pytest.mark.parametrize("poly,delta,tol", [
    (half_disk(1.0), 0.05, 1e-6),
    (l_shape(1.0), 0.1, 1e-6),
    (half_ellipse(2.0, 1.0), 0.05, 1e-6),
    (equilateral(1.0), 0.05, 1e-6),
])
def test_area_additivity(poly, delta, tol):
    dec = decompose(poly, delta)
    assert abs(dec.total_area() - poly.area()) <= tol * poly.area()
    assert dec.ext_hausdorff() < 1e-9


def test_half_disk_area_to_pi_over_2():
    dec = decompose(half_disk(1.0), 0.05)
    assert dec.total_area() == pytest.approx(math.pi / 2, abs=1e-6)


@pytest.mark.parametrize("poly", [square(1.0), rectangle(1.0, 2.0), equilateral(1.0)])
def test_star_length_straight(poly):
    dec = decompose(poly, 0.05)
    assert dec.star_length() == pytest.approx(float(np.sum(dec.lam_plus + dec.lam_minus)), abs=1e-8)


def test_lambda_over_delta_tends_to_cot():
    p = half_disk(1.0)
    errs = []
    for d in (0.02, 0.005, 0.00125):
        dec = decompose(p, d)
        errs.append(max(abs(dec.lam_plus[j] / d - 1.0) for j in range(2)))
    assert errs[2] < errs[1] < errs[0]


def test_delta_too_large():
    with pytest.raises(DeltaTooLarge):
        decompose(square(1.0), 0.6)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.5, 2.0), b=st.floats(0.5, 2.0), frac=st.floats(0.02, 0.2))
def test_rectangle_area_additivity(a, b, frac):
    p = rectangle(a, b)
    dec = decompose(p, frac * min(a, b))
    assert abs(dec.total_area() - a * b) <= 1e-6 * a * b


def test_bisector_beyond_lens_inradius():
    theta = 0.3
    inc, out = _arc_germs(theta)
    with pytest.raises(NoConvergence):
        bisector_point(Germ.incoming(inc), Germ.outgoing(out), 1.2 * (1.0 - math.cos(theta)), theta)
