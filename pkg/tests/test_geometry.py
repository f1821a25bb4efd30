"""Geometry core tests: plane construction, (de)projection, ray-plane
intersection against the substitution oracle, frames, containment."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturepoint.geometry import (
    BehindCameraError,
    CameraIntrinsics,
    CollinearCornersError,
    DegenerateArmError,
    InvalidCornerPairError,
    NonFiniteValueError,
    NonPlanarCornerError,
    NonPositiveDepthError,
    NonSimpleQuadrilateralError,
    PixelOutOfBoundsError,
    PlanarPoint,
    Plane,
    Point3,
    Quaternion,
    Vec3,
    corners_in_frame,
    deproject,
    from_workplane,
    intersect_ray_plane,
    plane_from_corners,
    point_in_bounds,
    project,
    to_workplane,
    workplane_frame,
)

UNIT_SQUARE = [Point3(0, 0, 0), Point3(1, 0, 0), Point3(1, 1, 0), Point3(0, 1, 0)]


def random_plane(rng: np.random.Generator) -> Plane:
    """A random oriented rectangle somewhere in space."""
    center = rng.uniform(-2, 2, 3)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    rot = Quaternion(*q).to_matrix()
    e1 = np.array([rot[i][0] for i in range(3)])
    e2 = np.array([rot[i][1] for i in range(3)])
    a, b = rng.uniform(0.3, 1.5, 2)
    corners = [
        center - a * e1 - b * e2,
        center + a * e1 - b * e2,
        center + a * e1 + b * e2,
        center - a * e1 + b * e2,
    ]
    return plane_from_corners([Point3(*c) for c in corners])


def random_arm_case(rng: np.random.Generator):
    """A plane plus shoulder/wrist whose ray is guaranteed to hit it with t > 1."""
    plane = random_plane(rng)
    n = np.array(plane.normal.as_tuple())
    c = np.array(plane.corners[0].as_tuple())
    e1 = np.array((plane.corners[1] - plane.corners[0]).as_tuple())
    e2 = np.array((plane.corners[3] - plane.corners[0]).as_tuple())
    target = c + rng.uniform(0.1, 0.9) * e1 + rng.uniform(0.1, 0.9) * e2
    shoulder = target + rng.uniform(0.5, 2.0) * n + rng.uniform(-0.3, 0.3, 3)
    frac = rng.uniform(0.2, 0.8)  # wrist partway to the target, so t = 1/frac > 1
    wrist = shoulder + frac * (target - shoulder)
    return plane, Point3(*shoulder), Point3(*wrist)


# --- plane construction ------------------------------------------------------


def test_plane_from_unit_square():
    plane = plane_from_corners(UNIT_SQUARE[:3])
    assert plane.normal == Vec3(0.0, 0.0, 1.0)
    assert plane.d == 0.0
    # 3-corner form completes the parallelogram
    assert plane.corners[3] == Point3(0.0, 1.0, 0.0)


def test_plane_offset_d():
    plane = plane_from_corners([Point3(0, 0, 1), Point3(1, 0, 1), Point3(1, 1, 1)])
    assert plane.normal.z == pytest.approx(1.0)
    assert plane.d == pytest.approx(-1.0)


def test_plane_normal_convention_is_order_stable():
    fwd = plane_from_corners(UNIT_SQUARE)
    rev = plane_from_corners(list(reversed(UNIT_SQUARE)))
    assert fwd.normal == rev.normal  # convention makes the stored normal identical


def test_plane_normal_faces_viewpoint():
    below = plane_from_corners(UNIT_SQUARE[:3], viewpoint=Point3(0.5, 0.5, -3.0))
    assert below.normal.z == pytest.approx(-1.0)


def test_plane_collinear_corners():
    with pytest.raises(CollinearCornersError):
        plane_from_corners([Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)])


def test_plane_nonplanar_fourth_corner():
    rng = np.random.default_rng(5)
    for _ in range(20):
        plane = random_plane(rng)
        lifted = plane.corners[3] + plane.normal * 0.02
        with pytest.raises(NonPlanarCornerError):
            plane_from_corners(list(plane.corners[:3]) + [lifted])


def test_plane_fourth_corner_within_tolerance_is_snapped():
    lifted = Point3(0.0, 1.0, 0.004)  # below the 5 mm default
    plane = plane_from_corners(UNIT_SQUARE[:3] + [lifted])
    assert abs(plane.signed_distance(plane.corners[3])) < 1e-12


def test_plane_nonfinite_corner():
    with pytest.raises(NonFiniteValueError):
        plane_from_corners([Point3(0, 0, float("nan")), Point3(1, 0, 0), Point3(1, 1, 0)])


def test_plane_rejects_self_intersecting_corner_order():
    with pytest.raises(NonSimpleQuadrilateralError):
        plane_from_corners(
            [Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(1, 1, 0)]
        )


# --- pinhole model -----------------------------------------------------------

INTR = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=1280, height=960)


def test_deproject_principal_point():
    assert deproject((320.0, 240.0), 1.0, INTR) == Point3(0.0, 0.0, 1.0)


def test_deproject_one_focal_length_off_center():
    assert deproject((920.0, 240.0), 2.0, INTR) == Point3(2.0, 0.0, 2.0)


def test_deproject_errors():
    with pytest.raises(NonPositiveDepthError):
        deproject((320.0, 240.0), 0.0, INTR)
    with pytest.raises(PixelOutOfBoundsError):
        deproject((-1.0, 240.0), 1.0, INTR)
    with pytest.raises(PixelOutOfBoundsError):
        deproject((320.0, 1000.0), 1.0, INTR)


def test_project_examples():
    assert project(Point3(0, 0, 1), INTR) == (320.0, 240.0)
    assert project(Point3(1, 0, 1), INTR) == (920.0, 240.0)
    with pytest.raises(BehindCameraError):
        project(Point3(0, 0, -0.5), INTR)


@settings(max_examples=200)
@given(
    px=st.floats(0, 1279.99),
    py=st.floats(0, 959.99),
    depth=st.floats(0.05, 20.0),
)
def test_project_inverts_deproject(px, py, depth):
    point = deproject((px, py), depth, INTR)
    rx, ry = project(point, INTR)
    assert rx == pytest.approx(px, abs=1e-6)
    assert ry == pytest.approx(py, abs=1e-6)


def test_deproject_inverts_project_for_visible_points():
    rng = np.random.default_rng(21)
    kept = 0
    while kept < 200:
        point = Point3(*rng.uniform(-1, 1, 2), rng.uniform(0.2, 5.0))
        px, py = project(point, INTR)
        if not (0 <= px < INTR.width and 0 <= py < INTR.height):
            continue
        back = deproject((px, py), point.z, INTR)
        for got, want in zip(back.as_tuple(), point.as_tuple()):
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
        kept += 1


def test_intrinsics_validation():
    with pytest.raises(Exception):
        CameraIntrinsics(fx=-1.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)
    with pytest.raises(Exception):
        CameraIntrinsics(fx=600.0, fy=600.0, cx=800.0, cy=240.0, width=640, height=480)


# --- ray-plane intersection --------------------------------------------------


def test_intersection_scaling_factor():
    plane = plane_from_corners(UNIT_SQUARE)
    hit = intersect_ray_plane(Point3(0, 0, 1), Point3(0, 0, 0.5), plane)
    assert hit.t == pytest.approx(2.0)
    assert hit.point == Point3(0.0, 0.0, 0.0)


def test_intersection_parallel_ray():
    plane = plane_from_corners(UNIT_SQUARE)
    assert intersect_ray_plane(Point3(0, 0, 1), Point3(1, 0, 1), plane) is None


def test_intersection_pointing_away():
    plane = plane_from_corners(UNIT_SQUARE)
    assert intersect_ray_plane(Point3(0, 0, 1), Point3(0, 0, 1.5), plane) is None


def test_intersection_degenerate_arm():
    plane = plane_from_corners(UNIT_SQUARE)
    with pytest.raises(DegenerateArmError):
        intersect_ray_plane(Point3(0, 0, 1), Point3(0, 0, 1.005), plane)


def test_intersection_substitution_oracle():
    rng = np.random.default_rng(101)
    for _ in range(1000):
        plane, shoulder, wrist = random_arm_case(rng)
        hit = intersect_ray_plane(shoulder, wrist, plane)
        assert hit is not None
        assert abs(plane.signed_distance(hit.point)) < 1e-9
        arm = wrist - shoulder
        reach = hit.point - shoulder
        cross = arm.cross(reach)
        assert cross.norm() < 1e-9 * arm.norm() * max(reach.norm(), 1e-300)


def test_intersection_scale_invariance():
    rng = np.random.default_rng(77)
    for _ in range(200):
        plane, shoulder, wrist = random_arm_case(rng)
        s = rng.uniform(0.1, 10.0)
        scaled_plane = plane_from_corners([Point3(c.x * s, c.y * s, c.z * s) for c in plane.corners])
        base = intersect_ray_plane(shoulder, wrist, plane)
        scaled = intersect_ray_plane(
            Point3(shoulder.x * s, shoulder.y * s, shoulder.z * s),
            Point3(wrist.x * s, wrist.y * s, wrist.z * s),
            scaled_plane,
        )
        assert scaled.t == pytest.approx(base.t, rel=1e-9)
        for got, want in zip(scaled.point.as_tuple(), base.point.as_tuple()):
            assert got == pytest.approx(want * s, rel=1e-9, abs=1e-12)


def test_intersection_rigid_motion_equivariance():
    rng = np.random.default_rng(88)
    for _ in range(200):
        plane, shoulder, wrist = random_arm_case(rng)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        rot = np.array(Quaternion(*q).to_matrix())
        t = rng.uniform(-2, 2, 3)

        def move(p: Point3) -> Point3:
            return Point3(*(rot @ np.array(p.as_tuple()) + t))

        moved_plane = plane_from_corners([move(c) for c in plane.corners])
        base = intersect_ray_plane(shoulder, wrist, plane)
        moved = intersect_ray_plane(move(shoulder), move(wrist), moved_plane)
        expected = move(base.point)
        for got, want in zip(moved.point.as_tuple(), expected.as_tuple()):
            assert got == pytest.approx(want, abs=1e-9)


# --- workplane frames --------------------------------------------------------


def test_workplane_frame_identity():
    plane = plane_from_corners(UNIT_SQUARE)
    frame = workplane_frame(plane, 0, 1)
    assert frame.origin == Point3(0.0, 0.0, 0.0)
    assert frame.orientation == Quaternion(1.0, 0.0, 0.0, 0.0)


def test_workplane_frame_quarter_turn():
    plane = plane_from_corners(UNIT_SQUARE)
    frame = workplane_frame(plane, 1, 2)
    q = frame.orientation
    assert q.w == pytest.approx(math.cos(math.pi / 4))
    assert q.z == pytest.approx(math.sin(math.pi / 4))
    assert q.x == pytest.approx(0.0, abs=1e-12)


def test_workplane_frame_invalid_pairs():
    plane = plane_from_corners(UNIT_SQUARE)
    with pytest.raises(InvalidCornerPairError):
        workplane_frame(plane, 1, 1)
    with pytest.raises(InvalidCornerPairError):
        workplane_frame(plane, 0, 2)  # diagonal, not adjacent
    with pytest.raises(InvalidCornerPairError):
        workplane_frame(plane, 0, 5)


def test_workplane_frame_orthonormal_right_handed():
    rng = np.random.default_rng(3)
    for _ in range(200):
        plane = random_plane(rng)
        frame = workplane_frame(plane, 0, 1)
        r = np.array(frame.orientation.to_matrix())
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
        # z column is the plane normal, x column is along the chosen edge
        assert float(r[:, 2] @ np.array(plane.normal.as_tuple())) >= 1 - 1e-6
        edge = np.array((plane.corners[1] - plane.corners[0]).as_tuple())
        assert float(r[:, 0] @ (edge / np.linalg.norm(edge))) >= 1 - 1e-6


def test_to_workplane_identity_frame():
    plane = plane_from_corners(UNIT_SQUARE)
    frame = workplane_frame(plane)
    p = to_workplane(Point3(0.3, 0.2, 0.0), frame)
    assert (p.u, p.v, p.z_residual) == (0.3, 0.2, 0.0)


def test_plane_corners_map_to_zero_residual():
    rng = np.random.default_rng(4)
    for _ in range(100):
        plane = random_plane(rng)
        frame = workplane_frame(plane)
        assert to_workplane(plane.corners[0], frame) == PlanarPoint(0.0, 0.0, 0.0)
        for corner in plane.corners:
            assert abs(to_workplane(corner, frame).z_residual) < 1e-9


def test_to_workplane_on_plane_residual():
    rng = np.random.default_rng(6)
    plane = random_plane(rng)
    frame = workplane_frame(plane)
    c = np.array(plane.corners[0].as_tuple())
    e1 = np.array((plane.corners[1] - plane.corners[0]).as_tuple())
    e2 = np.array((plane.corners[3] - plane.corners[0]).as_tuple())
    for _ in range(1000):
        p = Point3(*(c + rng.uniform(0, 1) * e1 + rng.uniform(0, 1) * e2))
        assert abs(to_workplane(p, frame).z_residual) < 1e-9


def test_from_workplane_round_trip():
    rng = np.random.default_rng(9)
    plane = random_plane(rng)
    frame = workplane_frame(plane)
    for _ in range(200):
        p = Point3(*rng.uniform(-2, 2, 3))
        back = from_workplane(to_workplane(p, frame), frame)
        for got, want in zip(back.as_tuple(), p.as_tuple()):
            assert got == pytest.approx(want, abs=1e-12)


# --- containment -------------------------------------------------------------

SQUARE_UV = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def test_point_in_bounds_basic():
    assert point_in_bounds(PlanarPoint(0.5, 0.5), SQUARE_UV)
    assert not point_in_bounds(PlanarPoint(1.5, 0.5), SQUARE_UV)


def test_point_in_bounds_boundary_counts_inside():
    assert point_in_bounds(PlanarPoint(1.0, 0.5), SQUARE_UV)
    assert point_in_bounds(PlanarPoint(0.0, 0.0), SQUARE_UV)
    assert point_in_bounds(PlanarPoint(0.5, 1.0), SQUARE_UV)


def _winding_inside(u: float, v: float, poly) -> bool:
    total = 0.0
    for i in range(len(poly)):
        ax, ay = poly[i][0] - u, poly[i][1] - v
        bx, by = poly[(i + 1) % len(poly)][0] - u, poly[(i + 1) % len(poly)][1] - v
        total += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return abs(total) > math.pi


def _distance_to_edges(u, v, poly) -> float:
    best = math.inf
    for i in range(len(poly)):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % len(poly)]
        dx, dy = bx - ax, by - ay
        t = max(0.0, min(1.0, ((u - ax) * dx + (v - ay) * dy) / (dx * dx + dy * dy)))
        best = min(best, math.hypot(u - (ax + t * dx), v - (ay + t * dy)))
    return best


@pytest.mark.parametrize(
    "poly",
    [SQUARE_UV, ((0.0, 0.0), (2.0, 0.2), (1.8, 1.4), (-0.2, 1.0))],
    ids=["square", "irregular"],
)
def test_point_in_bounds_matches_winding_oracle(poly):
    rng = np.random.default_rng(12)
    checked = 0
    while checked < 10_000:
        u, v = rng.uniform(-0.6, 2.4, 2)
        if _distance_to_edges(u, v, poly) < 1e-9:
            continue
        assert point_in_bounds(PlanarPoint(u, v), poly) == _winding_inside(u, v, poly)
        checked += 1
