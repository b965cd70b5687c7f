"""
Unit Tests for Geometry Primitives

This module covers planes and their canonical form, rigid poses, the pinhole
camera, back-projection and the planar polygon toolkit used by candidate
generation and voting.

Test Categories:
- Plane canonicalization
- Pose algebra and plane transforms
- Camera projection and back-projection
- Polygon clipping and areas
- 2D predicates

Author: planefusion Testing Team
Date: 2026
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from planefusion.errors import (
    BehindCamera,
    DegeneratePatch,
    DegeneratePlane,
    GeometryError,
    NearPerpendicular,
    ParallelPlanes,
    RayParallel,
)
from planefusion.geometry import (
    BBox,
    Intrinsics,
    PlanarPolygon,
    Plane,
    PlaneFrame,
    Pose,
    backproject_pixel,
    backproject_pixels,
    bbox_to_patch,
    canonicalize,
    clip_convex,
    clip_halfplane,
    intersect_planes,
    is_simple_polygon,
    point_in_polygon,
    polygon_area,
    polygon_centroid,
    polygon_intersection_area,
    project_patch,
    split_convex,
    transform_plane,
)
from tests.fixtures.test_data import (
    fronto_plane,
    inside_convex,
    random_convex_polygon,
    rotation_about_x,
    square_patch,
)

coords = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)
offsets = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)
vectors = st.tuples(coords, coords, coords)
quaternions = st.tuples(coords, coords, coords, coords)


def _plane(n, d) -> Plane:
    n = np.array(n)
    assume(np.linalg.norm(n) > 0.1)
    assume(abs(d) > 1e-3)
    return Plane(n, d)


def _pose(q, t) -> Pose:
    assume(np.linalg.norm(q) > 0.1)
    return Pose(np.array(q), np.array(t) * 5.0)


class TestCanonicalize:
    """Test suite for the canonical plane representative"""

    def test_negative_offset_flips(self):
        """
        Test that a negative offset is made positive

        The whole vector is negated so the point set is unchanged.
        """
        p = canonicalize([0.0, 0.0, 1.0, -2.0])
        assert np.array_equal(p.normal, [0.0, 0.0, -1.0])
        assert p.offset == 2.0

    def test_zero_offset_uses_first_nonzero_component(self):
        p = canonicalize([0.0, -1.0, 0.0, 0.0])
        assert np.array_equal(p.normal, [0.0, 1.0, 0.0])
        assert p.offset == 0.0
        assert p.is_canonical

    def test_scale_invariance(self):
        """
        Test that scaled plane vectors share one representative
        """
        a = canonicalize([0.0, 0.0, 2.0, 4.0])
        b = canonicalize([0.0, 0.0, -0.5, -1.0])
        assert a.allclose(b, 1e-15)
        assert a.offset == pytest.approx(2.0)

    def test_zero_normal_rejected(self):
        with pytest.raises(DegeneratePlane):
            canonicalize([0.0, 0.0, 0.0, 1.0])
        with pytest.raises(DegeneratePlane):
            Plane(np.zeros(3), 1.0)

    def test_tiny_offset_snaps_to_zero(self):
        p = canonicalize([-1.0, 0.0, 0.0, -1e-14])
        assert p.offset == 0.0
        assert p.normal[0] == 1.0

    def test_rounding_residue_does_not_pick_the_sign(self):
        """
        Test that a leading component within tolerance of zero is skipped

        Both vectors describe the y = 0 plane up to floating point noise.
        """
        a = canonicalize([-1e-17, 1.0, 0.0, 0.0])
        b = canonicalize([1e-17, -1.0, 0.0, 0.0])
        assert a.normal[1] == 1.0
        assert b.normal[1] == 1.0
        assert a.allclose(b, 1e-15)
        assert a.is_canonical and b.is_canonical

    @given(vectors, offsets)
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, n, d):
        """
        Property: canonicalizing twice changes nothing, bit for bit
        """
        p = canonicalize(_plane(n, d))
        q = canonicalize(p)
        assert np.array_equal(p.vector, q.vector)
        assert p.is_canonical

    @given(vectors, offsets, st.floats(min_value=0.01, max_value=100.0))
    @settings(max_examples=200, deadline=None)
    def test_sign_and_scale_free(self, n, d, s):
        p = _plane(n, d)
        a = canonicalize(p.vector)
        b = canonicalize(-s * p.vector)
        assert np.allclose(a.vector, b.vector, atol=1e-12)


class TestPoseAndTransforms:
    """Test suite for rigid transforms of points and planes"""

    def test_identity(self):
        pose = Pose.identity()
        pts = np.array([[1.0, 2.0, 3.0]])
        assert np.allclose(pose.apply(pts), pts)

    def test_quaternion_sign_is_normalised(self):
        pose = Pose(np.array([0.0, 0.0, 0.0, -2.0]), np.zeros(3))
        assert np.array_equal(pose.quaternion, [0.0, 0.0, 0.0, 1.0])

    def test_look_at_axes(self):
        """
        Test the camera axes of a level camera looking along +x

        The optical axis maps to +x and image rows run towards -z.
        """
        pose = Pose.look_at([1.0, 2.0, 1.5], yaw_deg=0.0, pitch_deg=0.0)
        assert np.allclose(pose.apply([[0.0, 0.0, 1.0]])[0], [2.0, 2.0, 1.5], atol=1e-12)
        assert np.allclose(pose.rotation[:, 1], [0.0, 0.0, -1.0], atol=1e-12)
        assert np.allclose(pose.rotation[:, 0], [0.0, -1.0, 0.0], atol=1e-12)

    def test_reflection_rejected(self):
        with pytest.raises(GeometryError):
            Pose.from_matrix(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_non_orthonormal_rejected(self):
        with pytest.raises(GeometryError):
            Pose.from_matrix(np.diag([2.0, 1.0, 1.0]), np.zeros(3))

    def test_transform_plane_known_case(self, assertions):
        """
        Test a camera 1 m above the origin looking straight down
        """
        down = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        pose = Pose.from_matrix(down, [0.0, 0.0, 1.0])
        floor_cam = fronto_plane(1.0)
        assertions.assert_plane_close(transform_plane(floor_cam, pose), Plane(np.array([0.0, 0.0, 1.0]), 0.0))

    @given(vectors, offsets, quaternions, vectors)
    @settings(max_examples=300, deadline=None)
    def test_round_trip(self, n, d, q, t):
        """
        Property: transforming by T then by T^-1 returns the canonical input
        """
        p = canonicalize(_plane(n, d))
        pose = _pose(q, t)
        back = transform_plane(transform_plane(p, pose), pose.inverse())
        assert np.allclose(back.vector, p.vector, atol=1e-9)

    @given(vectors, offsets, quaternions, vectors, quaternions, vectors)
    @settings(max_examples=200, deadline=None)
    def test_composition(self, n, d, q1, t1, q2, t2):
        p = _plane(n, d)
        a, b = _pose(q1, t1), _pose(q2, t2)
        direct = transform_plane(p, a.compose(b))
        chained = transform_plane(transform_plane(p, b), a)
        assume(abs(direct.offset) > 1e-6)
        assert np.allclose(direct.vector, chained.vector, atol=1e-9)

    @given(quaternions, vectors)
    @settings(max_examples=100, deadline=None)
    def test_inverse_composes_to_identity(self, q, t):
        pose = _pose(q, t)
        ident = pose.compose(pose.inverse())
        assert np.allclose(ident.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(ident.translation, 0.0, atol=1e-9)


class TestCamera:
    """Test suite for intrinsics, projection and back-projection"""

    def test_principal_point_must_be_inside(self):
        with pytest.raises(ValidationError):
            Intrinsics(cx=400.0, width=320)

    def test_matrix(self, intrinsics):
        assert np.array_equal(intrinsics.matrix, [[200.0, 0.0, 160.0], [0.0, 200.0, 120.0], [0.0, 0.0, 1.0]])

    def test_backproject_then_project(self, intrinsics):
        """
        Test that back-projected pixels reproject onto themselves
        """
        plane = canonicalize([0.3, -0.2, -1.0, 3.0])
        for px in [(10.0, 10.0), (160.0, 120.0), (300.5, 231.25)]:
            point = backproject_pixel(px, intrinsics, plane)
            assert abs(float(plane.signed_distance(point))) < 1e-9
            assert np.allclose(intrinsics.project(point)[0], px, atol=1e-6)

    def test_ray_parallel(self, intrinsics):
        side = Plane(np.array([1.0, 0.0, 0.0]), 1.0)
        with pytest.raises(RayParallel):
            backproject_pixel((160.0, 120.0), intrinsics, side)

    def test_behind_camera(self, intrinsics):
        behind = Plane(np.array([0.0, 0.0, 1.0]), 2.0)
        with pytest.raises(BehindCamera):
            backproject_pixel((160.0, 120.0), intrinsics, behind)

    def test_vectorised_matches_scalar(self, intrinsics):
        plane = canonicalize([0.1, 0.2, -1.0, 2.5])
        pixels = BBox(10.0, 20.0, 40.0, 35.0).pixel_grid(5)
        points, valid = backproject_pixels(pixels, intrinsics, plane)
        assert valid.all()
        for px, pt in zip(pixels, points):
            assert np.allclose(pt, backproject_pixel(px, intrinsics, plane), atol=1e-12)

    def test_bbox_to_patch_fronto_parallel(self, intrinsics, assertions):
        """
        Test the patch of a bbox on a wall 2 m ahead

        The 200 x 200 px box spans 2 m x 2 m at f = 200 px.
        """
        patch = bbox_to_patch(BBox(60.0, 20.0, 260.0, 220.0), intrinsics, fronto_plane(2.0))
        assert patch.area == pytest.approx(4.0, abs=1e-9)
        assertions.assert_on_plane(patch.vertices3d, fronto_plane(2.0), 1e-12)

    def test_bbox_to_patch_oblique_matches_sampling(self, intrinsics):
        """
        Test oblique patch area against per-pixel back-projected cell areas
        """
        plane = canonicalize([0.0, 0.6, -0.8, 2.0])
        bbox = BBox(40.0, 30.0, 280.0, 110.0)
        patch = bbox_to_patch(bbox, intrinsics, plane)
        grid = bbox.pixel_grid(1)
        total = 0.0
        for u, v in grid:
            cell = BBox(u, v, u + 1.0, v + 1.0)
            corners = np.array([backproject_pixel(c, intrinsics, plane) for c in cell.corners()])
            total += PlanarPolygon.from_points(plane, corners).area
        assert total == pytest.approx(patch.area, rel=0.01)

    def test_zero_width_bbox_is_degenerate(self, intrinsics):
        with pytest.raises(DegeneratePatch):
            bbox_to_patch(BBox(10.0, 10.0, 10.0, 20.0), intrinsics, fronto_plane(2.0))


class TestBBox:
    """Test suite for bounding-box helpers"""

    def test_iou(self):
        assert BBox(0, 0, 2, 2).iou(BBox(1, 1, 3, 3)) == pytest.approx(1.0 / 7.0)
        assert BBox(0, 0, 1, 1).iou(BBox(2, 2, 3, 3)) == 0.0
        assert BBox(0, 0, 1, 1).iou(BBox(0, 0, 1, 1)) == pytest.approx(1.0)

    def test_pixel_grid_half_open(self):
        grid = BBox(0.5, 0.0, 3.0, 2.0).pixel_grid()
        assert grid.tolist() == [[1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [2.0, 1.0]]

    def test_within(self, intrinsics):
        assert BBox(0, 0, 320, 240).within(intrinsics)
        assert not BBox(-1, 0, 10, 10).within(intrinsics)


class TestPlaneIntersection:
    """Test suite for plane-plane intersection lines"""

    def test_axis_planes(self):
        line = intersect_planes(Plane(np.array([1.0, 0.0, 0.0]), -1.0), Plane(np.array([0.0, 1.0, 0.0]), -2.0))
        pts = line.at(np.array([-3.0, 0.0, 7.5]))
        assert np.allclose(pts[:, :2], [[1.0, 2.0]] * 3)
        assert abs(abs(line.direction[2]) - 1.0) < 1e-12

    def test_parallel(self):
        with pytest.raises(ParallelPlanes):
            intersect_planes(Plane(np.array([1.0, 0.0, 0.0]), 0.0), Plane(np.array([-1.0, 0.0, 0.0]), 3.0))

    @given(vectors, offsets, vectors, offsets)
    @settings(max_examples=200, deadline=None)
    def test_residuals(self, n1, d1, n2, d2):
        """
        Property: sampled line points satisfy both plane equations
        """
        p1, p2 = _plane(n1, d1), _plane(n2, d2)
        assume(np.linalg.norm(np.cross(p1.normal, p2.normal)) > 1e-3)
        line = intersect_planes(p1, p2)
        pts = line.at(np.linspace(-2.0, 2.0, 5))
        assert np.abs(p1.signed_distance(pts)).max() < 1e-9
        assert np.abs(p2.signed_distance(pts)).max() < 1e-9


class TestPolygons:
    """Test suite for planar polygons, clipping and areas"""

    SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def test_area_sign(self):
        assert polygon_area(self.SQUARE) == 1.0
        assert polygon_area(self.SQUARE[::-1]) == -1.0
        assert polygon_area(self.SQUARE[:2]) == 0.0

    def test_centroid(self):
        assert np.allclose(polygon_centroid(2.0 * self.SQUARE), [1.0, 1.0])

    def test_planar_polygon_forced_ccw(self):
        plane = fronto_plane(1.0)
        poly = PlanarPolygon(plane, PlaneFrame.for_plane(plane), self.SQUARE[::-1])
        assert poly.area == 1.0

    def test_vertical_plane_frame_has_up_axis(self):
        frame = PlaneFrame.for_plane(Plane(np.array([1.0, 0.0, 0.0]), -2.0))
        assert np.allclose(frame.v, [0.0, 0.0, 1.0])
        assert np.allclose(np.cross(frame.u, frame.v), frame.normal)

    def test_translated_keeps_area(self, assertions):
        plane = canonicalize([1.0, 0.0, 0.0, -2.0])
        poly = square_patch(plane, 2.0)
        moved = poly.translated(np.array([-3.0, 1.0, 0.5]))
        assert moved.area == pytest.approx(4.0)
        assertions.assert_on_plane(moved.vertices3d, moved.plane, 1e-12)
        assertions.assert_canonical(moved.plane)

    def test_clip_halfplane(self):
        half = clip_halfplane(self.SQUARE, 1.0, 0.0, -0.5)
        assert polygon_area(half) == pytest.approx(0.5)
        assert clip_halfplane(self.SQUARE, 1.0, 0.0, -2.0).shape == (0, 2)

    def test_split_convex_partitions_area(self):
        left, right = split_convex(self.SQUARE, 1.0, 1.0, -1.0)
        assert polygon_area(left) + polygon_area(right) == pytest.approx(1.0)
        assert polygon_area(left) == pytest.approx(0.5)

    def test_clip_convex(self):
        shifted = self.SQUARE + 0.5
        assert polygon_area(clip_convex(self.SQUARE, shifted)) == pytest.approx(0.25)
        assert polygon_intersection_area(self.SQUARE, self.SQUARE + 2.0) == 0.0

    def test_intersection_area_matches_monte_carlo(self):
        """
        Test convex intersection areas against uniform sampling on 100 random pairs

        Tolerance is five standard errors of the sampling estimate.
        """
        rng = np.random.default_rng(2024)
        n = 200_000
        for _ in range(100):
            a = random_convex_polygon(rng)
            b = random_convex_polygon(rng)
            exact = polygon_intersection_area(a, b)
            samples = rng.uniform(0.0, 1.0, size=(n, 2))
            hits = inside_convex(samples, a) & inside_convex(samples, b)
            p = hits.mean()
            sigma = math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
            assert abs(p - exact) <= 5.0 * sigma + 1e-12

    def test_projection_onto_tilted_plane(self):
        """
        Test that projecting onto a plane tilted by 50 deg scales area by cos 50
        """
        dst = square_patch(Plane(np.array([0.0, 0.0, 1.0]), 0.0), 4.0)
        tilted = Plane(rotation_about_x(50.0) @ np.array([0.0, 0.0, 1.0]), 0.0)
        src = square_patch(tilted, 1.0)
        projected = project_patch(src, dst)
        assert projected.area == pytest.approx(math.cos(math.radians(50.0)), rel=1e-9)
        assert projected.area <= src.area

    def test_projection_beyond_limit_rejected(self):
        dst = square_patch(Plane(np.array([0.0, 0.0, 1.0]), 0.0), 4.0)
        steep = Plane(rotation_about_x(70.0) @ np.array([0.0, 0.0, 1.0]), 0.0)
        with pytest.raises(NearPerpendicular):
            project_patch(square_patch(steep, 1.0), dst)

    def test_projection_ignores_normal_orientation(self):
        dst = square_patch(Plane(np.array([0.0, 0.0, 1.0]), 0.0), 4.0)
        flipped = Plane(np.array([0.0, 0.0, -1.0]), 0.5)
        assert project_patch(square_patch(flipped, 1.0), dst).area == pytest.approx(1.0)


class TestPredicates:
    """Test suite for simple-polygon and containment predicates"""

    def test_simple(self):
        assert is_simple_polygon(np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float))
        assert not is_simple_polygon(np.array([[0, 0], [2, 2], [2, 0], [0, 2]], dtype=float))

    def test_point_in_polygon(self):
        l_shape = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
        assert point_in_polygon((0.5, 0.5), l_shape)
        assert point_in_polygon((0.5, 1.5), l_shape)
        assert not point_in_polygon((1.5, 1.5), l_shape)
