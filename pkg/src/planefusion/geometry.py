"""
Planes, poses, camera projection and planar polygon primitives.

Conventions:
    * A plane ``(n, d)`` is the point set ``n . x + d = 0`` with ``||n|| = 1``.
      Its canonical form has ``d >= 0``; when ``d == 0`` the first nonzero
      component of ``n`` is positive.
    * A :class:`Pose` maps camera coordinates to world coordinates,
      ``x_w = R x_c + t``.
    * Camera frame: x right, y down, z forward. Pixel ``(u, v)`` sees the ray
      ``((u - cx) / fx, (v - cy) / fy, 1)``.
    * 2D polygons are ``(N, 2)`` arrays, counter-clockwise.

All values are immutable after construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from pydantic import model_validator
from scipy.spatial.transform import Rotation

from planefusion import config
from planefusion.config import ConfigModel, unit_field
from planefusion.errors import (
    BehindCamera,
    DegeneratePatch,
    DegeneratePlane,
    GeometryError,
    NearPerpendicular,
    ParallelPlanes,
    RayParallel,
)

logger = logging.getLogger(__name__)

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])

# a vector within this distance of unit length is not renormalised, which
# keeps canonicalize and the pose quaternion exactly idempotent
_UNIT_SLACK = 4.0 * float(np.finfo(float).eps)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _as_vector(values: Iterable[float], size: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have {size} components, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def normal_angle_deg(n1: np.ndarray, n2: np.ndarray) -> float:
    """Angle between two unit vectors in degrees."""
    return math.degrees(math.acos(max(-1.0, min(1.0, float(np.dot(n1, n2))))))


# Planes -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Plane:
    """Unit normal plus signed offset; not necessarily canonical."""

    normal: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        n = _as_vector(self.normal, 3, "normal")
        d = float(self.offset)
        norm = float(np.linalg.norm(n))
        if norm < config.TOLERANCES.degenerate_norm:
            raise DegeneratePlane(f"normal {n} has zero length")
        if abs(norm - 1.0) > _UNIT_SLACK:
            n = n / norm
            d = d / norm
        object.__setattr__(self, "normal", _frozen(n + 0.0))
        object.__setattr__(self, "offset", d + 0.0)

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.normal, self.offset)

    @property
    def is_canonical(self) -> bool:
        if self.offset > config.TOLERANCES.zero_offset:
            return True
        if self.offset != 0.0:
            return False
        leading = self.normal[np.abs(self.normal) > config.TOLERANCES.zero_offset]
        return bool(leading.size and leading[0] > 0)

    @property
    def point(self) -> np.ndarray:
        """Point of the plane closest to the coordinate origin."""
        return -self.offset * self.normal

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal + self.offset

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)

    def translated(self, shift: np.ndarray) -> "Plane":
        """The plane moved rigidly by ``shift``."""
        return Plane(self.normal, self.offset - float(self.normal @ np.asarray(shift, float)))

    def allclose(self, other: "Plane", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.vector, other.vector, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        n = ", ".join(f"{c:.6g}" for c in self.normal)
        return f"Plane(normal=({n}), offset={self.offset:.6g})"


def canonicalize(raw: Union[Sequence[float], np.ndarray, Plane]) -> Plane:
    """
    Canonical representative of the plane ``raw = [nx, ny, nz, d]``.

    Raises:
        DegeneratePlane: if the normal part has (near) zero length.
    """
    v = raw.vector if isinstance(raw, Plane) else _as_vector(raw, 4, "plane")
    n = v[:3]
    d = float(v[3])
    norm = float(np.linalg.norm(n))
    if not math.isfinite(norm) or norm < config.TOLERANCES.degenerate_norm:
        raise DegeneratePlane(f"cannot canonicalize {v.tolist()}: zero normal")
    if abs(norm - 1.0) > _UNIT_SLACK:
        n = n / norm
        d = d / norm
    if abs(d) <= config.TOLERANCES.zero_offset:
        d = 0.0
        first = n[np.abs(n) > config.TOLERANCES.zero_offset][0]
        if first < 0:
            n = -n
    elif d < 0:
        n, d = -n, -d
    return Plane(n, d)


@dataclass(frozen=True, eq=False)
class Line3D:
    point: np.ndarray
    direction: np.ndarray

    def at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.point + np.multiply.outer(t, self.direction)


def intersect_planes(p1: Plane, p2: Plane) -> Line3D:
    """
    Intersection line of two planes.

    Raises:
        ParallelPlanes: if the normals are (near) parallel.
    """
    cross = np.cross(p1.normal, p2.normal)
    norm = float(np.linalg.norm(cross))
    if norm < config.TOLERANCES.parallel_planes:
        raise ParallelPlanes(f"{p1!r} and {p2!r} do not intersect in a line")
    direction = cross / norm
    system = np.vstack([p1.normal, p2.normal, direction])
    point = np.linalg.solve(system, np.array([-p1.offset, -p2.offset, 0.0]))
    return Line3D(_frozen(point), _frozen(direction))


# Poses --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid camera-to-world transform.

    The rotation is stored as a unit quaternion ``(x, y, z, w)`` with ``w >= 0``
    so that poses written to trajectory files reload bit-exactly; the matrix is
    derived from it.
    """

    quaternion: np.ndarray
    translation: np.ndarray
    rotation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        q = _as_vector(self.quaternion, 4, "quaternion")
        norm = float(np.linalg.norm(q))
        if norm < config.TOLERANCES.degenerate_norm:
            raise GeometryError("quaternion has zero length")
        if abs(norm - 1.0) > _UNIT_SLACK:
            q = q / norm
        if q[3] < 0:
            q = -q
        t = _as_vector(self.translation, 3, "translation")
        rotation = Rotation.from_quat(q).as_matrix()
        object.__setattr__(self, "quaternion", _frozen(q + 0.0))
        object.__setattr__(self, "translation", _frozen(t + 0.0))
        object.__setattr__(self, "rotation", _frozen(rotation))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))

    @classmethod
    def look_at(cls, eye: Sequence[float], yaw_deg: float, pitch_deg: float) -> "Pose":
        """
        Camera at ``eye`` looking along heading ``yaw_deg`` (from +x towards +y)
        tilted by ``pitch_deg`` (positive up). Image rows run downwards.
        """
        yaw, pitch = math.radians(yaw_deg), math.radians(pitch_deg)
        forward = np.array(
            [math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), math.sin(pitch)]
        )
        right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
        down = np.cross(forward, right)
        return cls.from_matrix(np.column_stack([right, down, forward]), eye)

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation: Sequence[float]) -> "Pose":
        r = np.asarray(rotation, dtype=float).reshape(3, 3)
        tol = config.TOLERANCES.rotation
        if not np.allclose(r @ r.T, np.eye(3), rtol=0.0, atol=tol):
            raise GeometryError("rotation is not orthonormal")
        if abs(float(np.linalg.det(r)) - 1.0) > tol:
            raise GeometryError("rotation is a reflection")
        return cls(Rotation.from_matrix(r).as_quat(), translation)

    @property
    def position(self) -> np.ndarray:
        return self.translation

    def inverse(self) -> "Pose":
        q = self.quaternion
        conj = np.array([-q[0], -q[1], -q[2], q[3]])
        return Pose(conj, -(self.rotation.T @ self.translation))

    def compose(self, other: "Pose") -> "Pose":
        """``self o other``: apply ``other`` first, then ``self``."""
        rot = Rotation.from_quat(self.quaternion) * Rotation.from_quat(other.quaternion)
        return Pose(rot.as_quat(), self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.translation) @ self.rotation


def transform_plane(p: Plane, pose: Pose) -> Plane:
    """Camera-frame plane to world frame, canonicalized."""
    n_w = pose.rotation @ p.normal
    d_w = p.offset - float(n_w @ pose.translation)
    return canonicalize(np.append(n_w, d_w))


# Camera -------------------------------------------------------------------


class Intrinsics(ConfigModel):
    """Pinhole intrinsics, no distortion."""

    fx: float = unit_field(200.0, "px", "focal length along x", gt=0)
    fy: float = unit_field(200.0, "px", "focal length along y", gt=0)
    cx: float = unit_field(160.0, "px", "principal point x", ge=0)
    cy: float = unit_field(120.0, "px", "principal point y", ge=0)
    width: int = unit_field(320, "px", "image width", gt=0)
    height: int = unit_field(240, "px", "image height", gt=0)

    @model_validator(mode="after")
    def _principal_point_inside(self) -> "Intrinsics":
        if not self.cx < self.width:
            raise ValueError(f"cx={self.cx} must be < width={self.width}")
        if not self.cy < self.height:
            raise ValueError(f"cy={self.cy} must be < height={self.height}")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def rays(self, pixels: np.ndarray) -> np.ndarray:
        px = np.asarray(pixels, dtype=float).reshape(-1, 2)
        return np.column_stack(
            [(px[:, 0] - self.cx) / self.fx, (px[:, 1] - self.cy) / self.fy, np.ones(len(px))]
        )

    def project(self, points: np.ndarray) -> np.ndarray:
        """Camera-frame points ``(N, 3)`` to pixels ``(N, 2)``."""
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.column_stack(
            [self.fx * p[:, 0] / p[:, 2] + self.cx, self.fy * p[:, 1] / p[:, 2] + self.cy]
        )


@dataclass(frozen=True)
class BBox:
    """Pixel rectangle in continuous image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BBox":
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0, y0, x1, y1)

    def as_list(self) -> list:
        return [self.x0, self.y0, self.x1, self.y1]

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def is_ordered(self) -> bool:
        return self.x0 < self.x1 and self.y0 < self.y1

    def within(self, intrinsics: Intrinsics) -> bool:
        return (
            0.0 <= self.x0 and 0.0 <= self.y0
            and self.x1 <= intrinsics.width and self.y1 <= intrinsics.height
        )

    def corners(self) -> np.ndarray:
        return np.array(
            [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
        )

    def iou(self, other: "BBox") -> float:
        iw = min(self.x1, other.x1) - max(self.x0, other.x0)
        ih = min(self.y1, other.y1) - max(self.y0, other.y0)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / (self.area + other.area - inter)

    def pixel_grid(self, stride: int = 1) -> np.ndarray:
        """Integer pixel coordinates ``(col, row)`` with x0 <= col < x1, y0 <= row < y1."""
        cols = np.arange(math.ceil(self.x0), math.ceil(self.x1), stride, dtype=float)
        rows = np.arange(math.ceil(self.y0), math.ceil(self.y1), stride, dtype=float)
        cc, rr = np.meshgrid(cols, rows)
        return np.column_stack([cc.ravel(), rr.ravel()])


def backproject_pixel(px: Sequence[float], intrinsics: Intrinsics, plane: Plane) -> np.ndarray:
    """
    Intersect the viewing ray of pixel ``px`` with a camera-frame plane.

    Raises:
        RayParallel: the ray never meets the plane.
        BehindCamera: the intersection lies behind the camera.
    """
    ray = intrinsics.rays(np.asarray(px, dtype=float))[0]
    denom = float(plane.normal @ ray)
    if abs(denom) < config.TOLERANCES.ray_parallel:
        raise RayParallel(f"pixel {tuple(px)} is parallel to {plane!r}")
    scale = -plane.offset / denom
    if scale <= 0:
        raise BehindCamera(f"pixel {tuple(px)} meets {plane!r} behind the camera")
    return scale * ray


def backproject_pixels(
    pixels: np.ndarray, intrinsics: Intrinsics, plane: Plane
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`backproject_pixel`; returns points and a validity mask."""
    rays = intrinsics.rays(pixels)
    denom = rays @ plane.normal
    valid = np.abs(denom) >= config.TOLERANCES.ray_parallel
    scale = np.zeros(len(rays))
    scale[valid] = -plane.offset / denom[valid]
    valid &= scale > 0
    return rays * scale[:, None], valid


# Planar polygons -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaneFrame:
    """Orthonormal in-plane basis; ``u x v`` equals the plane normal."""

    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    normal: np.ndarray

    @classmethod
    def for_plane(cls, plane: Plane) -> "PlaneFrame":
        n = plane.normal
        # vertical planes get v = +z
        ref = Z_AXIS if abs(n[2]) < 0.9 else X_AXIS
        u = np.cross(ref, n)
        u = u / np.linalg.norm(u)
        v = np.cross(n, u)
        return cls(_frozen(plane.point), _frozen(u), _frozen(v), plane.normal)

    def to_2d(self, points: np.ndarray) -> np.ndarray:
        rel = np.asarray(points, dtype=float).reshape(-1, 3) - self.origin
        return np.column_stack([rel @ self.u, rel @ self.v])

    def to_3d(self, uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        return self.origin + np.outer(uv[:, 0], self.u) + np.outer(uv[:, 1], self.v)


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise order."""
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    area = polygon_area(pts)
    if abs(area) < 1e-15:
        return pts.mean(axis=0)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * area)


@dataclass(frozen=True, eq=False)
class PlanarPolygon:
    """A polygon on a plane, stored as CCW 2D vertices in the plane's frame."""

    plane: Plane
    frame: PlaneFrame
    vertices: np.ndarray

    def __post_init__(self) -> None:
        uv = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if polygon_area(uv) < 0:
            uv = uv[::-1].copy()
        object.__setattr__(self, "vertices", _frozen(uv))

    @classmethod
    def from_points(cls, plane: Plane, points: np.ndarray) -> "PlanarPolygon":
        frame = PlaneFrame.for_plane(plane)
        return cls(plane, frame, frame.to_2d(points))

    @property
    def vertices3d(self) -> np.ndarray:
        return self.frame.to_3d(self.vertices)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def centroid3d(self) -> np.ndarray:
        return self.frame.to_3d(polygon_centroid(self.vertices))[0]

    def with_vertices(self, uv: np.ndarray) -> "PlanarPolygon":
        return PlanarPolygon(self.plane, self.frame, uv)

    def translated(self, shift: np.ndarray) -> "PlanarPolygon":
        """The polygon moved by ``shift``, re-expressed on its canonical plane."""
        shift = np.asarray(shift, dtype=float)
        return PlanarPolygon.from_points(
            canonicalize(self.plane.translated(shift)), self.vertices3d + shift
        )


def _dedupe(poly: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    if len(poly) < 2:
        return poly
    keep = np.linalg.norm(poly - np.roll(poly, -1, axis=0), axis=1) > eps
    return poly[keep] if keep.any() else poly[:1]


def clip_halfplane(poly: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    """Part of ``poly`` with ``a x + b y + c >= 0`` (one Sutherland-Hodgman pass)."""
    poly = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(poly) == 0:
        return poly
    values = poly @ np.array([a, b]) + c
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        vi, vj = values[i], values[j]
        if vi >= 0:
            out.append(poly[i])
        if (vi >= 0) != (vj >= 0):
            t = vi / (vi - vj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if len(out) < 3:
        return np.empty((0, 2))
    return _dedupe(np.array(out))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersection of ``subject`` with the convex polygon ``clip``."""
    clip = np.asarray(clip, dtype=float).reshape(-1, 2)
    if polygon_area(clip) < 0:
        clip = clip[::-1]
    out = np.asarray(subject, dtype=float).reshape(-1, 2)
    for i in range(len(clip)):
        p, q = clip[i], clip[(i + 1) % len(clip)]
        dx, dy = q - p
        out = clip_halfplane(out, -dy, dx, dy * p[0] - dx * p[1])
        if len(out) == 0:
            break
    return out


def split_convex(
    poly: np.ndarray, a: float, b: float, c: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Split a convex polygon by the line ``a x + b y + c = 0`` into (>=0, <=0) parts."""
    return clip_halfplane(poly, a, b, c), clip_halfplane(poly, -a, -b, -c)


def _uv(polygon: Union[PlanarPolygon, np.ndarray]) -> np.ndarray:
    if isinstance(polygon, PlanarPolygon):
        return polygon.vertices
    return np.asarray(polygon, dtype=float).reshape(-1, 2)


def polygon_intersection_area(
    a: Union[PlanarPolygon, np.ndarray], b: Union[PlanarPolygon, np.ndarray]
) -> float:
    """Area of the intersection of two convex polygons given in one 2D frame."""
    return abs(polygon_area(clip_convex(_uv(a), _uv(b))))


def project_patch(src: PlanarPolygon, dst: PlanarPolygon) -> PlanarPolygon:
    """
    Orthogonally project ``src`` onto ``dst``'s plane, in ``dst``'s frame.

    Raises:
        NearPerpendicular: the planes' normals are more than the configured
            maximum angle apart (normal orientation is ignored).
    """
    cos = abs(float(src.plane.normal @ dst.plane.normal))
    limit = math.cos(math.radians(config.TOLERANCES.max_projection_angle_deg))
    if cos < limit - 1e-12:
        raise NearPerpendicular(
            f"patch normals {math.degrees(math.acos(min(1.0, cos))):.1f} deg apart"
        )
    return PlanarPolygon(dst.plane, dst.frame, dst.frame.to_2d(src.vertices3d))


def bbox_to_patch(bbox: BBox, intrinsics: Intrinsics, plane: Plane) -> PlanarPolygon:
    """
    Back-project the four bbox corners onto ``plane`` (camera frame).

    Raises:
        RayParallel, BehindCamera: from back-projection of a corner.
        DegeneratePatch: the resulting quadrilateral has (near) zero area.
    """
    corners = np.array([backproject_pixel(c, intrinsics, plane) for c in bbox.corners()])
    patch = PlanarPolygon.from_points(plane, corners)
    if patch.area < config.TOLERANCES.min_patch_area:
        raise DegeneratePatch(f"bbox {bbox.as_list()} back-projects to zero area")
    return patch


# 2D predicates --------------------------------------------------------------


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c) -> bool:
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    eps = 1e-12
    return (
        (abs(d1) < eps and on_segment(q1, q2, p1))
        or (abs(d2) < eps and on_segment(q1, q2, p2))
        or (abs(d3) < eps and on_segment(p1, p2, q1))
        or (abs(d4) < eps and on_segment(p1, p2, q2))
    )


def is_simple_polygon(vertices: np.ndarray) -> bool:
    """True if no two non-adjacent edges touch."""
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


def point_in_polygon(point: Sequence[float], vertices: np.ndarray) -> bool:
    """Even-odd rule; points on the boundary may land either way."""
    x, y = float(point[0]), float(point[1])
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    inside = False
    j = len(pts) - 1
    for i in range(len(pts)):
        xi, yi = pts[i]
        xj, yj = pts[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def distance_to_polygon_boundary(point: Sequence[float], vertices: np.ndarray) -> float:
    p = np.asarray(point, dtype=float)
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    best = math.inf
    for i in range(len(pts)):
        a, b = pts[i], pts[(i + 1) % len(pts)]
        ab = b - a
        t = float(np.clip(np.dot(p - a, ab) / max(float(np.dot(ab, ab)), 1e-300), 0.0, 1.0))
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
    return best
