"""
Synthetic rooms, camera trajectories and noisy per-frame plane measurements.

A room is a simple footprint polygon extruded from ``floor_z`` by ``height``.
Wall normals point into the room. Every frame draws its noise from its own
generator seeded with ``(seed, frame_id)``, so output does not depend on frame
processing order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import field_validator

from planefusion.candidates import SceneBounds
from planefusion.config import ConfigModel, unit_field
from planefusion.errors import CameraOutsideRoom, InvalidFootprint
from planefusion.geometry import (
    BBox,
    Intrinsics,
    PlanarPolygon,
    Plane,
    Pose,
    canonicalize,
    clip_convex,
    distance_to_polygon_boundary,
    is_simple_polygon,
    point_in_polygon,
    polygon_area,
    polygon_centroid,
    transform_plane,
)
from planefusion.layout import RoomLayout
from planefusion.measurements import Measurement, SequenceBundle, SurfaceClass

logger = logging.getLogger(__name__)

NEAR_CLIP_M = 0.05
MIN_VISIBLE_AREA_PX = 100.0
SPURIOUS_SURFACE = -1


def normalize_footprint(points: Sequence[Sequence[float]]) -> List[Tuple[float, float]]:
    """
    Counter-clockwise footprint with duplicate points and collinear vertices removed.

    Raises:
        InvalidFootprint: fewer than three corners, self-intersection or area below 1 m^2.
    """
    pts = [np.asarray(p, dtype=float).reshape(2) for p in points]
    if len(pts) < 3:
        raise InvalidFootprint(f"footprint needs at least 3 vertices, got {len(pts)}")
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for i in range(len(pts)):
            prev, cur, nxt = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            a, b = cur - prev, nxt - cur
            la, lb = np.linalg.norm(a), np.linalg.norm(b)
            if la < 1e-9:
                del pts[i]
                changed = True
                break
            cross = a[0] * b[1] - a[1] * b[0]
            if lb > 1e-9 and abs(cross) <= 1e-9 * la * lb:
                if float(a @ b) < 0:
                    raise InvalidFootprint("footprint folds back on itself")
                del pts[i]
                changed = True
                break
    if len(pts) < 3:
        raise InvalidFootprint("footprint is degenerate")
    arr = np.array(pts)
    if not is_simple_polygon(arr):
        raise InvalidFootprint("footprint is self-intersecting")
    area = polygon_area(arr)
    if abs(area) < 1.0:
        raise InvalidFootprint(f"footprint area {abs(area):.3f} m^2 is below 1 m^2")
    if area < 0:
        arr = arr[::-1]
    return [(float(x), float(y)) for x, y in arr]


class RoomSpec(ConfigModel):
    """Extruded floor plan."""

    footprint: List[Tuple[float, float]] = [(1.0, 1.0), (5.0, 1.0), (5.0, 5.0), (1.0, 5.0)]
    floor_z: float = unit_field(0.0, "m", "floor height")
    height: float = unit_field(2.5, "m", "floor to ceiling", gt=1.5, lt=5.0)

    @field_validator("footprint")
    @classmethod
    def _normalize(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        return normalize_footprint(value)

    @property
    def polygon(self) -> np.ndarray:
        return np.array(self.footprint, dtype=float)

    @property
    def ceiling_z(self) -> float:
        return self.floor_z + self.height


class NoiseSpec(ConfigModel):
    sigma_normal_deg: float = unit_field(0.0, "deg", "normal perturbation scale", ge=0)
    sigma_d_m: float = unit_field(0.0, "m", "plane offset noise", ge=0)
    sigma_bbox_px: float = unit_field(0.0, "px", "bbox corner jitter", ge=0)
    p_dropout: float = unit_field(0.0, "probability", "chance a visible surface is missed", ge=0, le=1)
    p_spurious: float = unit_field(0.0, "probability", "chance of one spurious detection per frame", ge=0, le=1)
    heavy_tail_dof: Optional[float] = unit_field(
        None, "1", "Student-t degrees of freedom for angle/offset noise (Gaussian if unset)", gt=0
    )


class TrajectoryMode(str, Enum):
    ORBIT = "orbit"
    RANDOM_WALK = "random_walk"


class TrajectorySpec(ConfigModel):
    mode: TrajectoryMode = TrajectoryMode.ORBIT
    frames: int = unit_field(200, "frames", "number of frames", ge=1)
    seed: int = unit_field(1, "1", "random seed")
    eye_height: float = unit_field(1.5, "m", "camera height above the floor", gt=0)
    center: Optional[Tuple[float, float]] = unit_field(None, "m", "orbit centre (footprint centroid if unset)")
    radius: Optional[float] = unit_field(None, "m", "orbit radius (derived from the footprint if unset)", ge=0)
    pitch_deg: float = unit_field(-35.0, "deg", "camera pitch, positive up", ge=-80, le=80)
    alternate_pitch: bool = unit_field(True, "1", "flip the pitch sign on odd frames")
    step_m: float = unit_field(0.1, "m", "random-walk step length", gt=0)
    yaw_rate_deg: float = unit_field(7.0, "deg", "random-walk heading spin per frame")


@dataclass(frozen=True, eq=False)
class SurfaceTruth:
    surface_id: int
    klass: SurfaceClass
    name: str
    plane: Plane
    extent: np.ndarray

    def as_dict(self) -> dict:
        return {
            "id": self.surface_id,
            "name": self.name,
            "class": self.klass.value,
            "plane": self.plane.vector.tolist(),
            "extent": self.extent.tolist(),
        }


@dataclass
class GroundTruth:
    surfaces: List[SurfaceTruth]
    # surface id per measurement of the bundle; -1 for spurious detections
    surface_ids: List[int] = field(default_factory=list)
    visibility: Dict[int, List[int]] = field(default_factory=dict)
    clean_measurements: List[Measurement] = field(default_factory=list)

    @property
    def walls(self) -> List[SurfaceTruth]:
        return [s for s in self.surfaces if s.klass is SurfaceClass.WALL]

    def as_dict(self) -> dict:
        return {
            "surfaces": [s.as_dict() for s in self.surfaces],
            "surface_ids": list(self.surface_ids),
            "visibility": {str(k): v for k, v in sorted(self.visibility.items())},
        }


@dataclass(frozen=True, eq=False)
class RoomPlanes:
    walls: List[Plane]
    wall_extents: List[np.ndarray]
    floor: Plane
    ceiling: Plane


def room_planes(room: RoomSpec) -> RoomPlanes:
    """Inward-facing wall planes with their rectangles, plus floor and ceiling."""
    fp = room.polygon
    z0, z1 = room.floor_z, room.ceiling_z
    walls, extents = [], []
    for i in range(len(fp)):
        p, q = fp[i], fp[(i + 1) % len(fp)]
        e = (q - p) / np.linalg.norm(q - p)
        n = np.array([-e[1], e[0], 0.0])
        walls.append(Plane(n, -float(n[:2] @ p)))
        extents.append(np.array([[p[0], p[1], z0], [q[0], q[1], z0], [q[0], q[1], z1], [p[0], p[1], z1]]))
    floor = Plane(np.array([0.0, 0.0, 1.0]), -z0)
    ceiling = Plane(np.array([0.0, 0.0, -1.0]), z1)
    return RoomPlanes(walls, extents, floor, ceiling)


def room_surfaces(room: RoomSpec) -> List[SurfaceTruth]:
    planes = room_planes(room)
    fp = room.polygon
    surfaces = [
        SurfaceTruth(i, SurfaceClass.WALL, f"wall_{i}", plane, extent)
        for i, (plane, extent) in enumerate(zip(planes.walls, planes.wall_extents))
    ]
    n = len(surfaces)
    floor_extent = np.column_stack([fp, np.full(len(fp), room.floor_z)])
    ceiling_extent = np.column_stack([fp, np.full(len(fp), room.ceiling_z)])
    surfaces.append(SurfaceTruth(n, SurfaceClass.FLOOR_CEILING, "floor", planes.floor, floor_extent))
    surfaces.append(SurfaceTruth(n + 1, SurfaceClass.FLOOR_CEILING, "ceiling", planes.ceiling, ceiling_extent))
    return surfaces


def room_bounds(room: RoomSpec) -> SceneBounds:
    fp = room.polygon
    lo = np.append(fp.min(axis=0), room.floor_z)
    hi = np.append(fp.max(axis=0), room.ceiling_z)
    return SceneBounds(lo, hi)


def ground_truth_layout(room: RoomSpec) -> RoomLayout:
    planes = room_planes(room)
    walls = [PlanarPolygon.from_points(p, ext) for p, ext in zip(planes.walls, planes.wall_extents)]
    return RoomLayout(
        walls=walls,
        floor=canonicalize(planes.floor),
        ceiling=canonicalize(planes.ceiling),
        bounds=room_bounds(room),
        wall_clusters=tuple(range(len(walls))),
    )


# Trajectories --------------------------------------------------------------


def _default_center(room: RoomSpec) -> np.ndarray:
    return polygon_centroid(room.polygon)


def _default_radius(room: RoomSpec, center: np.ndarray) -> float:
    return 0.5 * distance_to_polygon_boundary(center, room.polygon)


def _segment_inside(a: np.ndarray, b: np.ndarray, fp: np.ndarray, clearance: float) -> bool:
    steps = max(2, int(math.ceil(np.linalg.norm(b - a) / 0.05)))
    for t in np.linspace(0.0, 1.0, steps + 1):
        p = a + t * (b - a)
        if not point_in_polygon(p, fp) or distance_to_polygon_boundary(p, fp) < clearance:
            return False
    return True


def _random_walk(room: RoomSpec, traj: TrajectorySpec, start: np.ndarray) -> List[Tuple[np.ndarray, float]]:
    fp = room.polygon
    rng = np.random.default_rng([traj.seed, 0])
    lo, hi = fp.min(axis=0), fp.max(axis=0)
    clearance = 0.3
    position = start.copy()
    target = position
    out: List[Tuple[np.ndarray, float]] = []
    heading = 0.0
    for k in range(traj.frames):
        for _ in range(1000):
            if np.linalg.norm(target - position) > 1e-9:
                break
            candidate = rng.uniform(lo, hi)
            if _segment_inside(position, candidate, fp, clearance):
                target = candidate
        delta = target - position
        dist = float(np.linalg.norm(delta))
        if dist > 1e-9:
            heading = math.degrees(math.atan2(delta[1], delta[0]))
            position = target if dist <= traj.step_m else position + delta * (traj.step_m / dist)
        out.append((position.copy(), heading + traj.yaw_rate_deg * k))
    return out


def camera_poses(room: RoomSpec, traj: TrajectorySpec) -> Dict[int, Pose]:
    """
    Camera-to-world poses for frames ``1..frames``.

    Raises:
        CameraOutsideRoom: a camera position is not strictly inside the room.
    """
    center = np.array(traj.center, dtype=float) if traj.center is not None else _default_center(room)
    if traj.mode is TrajectoryMode.ORBIT:
        radius = traj.radius if traj.radius is not None else _default_radius(room, center)
        path = []
        for k in range(traj.frames):
            theta = 2.0 * math.pi * k / traj.frames
            pos = center + radius * np.array([math.cos(theta), math.sin(theta)])
            path.append((pos, math.degrees(theta)))
    else:
        path = _random_walk(room, traj, center)

    if not 0.0 < traj.eye_height < room.height:
        raise CameraOutsideRoom(f"eye height {traj.eye_height} m is outside the room height")
    poses: Dict[int, Pose] = {}
    for k, (pos, yaw) in enumerate(path):
        if not point_in_polygon(pos, room.polygon) or distance_to_polygon_boundary(pos, room.polygon) < 1e-6:
            raise CameraOutsideRoom(f"frame {k + 1}: camera at {pos.tolist()} is outside the footprint")
        pitch = traj.pitch_deg if not (traj.alternate_pitch and k % 2) else -traj.pitch_deg
        eye = np.array([pos[0], pos[1], room.floor_z + traj.eye_height])
        poses[k + 1] = Pose.look_at(eye, yaw, pitch)
    return poses


# Visibility and noise ------------------------------------------------------


def _clip_3d(points: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Part of a planar 3D polygon with ``normal . x + offset >= 0``."""
    values = points @ normal + offset
    out = []
    n = len(points)
    for i in range(n):
        j = (i + 1) % n
        if values[i] >= 0:
            out.append(points[i])
        if (values[i] >= 0) != (values[j] >= 0):
            t = values[i] / (values[i] - values[j])
            out.append(points[i] + t * (points[j] - points[i]))
    return np.array(out).reshape(-1, 3)


def visible_bbox(extent_world: np.ndarray, pose: Pose, intrinsics: Intrinsics) -> Optional[BBox]:
    """Image bbox of a surface's visible part, or None when it covers < 100 px^2."""
    cam = pose.apply_inverse(extent_world)
    cam = _clip_3d(cam, np.array([0.0, 0.0, 1.0]), -NEAR_CLIP_M)
    if len(cam) < 3:
        return None
    pixels = intrinsics.project(cam)
    w, h = intrinsics.width, intrinsics.height
    image = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    clipped = clip_convex(pixels, image)
    if len(clipped) < 3 or abs(polygon_area(clipped)) < MIN_VISIBLE_AREA_PX:
        return None
    lo = np.clip(clipped.min(axis=0), 0.0, [w, h])
    hi = np.clip(clipped.max(axis=0), 0.0, [w, h])
    return BBox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def _angle_noise(rng: np.random.Generator, noise: NoiseSpec) -> Tuple[float, float]:
    if noise.heavy_tail_dof is not None:
        draw_a = float(rng.standard_t(noise.heavy_tail_dof))
        draw_d = float(rng.standard_t(noise.heavy_tail_dof))
    else:
        draw_a = float(rng.standard_normal())
        draw_d = float(rng.standard_normal())
    return abs(draw_a) * noise.sigma_normal_deg, draw_d * noise.sigma_d_m


def perturb_plane(plane: Plane, rng: np.random.Generator, noise: NoiseSpec) -> Plane:
    """Rotate the normal about a random perpendicular axis and shift the offset."""
    axis = rng.standard_normal(3)
    angle_deg, d_shift = _angle_noise(rng, noise)
    n = plane.normal
    axis = axis - (axis @ n) * n
    norm = float(np.linalg.norm(axis))
    axis = axis / norm if norm > 1e-12 else np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
    axis = axis / np.linalg.norm(axis)
    a = math.radians(angle_deg)
    rotated = n * math.cos(a) + np.cross(axis, n) * math.sin(a)
    return canonicalize(np.append(rotated, plane.offset + d_shift))


def jitter_bbox(
    bbox: BBox, rng: np.random.Generator, sigma_px: float, intrinsics: Intrinsics
) -> Optional[BBox]:
    shifts = rng.standard_normal(4) * sigma_px
    x0, x1 = sorted(np.clip([bbox.x0 + shifts[0], bbox.x1 + shifts[2]], 0.0, intrinsics.width))
    y0, y1 = sorted(np.clip([bbox.y0 + shifts[1], bbox.y1 + shifts[3]], 0.0, intrinsics.height))
    if x1 - x0 < 1.0 or y1 - y0 < 1.0:
        return None
    return BBox(float(x0), float(y0), float(x1), float(y1))


def _spurious(
    frame_id: int, pose: Pose, bounds: SceneBounds, intrinsics: Intrinsics, rng: np.random.Generator
) -> Measurement:
    normal = rng.standard_normal(3)
    normal /= np.linalg.norm(normal)
    point = rng.uniform(bounds.lo, bounds.hi)
    plane_cam = transform_plane(Plane(normal, -float(normal @ point)), pose.inverse())
    w, h = intrinsics.width, intrinsics.height
    x0, y0 = rng.uniform([0.0, 0.0], [0.7 * w, 0.7 * h])
    x1, y1 = rng.uniform([x0 + 0.1 * w, y0 + 0.1 * h], [w, h])
    klass = SurfaceClass.WALL if rng.uniform() < 0.5 else SurfaceClass.FLOOR_CEILING
    return Measurement(frame_id, klass, BBox(float(x0), float(y0), float(x1), float(y1)), plane_cam)


def generate_sequence(
    room: RoomSpec,
    traj: TrajectorySpec,
    intrinsics: Intrinsics,
    noise: NoiseSpec,
    seed: Optional[int] = None,
) -> Tuple[SequenceBundle, GroundTruth]:
    """
    Noisy measurements of every visible room surface for every frame.

    Raises:
        CameraOutsideRoom: from :func:`camera_poses`.
    """
    seed = traj.seed if seed is None else seed
    poses = camera_poses(room, traj)
    surfaces = room_surfaces(room)
    bounds = room_bounds(room)
    truth = GroundTruth(surfaces=surfaces)
    measurements: List[Measurement] = []
    for frame_id, pose in poses.items():
        rng = np.random.default_rng([seed, frame_id])
        visible: List[int] = []
        for surface in surfaces:
            bbox = visible_bbox(surface.extent, pose, intrinsics)
            if bbox is None:
                continue
            visible.append(surface.surface_id)
            plane_cam = transform_plane(surface.plane, pose.inverse())
            truth.clean_measurements.append(Measurement(frame_id, surface.klass, bbox, plane_cam))
            noisy_plane = perturb_plane(plane_cam, rng, noise)
            noisy_bbox = jitter_bbox(bbox, rng, noise.sigma_bbox_px, intrinsics)
            dropped = rng.uniform() < noise.p_dropout
            if dropped or noisy_bbox is None:
                continue
            measurements.append(Measurement(frame_id, surface.klass, noisy_bbox, noisy_plane))
            truth.surface_ids.append(surface.surface_id)
        truth.visibility[frame_id] = visible
        if rng.uniform() < noise.p_spurious:
            measurements.append(_spurious(frame_id, pose, bounds, intrinsics, rng))
            truth.surface_ids.append(SPURIOUS_SURFACE)
    bundle = SequenceBundle(intrinsics=intrinsics, poses=poses, measurements=measurements)
    logger.info(
        "synthesised %d measurements over %d frames (%d surfaces)",
        len(measurements), len(poses), len(surfaces),
    )
    return bundle, truth
