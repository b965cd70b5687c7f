"""
Per-frame plane detections with camera poses.

File formats:
    * measurements (``.jsonl``), one record per line::

        {"frame": 12, "class": "wall", "score": 0.97, "bbox": [x0, y0, x1, y1], "plane": [nx, ny, nz, d]}

    * poses (``.traj``), one camera-to-world pose per line, ``#`` starts a comment::

        12 tx ty tz qx qy qz qw

Floats are written with ``repr`` and parsed with ``float``, so a save/load
round trip is bit-exact and independent of the process locale.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from planefusion.errors import (
    ConfigError,
    GeometryError,
    InvariantViolation,
    MissingPose,
    ParseError,
)
from planefusion.geometry import (
    BBox,
    Intrinsics,
    PlanarPolygon,
    Plane,
    Pose,
    bbox_to_patch,
    canonicalize,
    transform_plane,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class SurfaceClass(str, Enum):
    WALL = "wall"
    FLOOR_CEILING = "floor_ceiling"


class MeasurementRecord(BaseModel):
    """Schema of one line of a measurement file."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    frame: int
    klass: SurfaceClass = Field(alias="class")
    score: float = 1.0
    bbox: List[float] = Field(min_length=4, max_length=4)
    plane: List[float] = Field(min_length=4, max_length=4)


@dataclass(frozen=True, eq=False)
class Measurement:
    frame_id: int
    klass: SurfaceClass
    bbox: BBox
    plane_cam: Plane
    score: float = 1.0

    @classmethod
    def from_record(cls, record: MeasurementRecord) -> "Measurement":
        return cls(
            frame_id=record.frame,
            klass=record.klass,
            bbox=BBox.from_list(record.bbox),
            plane_cam=canonicalize(record.plane),
            score=record.score,
        )

    def to_record(self) -> dict:
        return {
            "frame": int(self.frame_id),
            "class": self.klass.value,
            "score": float(self.score),
            "bbox": [float(v) for v in self.bbox.as_list()],
            "plane": [float(v) for v in self.plane_cam.vector],
        }

    def check(self, intrinsics: Optional[Intrinsics] = None) -> None:
        """
        Validate the domain invariants of this record.

        Raises:
            InvariantViolation: naming the first violated invariant.
        """
        record = self.to_record()
        if self.frame_id <= 0:
            raise InvariantViolation(record, "frame id must be positive")
        if not 0.0 <= self.score <= 1.0:
            raise InvariantViolation(record, "score outside [0, 1]")
        if not self.bbox.is_ordered:
            raise InvariantViolation(record, "bbox must satisfy x0 < x1 and y0 < y1")
        if intrinsics is not None and not self.bbox.within(intrinsics):
            raise InvariantViolation(record, "bbox outside the image")
        if not self.plane_cam.is_canonical:
            raise InvariantViolation(record, "plane is not canonical")


@dataclass(frozen=True, eq=False)
class GlobalMeasurement:
    """A measurement lifted into the world frame."""

    source: Measurement
    plane_world: Plane
    patch_world: PlanarPolygon

    @property
    def frame_id(self) -> int:
        return self.source.frame_id

    @property
    def klass(self) -> SurfaceClass:
        return self.source.klass

    def translated(self, shift: np.ndarray) -> "GlobalMeasurement":
        """Same measurement in a world frame whose geometry is moved by ``shift``."""
        patch = self.patch_world.translated(shift)
        return GlobalMeasurement(self.source, patch.plane, patch)


@dataclass
class SequenceBundle:
    intrinsics: Intrinsics
    poses: Dict[int, Pose]
    measurements: List[Measurement] = field(default_factory=list)

    def validate(self) -> None:
        for frame_id in self.poses:
            if frame_id <= 0:
                raise InvariantViolation({"frame": frame_id}, "frame id must be positive")
        for m in self.measurements:
            m.check(self.intrinsics)
            if m.frame_id not in self.poses:
                raise MissingPose(m.frame_id)

    def camera_centroid(self) -> np.ndarray:
        if not self.poses:
            return np.zeros(3)
        return np.mean([p.translation for p in self.poses.values()], axis=0)


@dataclass
class DropReport:
    """Counts of measurements discarded while lifting, keyed by error code."""

    counts: Counter = field(default_factory=Counter)

    def record(self, reason: str) -> None:
        self.counts[reason] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> Dict[str, int]:
        return dict(sorted(self.counts.items()))


# Reading -------------------------------------------------------------------


def _parse_measurement_line(text: str, lineno: int, source: str) -> Measurement:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON: {exc.msg}", source) from exc
    try:
        record = MeasurementRecord.model_validate(payload)
    except ValidationError as exc:
        reason = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ParseError(lineno, reason, source) from exc
    if not all(math.isfinite(v) for v in [record.score, *record.bbox, *record.plane]):
        raise ParseError(lineno, "non-finite number", source)
    try:
        return Measurement.from_record(record)
    except GeometryError as exc:
        raise InvariantViolation(payload, str(exc)) from exc


def read_measurements(path: PathLike) -> List[Measurement]:
    """
    Parse a measurement file.

    Raises:
        ParseError: malformed line, with its 1-based line number.
        InvariantViolation: a record that parses but breaks a domain rule.
    """
    out: List[Measurement] = []
    source = str(path)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            m = _parse_measurement_line(text, lineno, source)
            m.check()
            out.append(m)
    logger.debug("read %d measurements from %s", len(out), source)
    return out


def read_poses(path: PathLike) -> Dict[int, Pose]:
    """
    Parse a trajectory file.

    Raises:
        ParseError: wrong field count, bad number, non-positive or repeated frame id.
    """
    poses: Dict[int, Pose] = {}
    source = str(path)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 8:
                raise ParseError(lineno, f"expected 8 fields, got {len(parts)}", source)
            try:
                frame_id = int(parts[0])
                values = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise ParseError(lineno, str(exc), source) from exc
            if frame_id <= 0:
                raise ParseError(lineno, f"frame id {frame_id} must be positive", source)
            if frame_id in poses:
                raise ParseError(lineno, f"duplicate frame id {frame_id}", source)
            if not all(math.isfinite(v) for v in values):
                raise ParseError(lineno, "non-finite number", source)
            try:
                poses[frame_id] = Pose(np.array(values[3:]), np.array(values[:3]))
            except GeometryError as exc:
                raise ParseError(lineno, str(exc), source) from exc
    return poses


def load_sequence(
    measurement_path: PathLike, pose_path: PathLike, intrinsics: Intrinsics
) -> SequenceBundle:
    """Load and fully validate a measurement file plus its trajectory."""
    bundle = SequenceBundle(
        intrinsics=intrinsics,
        poses=read_poses(pose_path),
        measurements=read_measurements(measurement_path),
    )
    bundle.validate()
    logger.info(
        "loaded %d measurements over %d poses", len(bundle.measurements), len(bundle.poses)
    )
    return bundle


# Writing -------------------------------------------------------------------


def write_measurements(path: PathLike, measurements: Iterable[Measurement]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in measurements:
            f.write(json.dumps(m.to_record()) + "\n")


def write_poses(path: PathLike, poses: Dict[int, Pose]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# frame tx ty tz qx qy qz qw (camera to world)\n")
        for frame_id in sorted(poses):
            pose = poses[frame_id]
            values = [*pose.translation, *pose.quaternion]
            f.write(f"{frame_id} " + " ".join(repr(float(v)) for v in values) + "\n")


def save_sequence(bundle: SequenceBundle, measurement_path: PathLike, pose_path: PathLike) -> None:
    """Inverse of :func:`load_sequence` (intrinsics are stored in the config file)."""
    write_measurements(measurement_path, bundle.measurements)
    write_poses(pose_path, bundle.poses)


# Lifting and filtering -----------------------------------------------------


def lift_measurement(m: Measurement, pose: Pose, intrinsics: Intrinsics) -> GlobalMeasurement:
    """
    Back-project one measurement and move it into the world frame.

    Raises:
        GeometryError: the bbox corners cannot be back-projected onto the plane.
    """
    patch_cam = bbox_to_patch(m.bbox, intrinsics, m.plane_cam)
    plane_world = transform_plane(m.plane_cam, pose)
    patch_world = PlanarPolygon.from_points(plane_world, pose.apply(patch_cam.vertices3d))
    return GlobalMeasurement(m, plane_world, patch_world)


def lift_to_world(bundle: SequenceBundle) -> Tuple[List[GlobalMeasurement], DropReport]:
    """
    Lift every measurement of ``bundle``; failures are dropped and counted.

    Output is ordered by frame id, then input order.
    """
    report = DropReport()
    lifted: List[GlobalMeasurement] = []
    ordered = sorted(enumerate(bundle.measurements), key=lambda item: (item[1].frame_id, item[0]))
    for _, m in ordered:
        pose = bundle.poses.get(m.frame_id)
        if pose is None:
            raise MissingPose(m.frame_id)
        try:
            lifted.append(lift_measurement(m, pose, bundle.intrinsics))
        except GeometryError as exc:
            logger.debug("dropping frame %d measurement: %s", m.frame_id, exc)
            report.record(exc.code)
    if report.total:
        logger.warning("dropped %d measurements while lifting: %s", report.total, report.as_dict())
    return lifted, report


def grazing_angle_deg(m: Union[Measurement, GlobalMeasurement]) -> float:
    """Angle between the camera-frame plane normal and the optical axis, folded to [0, 90]."""
    source = m.source if isinstance(m, GlobalMeasurement) else m
    cos = min(1.0, abs(float(source.plane_cam.normal[2])))
    return math.degrees(math.acos(cos))


def filter_grazing(
    measurements: Sequence[GlobalMeasurement], min_angle_deg: float = 30.0
) -> List[GlobalMeasurement]:
    """Keep measurements seen at least ``min_angle_deg`` away from edge-on."""
    if not 0.0 < min_angle_deg < 90.0:
        raise ConfigError(f"min_angle_deg must be in (0, 90), got {min_angle_deg}")
    limit = 90.0 - min_angle_deg
    kept = [m for m in measurements if grazing_angle_deg(m) <= limit]
    logger.debug("grazing filter kept %d of %d", len(kept), len(measurements))
    return kept


def split_by_class(
    measurements: Sequence[GlobalMeasurement],
) -> Tuple[List[GlobalMeasurement], List[GlobalMeasurement]]:
    walls = [m for m in measurements if m.klass is SurfaceClass.WALL]
    horizontal = [m for m in measurements if m.klass is SurfaceClass.FLOOR_CEILING]
    return walls, horizontal


__all__ = [
    "DropReport",
    "GlobalMeasurement",
    "Measurement",
    "MeasurementRecord",
    "SequenceBundle",
    "SurfaceClass",
    "filter_grazing",
    "lift_measurement",
    "lift_to_world",
    "load_sequence",
    "read_measurements",
    "read_poses",
    "save_sequence",
    "split_by_class",
    "write_measurements",
    "write_poses",
]
