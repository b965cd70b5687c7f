"""
Candidate wall segments from plane intersections, and the floor/ceiling rule.

Every accepted wall plane is clipped to the scene box, then to the band between
floor and ceiling, then split by the intersection line of every other
non-parallel wall plane. The resulting convex cells are the candidates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from planefusion import config
from planefusion.clustering import PlaneCluster
from planefusion.errors import (
    AmbiguousNormal,
    DegenerateBounds,
    EmptyArrangement,
    NoHorizontalCluster,
    NoMeasurements,
)
from planefusion.geometry import (
    Z_AXIS,
    PlanarPolygon,
    Plane,
    PlaneFrame,
    canonicalize,
    clip_halfplane,
    polygon_area,
    polygon_centroid,
    split_convex,
)
from planefusion.measurements import GlobalMeasurement

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SceneBounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float).reshape(3))

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.extent <= 0))

    def contains(self, points: np.ndarray, eps: float = 1e-9) -> bool:
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return bool(np.all(p >= self.lo - eps) and np.all(p <= self.hi + eps))

    def inflated(self, margin: float) -> "SceneBounds":
        return SceneBounds(self.lo - margin, self.hi + margin)

    def translated(self, shift: np.ndarray) -> "SceneBounds":
        return SceneBounds(self.lo + shift, self.hi + shift)

    def halfspaces(self) -> List[Tuple[np.ndarray, float]]:
        """The six faces as ``(n, d)`` with ``n . x + d >= 0`` inside."""
        faces = []
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1.0
            faces.append((e, -self.lo[axis]))
            faces.append((-e, self.hi[axis]))
        return faces

    def as_dict(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class CandidateSegment:
    cluster_id: int
    cell_index: int
    polygon: PlanarPolygon
    energy: float = 0.0
    raw_energy: float = 0.0
    inliers: int = 0
    voters_total: int = 0
    accepted: bool = False

    @property
    def plane(self) -> Plane:
        return self.polygon.plane

    @property
    def area(self) -> float:
        return self.polygon.area

    def with_vote(self, **fields) -> "CandidateSegment":
        return replace(self, **fields)


def scene_bounds(measurements: Sequence[GlobalMeasurement], margin: float = 0.5) -> SceneBounds:
    """Axis-aligned box around every patch vertex, inflated by ``margin``."""
    if not measurements:
        raise NoMeasurements("cannot bound an empty measurement set")
    points = np.vstack([m.patch_world.vertices3d for m in measurements])
    return SceneBounds(points.min(axis=0) - margin, points.max(axis=0) + margin)


def extend_bounds_to_band(
    bounds: SceneBounds, floor: Plane, ceiling: Plane, margin: float = 0.1
) -> SceneBounds:
    """Grow the vertical range so it reaches the floor and ceiling over the box footprint."""
    lo, hi = bounds.lo.copy(), bounds.hi.copy()
    xy = np.array(
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    )
    for plane in (floor, ceiling):
        n = plane.normal
        if abs(n[2]) < 0.5:
            continue
        z = -(xy @ n[:2] + plane.offset) / n[2]
        lo[2] = min(lo[2], float(z.min()) - margin)
        hi[2] = max(hi[2], float(z.max()) + margin)
    return SceneBounds(lo, hi)


def _restrict(normal: np.ndarray, offset: float, frame: PlaneFrame) -> Tuple[float, float, float]:
    """Half-space ``n . x + d >= 0`` expressed in a plane's 2D frame."""
    return (
        float(normal @ frame.u),
        float(normal @ frame.v),
        float(normal @ frame.origin + offset),
    )


def _inside_sign(plane: Plane, other: Plane, fallback: float) -> float:
    value = float(plane.signed_distance(other.point))
    if abs(value) > 1e-9:
        return math.copysign(1.0, value)
    return math.copysign(1.0, fallback)


def base_polygon(plane: Plane, bounds: SceneBounds) -> PlanarPolygon:
    """The (possibly empty) convex polygon ``plane`` cuts out of ``bounds``."""
    frame = PlaneFrame.for_plane(plane)
    center = frame.to_2d(bounds.center)[0]
    half = float(np.linalg.norm(bounds.extent)) + 1.0
    square = center + half * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    poly = square
    for n, d in bounds.halfspaces():
        poly = clip_halfplane(poly, *_restrict(n, d, frame))
        if len(poly) == 0:
            break
    return PlanarPolygon(plane, frame, poly)


def clip_to_band(polygon: PlanarPolygon, floor: Plane, ceiling: Plane) -> PlanarPolygon:
    """Part of ``polygon`` between the floor and the ceiling."""
    frame = polygon.frame
    poly = polygon.vertices
    s_floor = _inside_sign(floor, ceiling, floor.normal[2])
    s_ceil = _inside_sign(ceiling, floor, -ceiling.normal[2])
    for plane, sign in ((floor, s_floor), (ceiling, s_ceil)):
        a, b, c = _restrict(sign * plane.normal, sign * plane.offset, frame)
        poly = clip_halfplane(poly, a, b, c)
    return polygon.with_vertices(poly.reshape(-1, 2))


def _cuts_each_other(p: Plane, q: Plane) -> bool:
    cos = min(1.0, abs(float(p.normal @ q.normal)))
    return math.degrees(math.acos(cos)) >= config.TOLERANCES.cut_parallel_deg


def wall_cells(
    plane: Plane, others: Sequence[Plane], floor: Plane, ceiling: Plane, bounds: SceneBounds
) -> List[PlanarPolygon]:
    """Convex cells of one wall plane, sorted by centroid."""
    band = clip_to_band(base_polygon(plane, bounds), floor, ceiling)
    if len(band.vertices) < 3 or band.area < config.TOLERANCES.min_cell_area:
        return []
    frame = band.frame
    cells = [band.vertices]
    for q in others:
        if not _cuts_each_other(plane, q):
            continue
        a, b, c = _restrict(q.normal, q.offset, frame)
        split: List[np.ndarray] = []
        for cell in cells:
            for piece in split_convex(cell, a, b, c):
                if len(piece) >= 3 and polygon_area(piece) >= config.TOLERANCES.min_cell_area:
                    split.append(piece)
        cells = split
    cells.sort(key=lambda cell: tuple(np.round(polygon_centroid(cell), 9)))
    return [PlanarPolygon(plane, frame, cell) for cell in cells]


def generate_candidates(
    room_planes: Sequence[Plane],
    floor: Plane,
    ceiling: Plane,
    bounds: SceneBounds,
    cluster_ids: Optional[Sequence[int]] = None,
) -> List[CandidateSegment]:
    """
    Candidate segments for every wall plane, concatenated in input order.

    Raises:
        DegenerateBounds: the box has zero extent along some axis.
        EmptyArrangement: no wall plane crosses the box between floor and ceiling.
    """
    if not room_planes:
        raise EmptyArrangement("no wall planes to intersect")
    if bounds.is_degenerate:
        raise DegenerateBounds(f"scene bounds {bounds.as_dict()} have zero extent")
    ids = list(cluster_ids) if cluster_ids is not None else list(range(len(room_planes)))
    candidates: List[CandidateSegment] = []
    for i, plane in enumerate(room_planes):
        others = [q for j, q in enumerate(room_planes) if j != i]
        cells = wall_cells(plane, others, floor, ceiling, bounds)
        if not cells:
            logger.warning("wall plane %r misses the scene box", plane)
        for k, cell in enumerate(cells):
            candidates.append(CandidateSegment(cluster_id=ids[i], cell_index=k, polygon=cell))
    if not candidates:
        raise EmptyArrangement("no wall plane crosses the scene box between floor and ceiling")
    logger.info("generated %d candidates from %d wall planes", len(candidates), len(room_planes))
    return candidates


def opposite_plane(plane: Plane, gap: float) -> Plane:
    """Parallel plane ``gap`` along ``plane``'s normal, facing back."""
    return canonicalize(np.append(-plane.normal, gap - plane.offset))


def infer_floor_ceiling(
    fc_clusters: Sequence[PlaneCluster], gap: float = 2.0, up: np.ndarray = Z_AXIS
) -> Tuple[Plane, Plane]:
    """
    Floor and ceiling from the heaviest horizontal cluster.

    An upward-facing dominant plane is the floor and the ceiling is synthesised
    ``gap`` above it; a downward-facing one is the ceiling with the floor ``gap``
    below.

    Raises:
        NoHorizontalCluster: no floor/ceiling cluster given.
        AmbiguousNormal: the dominant cluster is not horizontal.
    """
    if not fc_clusters:
        raise NoHorizontalCluster("no floor/ceiling cluster passed the weight threshold")
    dominant = sorted(fc_clusters, key=lambda c: (-c.weight, c.index))[0]
    plane = dominant.plane
    facing = float(plane.normal @ up)
    if abs(facing) < 0.5:
        raise AmbiguousNormal(f"dominant floor/ceiling plane {plane!r} is not horizontal")
    other = opposite_plane(plane, gap)
    if facing > 0:
        return canonicalize(plane), other
    return other, canonicalize(plane)
