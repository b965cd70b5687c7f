"""
Room layout assembly, OBJ export and 2D layout rendering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from matplotlib import colormaps
from scipy.spatial import ConvexHull

from planefusion import __version__, config
from planefusion.candidates import CandidateSegment, SceneBounds, base_polygon
from planefusion.errors import DataError, EmptyLayout
from planefusion.geometry import (
    Intrinsics,
    PlanarPolygon,
    Plane,
    backproject_pixels,
    canonicalize,
    polygon_area,
    polygon_intersection_area,
)
from planefusion.measurements import Measurement

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# relative area mismatch below which two cells count as sharing an edge
_MERGE_SLACK = 1e-9

# qualitative palette for label visualisation, label k uses entry (k - 1) % 12
PALETTE = np.round(np.array(colormaps["Paired"].colors)[:, :3] * 255).astype(int)


@dataclass(frozen=True, eq=False)
class RoomLayout:
    walls: List[PlanarPolygon]
    floor: Plane
    ceiling: Plane
    bounds: SceneBounds
    wall_clusters: Tuple[int, ...] = ()

    @property
    def wall_count(self) -> int:
        return len(self.walls)

    @property
    def total_wall_area(self) -> float:
        return float(sum(w.area for w in self.walls))

    def translated(self, shift: np.ndarray) -> "RoomLayout":
        shift = np.asarray(shift, dtype=float)
        return RoomLayout(
            walls=[w.translated(shift) for w in self.walls],
            floor=canonicalize(self.floor.translated(shift)),
            ceiling=canonicalize(self.ceiling.translated(shift)),
            bounds=self.bounds.translated(shift),
            wall_clusters=self.wall_clusters,
        )

    def horizontal_faces(self) -> Dict[str, PlanarPolygon]:
        return {
            "floor": base_polygon(self.floor, self.bounds),
            "ceiling": base_polygon(self.ceiling, self.bounds),
        }

    def summary(self) -> dict:
        return {
            "wall_count": self.wall_count,
            "total_wall_area": self.total_wall_area,
            "floor": self.floor.vector.tolist(),
            "ceiling": self.ceiling.vector.tolist(),
            "bounds": self.bounds.as_dict(),
        }


def _convex_union(a: PlanarPolygon, b: PlanarPolygon) -> Optional[PlanarPolygon]:
    """Union of two cells of one plane when it is itself convex, else None."""
    other = a.frame.to_2d(b.vertices3d)
    if polygon_area(other) < 0:
        other = other[::-1]
    slack = _MERGE_SLACK * max(1.0, a.area + b.area)
    if polygon_intersection_area(a.vertices, other) > slack:
        return None
    points = np.vstack([a.vertices, other])
    hull = ConvexHull(points)
    if abs(hull.volume - (a.area + b.area)) > slack:
        return None
    return a.with_vertices(points[hull.vertices])


def merge_adjacent_cells(accepted: Sequence[CandidateSegment]) -> List[Tuple[int, PlanarPolygon]]:
    """Fuse accepted cells of one cluster whose union is convex; returns ``(cluster_id, polygon)``."""
    walls: List[Tuple[int, PlanarPolygon]] = []
    for c in accepted:
        poly = c.polygon
        merged = True
        while merged:
            merged = False
            for k, (cluster_id, other) in enumerate(walls):
                if cluster_id != c.cluster_id:
                    continue
                union = _convex_union(other, poly)
                if union is not None:
                    walls.pop(k)
                    poly = union
                    merged = True
                    break
        walls.append((c.cluster_id, poly))
    return walls


def assemble(
    candidates: Sequence[CandidateSegment], floor: Plane, ceiling: Plane, bounds: SceneBounds
) -> RoomLayout:
    """
    Layout from the accepted candidates. Neighbouring accepted cells of one
    cluster become a single wall.

    Raises:
        EmptyLayout: no candidate was accepted.
    """
    accepted = [c for c in candidates if c.accepted]
    if not accepted:
        raise EmptyLayout(f"none of {len(candidates)} candidates was accepted")
    walls = merge_adjacent_cells(accepted)
    layout = RoomLayout(
        walls=[poly for _, poly in walls],
        floor=floor,
        ceiling=ceiling,
        bounds=bounds,
        wall_clusters=tuple(cluster_id for cluster_id, _ in walls),
    )
    logger.info(
        "layout: %d walls from %d accepted cells, %.3f m^2",
        layout.wall_count, len(accepted), layout.total_wall_area,
    )
    return layout


# OBJ -----------------------------------------------------------------------


@dataclass
class ObjMesh:
    vertices: np.ndarray
    groups: Dict[str, List[Tuple[int, ...]]] = field(default_factory=dict)
    comments: List[str] = field(default_factory=list)

    def group_vertices(self, name: str) -> np.ndarray:
        used = sorted({i for face in self.groups[name] for i in face})
        return self.vertices[used]


def write_obj(
    path: PathLike, faces: Iterable[Tuple[str, np.ndarray]], header: Sequence[str] = ()
) -> None:
    """Write named convex polygons (``(N, 3)`` vertices), fan-triangulated."""
    lines = [f"# planefusion {__version__}"]
    lines += [f"# {h}" for h in header]
    offset = 1
    for name, verts in faces:
        verts = np.asarray(verts, dtype=float).reshape(-1, 3)
        if len(verts) < 3:
            continue
        lines.append(f"g {name}")
        lines += ["v {:.9g} {:.9g} {:.9g}".format(*v) for v in verts]
        for i in range(1, len(verts) - 1):
            lines.append(f"f {offset} {offset + i} {offset + i + 1}")
        offset += len(verts)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_obj(path: PathLike) -> ObjMesh:
    vertices: List[List[float]] = []
    groups: Dict[str, List[Tuple[int, ...]]] = {}
    comments: List[str] = []
    current = "default"
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "#":
                comments.append(line[1:].strip())
            elif tag == "g":
                current = parts[1] if len(parts) > 1 else "default"
                groups.setdefault(current, [])
            elif tag == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif tag == "f":
                face = tuple(int(p.split("/")[0]) - 1 for p in parts[1:])
                groups.setdefault(current, []).append(face)
            else:
                raise DataError(f"{path}:{lineno}: unsupported OBJ record {tag!r}")
    return ObjMesh(np.array(vertices, dtype=float).reshape(-1, 3), groups, comments)


def export_mesh(layout: RoomLayout, path: PathLike, parameters: Optional[dict] = None) -> None:
    """
    Walls as ``wall_<i>`` groups plus the bounds-clipped floor and ceiling.

    Raises:
        EmptyLayout: the layout has no walls.
    """
    if not layout.walls:
        raise EmptyLayout("refusing to export a layout without walls")
    faces = [(f"wall_{i}", w.vertices3d) for i, w in enumerate(layout.walls)]
    faces += [(name, poly.vertices3d) for name, poly in layout.horizontal_faces().items()]
    header = [f"{k}: {v}" for k, v in sorted((parameters or {}).items())]
    write_obj(path, faces, header)
    logger.info("wrote layout mesh %s", path)


def export_candidates(candidates: Sequence[CandidateSegment], path: PathLike) -> None:
    faces = [
        (
            f"cand_{c.cluster_id}_{c.cell_index}_{'accepted' if c.accepted else 'rejected'}",
            c.polygon.vertices3d,
        )
        for c in candidates
    ]
    write_obj(path, faces, ["candidate segments"])


# 2D rendering --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LabelImage:
    labels: np.ndarray
    depth: np.ndarray

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @classmethod
    def empty(cls, width: int, height: int) -> "LabelImage":
        return cls(np.zeros((height, width), dtype=np.int32), np.full((height, width), np.inf))


def render_layout2d(frame_measurements: Sequence[Measurement], intrinsics: Intrinsics) -> LabelImage:
    """
    Z-buffered reprojection of one frame's detections.

    Each bbox pixel is back-projected onto its detection's plane; the nearest
    positive depth wins, ties keep the lower detection index.
    """
    labels = np.zeros((intrinsics.height, intrinsics.width), dtype=np.int32)
    depth = np.full((intrinsics.height, intrinsics.width), np.inf)
    tie = config.TOLERANCES.depth_tie
    for idx, m in enumerate(frame_measurements):
        px = m.bbox.pixel_grid()
        inside = (
            (px[:, 0] >= 0) & (px[:, 0] < intrinsics.width)
            & (px[:, 1] >= 0) & (px[:, 1] < intrinsics.height)
        )
        px = px[inside]
        if not len(px):
            continue
        points, valid = backproject_pixels(px, intrinsics, m.plane_cam)
        cols = px[:, 0].astype(int)
        rows = px[:, 1].astype(int)
        z = points[:, 2]
        wins = valid & (z > 0) & (z < depth[rows, cols] - tie)
        depth[rows[wins], cols[wins]] = z[wins]
        labels[rows[wins], cols[wins]] = idx + 1
    return LabelImage(labels, depth)


def write_label_pgm(path: PathLike, image: LabelImage) -> None:
    maxval = max(1, int(image.labels.max()))
    with open(path, "w", encoding="ascii") as f:
        f.write(f"P2\n{image.width} {image.height}\n{maxval}\n")
        for row in image.labels:
            f.write(" ".join(str(int(v)) for v in row) + "\n")


def read_label_pgm(path: PathLike) -> np.ndarray:
    with open(path, "r", encoding="ascii") as f:
        tokens = [t for line in f for t in line.split("#", 1)[0].split()]
    if not tokens or tokens[0] != "P2":
        raise DataError(f"{path}: not an ASCII PGM file")
    width, height = int(tokens[1]), int(tokens[2])
    values = np.array([int(t) for t in tokens[4:]], dtype=np.int32)
    if values.size != width * height:
        raise DataError(f"{path}: expected {width * height} pixels, got {values.size}")
    return values.reshape(height, width)


def label_colors(labels: np.ndarray) -> np.ndarray:
    rgb = np.zeros(labels.shape + (3,), dtype=int)
    mask = labels > 0
    rgb[mask] = PALETTE[(labels[mask] - 1) % len(PALETTE)]
    return rgb


def write_label_ppm(path: PathLike, image: LabelImage) -> None:
    rgb = label_colors(image.labels)
    with open(path, "w", encoding="ascii") as f:
        f.write(f"P3\n{image.width} {image.height}\n255\n")
        for row in rgb:
            f.write(" ".join(f"{r} {g} {b}" for r, g, b in row) + "\n")
