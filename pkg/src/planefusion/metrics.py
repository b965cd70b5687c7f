"""
Evaluation metrics: plane regression losses, normal and plane-location error
statistics, 2D layout pixel error, detection AP and layout-to-ground-truth
comparison.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from planefusion.errors import DimensionMismatch, EmptyBatch, EmptyInput, LengthMismatch
from planefusion.geometry import (
    BBox,
    Intrinsics,
    PlanarPolygon,
    Plane,
    PlaneFrame,
    backproject_pixels,
    canonicalize,
    normal_angle_deg,
    point_in_polygon,
)
from planefusion.layout import LabelImage, RoomLayout
from planefusion.measurements import Measurement, SurfaceClass

logger = logging.getLogger(__name__)

# weight of the offset term in the combined plane regression loss
PLANE_LOSS_WEIGHT = 0.05

NORMAL_THRESHOLDS_DEG = (11.25, 22.5, 30.0)
LOCATION_THRESHOLDS_M = (0.2, 0.5, 1.0)

GT_LAYOUT_CLASSES = {1: "floor", 2: "ceiling", 3: "left", 4: "front", 5: "right"}


def _paired(pred: Sequence, gt: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    if len(p) != len(g):
        raise LengthMismatch(f"{len(p)} predictions vs {len(g)} ground-truth values")
    if len(p) == 0:
        raise EmptyBatch("empty batch")
    return p, g


def loss_norm(pred_normals: Sequence, gt_normals: Sequence) -> float:
    """Negative mean cosine similarity of matched normals."""
    p, g = _paired(pred_normals, gt_normals)
    return -float(np.sum(np.sum(p.reshape(-1, 3) * g.reshape(-1, 3), axis=1))) / len(p)


def loss_d(pred_d: Sequence[float], gt_d: Sequence[float]) -> float:
    """Mean squared error of the plane offsets."""
    p, g = _paired(pred_d, gt_d)
    return float(np.sum((p - g) ** 2)) / len(p)


def plane_loss(pred: Sequence[Plane], gt: Sequence[Plane], k: float = PLANE_LOSS_WEIGHT) -> float:
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gt)} ground-truth planes")
    return loss_norm([p.normal for p in pred], [g.normal for g in gt]) + k * loss_d(
        [p.offset for p in pred], [g.offset for g in gt]
    )


def _lower_median(values: np.ndarray) -> float:
    ordered = np.sort(values)
    return float(ordered[(len(ordered) - 1) // 2])


def _percent_below(values: np.ndarray, threshold: float) -> float:
    return 100.0 * float(np.count_nonzero(values < threshold)) / len(values)


@dataclass(frozen=True)
class NormalErrorStats:
    mean: float
    median: float
    rms: float
    acc_11_25: float
    acc_22_5: float
    acc_30: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PlaneLocationStats:
    mean: float
    median: float
    acc_0_2: float
    acc_0_5: float
    acc_1_0: float
    count: int
    dropped: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def normal_errors_deg(pairs: Sequence[Tuple[Plane, Plane]]) -> np.ndarray:
    return np.array([normal_angle_deg(p.normal, g.normal) for p, g in pairs], dtype=float)


def normal_error_stats(pairs: Sequence[Tuple[Plane, Plane]]) -> NormalErrorStats:
    """
    Angle statistics over matched (prediction, ground truth) planes, in degrees.

    Raises:
        EmptyInput: no pairs.
    """
    if not pairs:
        raise EmptyInput("normal error statistics need at least one pair")
    alpha = normal_errors_deg(pairs)
    t1, t2, t3 = NORMAL_THRESHOLDS_DEG
    return NormalErrorStats(
        mean=float(np.mean(alpha)),
        median=_lower_median(alpha),
        rms=math.sqrt(float(np.mean(alpha ** 2))),
        acc_11_25=_percent_below(alpha, t1),
        acc_22_5=_percent_below(alpha, t2),
        acc_30=_percent_below(alpha, t3),
        count=len(alpha),
    )


def plane_distance(pred: Plane, bbox: BBox, intrinsics: Intrinsics, gt: Plane, stride: int = 1) -> Optional[float]:
    """Mean distance to ``gt`` of the bbox pixels back-projected onto ``pred``; None if no pixel lands."""
    points, valid = backproject_pixels(bbox.pixel_grid(stride), intrinsics, pred)
    if not valid.any():
        return None
    return float(np.mean(np.abs(gt.signed_distance(points[valid]))))


def plane_location_stats(
    items: Sequence[Tuple[Plane, BBox, Intrinsics, Plane]], stride: int = 1
) -> PlaneLocationStats:
    """
    Per-instance point-to-plane distance statistics, in metres.

    Raises:
        EmptyInput: no instance has a back-projectable pixel.
    """
    deltas = []
    dropped = 0
    for pred, bbox, intrinsics, gt in items:
        delta = plane_distance(pred, bbox, intrinsics, gt, stride)
        if delta is None:
            dropped += 1
        else:
            deltas.append(delta)
    if dropped:
        logger.warning("plane location: dropped %d instances without valid pixels", dropped)
    if not deltas:
        raise EmptyInput("plane location statistics need at least one instance")
    d = np.array(deltas)
    t1, t2, t3 = LOCATION_THRESHOLDS_M
    return PlaneLocationStats(
        mean=float(np.mean(d)),
        median=_lower_median(d),
        acc_0_2=_percent_below(d, t1),
        acc_0_5=_percent_below(d, t2),
        acc_1_0=_percent_below(d, t3),
        count=len(d),
        dropped=dropped,
    )


# 2D pixel error ------------------------------------------------------------


def _labels(image: Union[LabelImage, np.ndarray]) -> np.ndarray:
    return image.labels if isinstance(image, LabelImage) else np.asarray(image)


def assign_instances(pred: np.ndarray, gt: np.ndarray) -> Dict[int, int]:
    """Min-error mapping of predicted instance ids to gt classes; unmapped ids go to 0."""
    instances = [int(v) for v in np.unique(pred) if v != 0]
    classes = [int(v) for v in np.unique(gt) if v != 0]
    if not instances:
        return {}
    cost = np.zeros((len(instances), len(classes)))
    background = np.zeros(len(instances))
    for i, p in enumerate(instances):
        under = gt[pred == p]
        background[i] = np.count_nonzero(under != 0)
        for j, g in enumerate(classes):
            cost[i, j] = np.count_nonzero(under != g)
    # dummy columns stand for "map to background"
    reduced = np.hstack([cost - background[:, None], np.zeros((len(instances), len(instances)))])
    rows, cols = linear_sum_assignment(reduced)
    mapping = {p: 0 for p in instances}
    for r, c in zip(rows, cols):
        if c < len(classes):
            mapping[instances[r]] = classes[c]
    return mapping


def relabel(pred: np.ndarray, mapping: Dict[int, int]) -> np.ndarray:
    out = np.zeros_like(pred)
    for p, g in mapping.items():
        out[pred == p] = g
    return out


def pixel_error_2d(pred: Union[LabelImage, np.ndarray], gt: Union[LabelImage, np.ndarray]) -> float:
    """
    Percentage of pixels whose label differs from ground truth after the best
    instance-to-class assignment.

    Raises:
        DimensionMismatch: the label maps differ in shape.
    """
    p, g = _labels(pred), _labels(gt)
    if p.shape != g.shape:
        raise DimensionMismatch(f"prediction {p.shape} vs ground truth {g.shape}")
    mapped = relabel(p, assign_instances(p, g))
    return 100.0 * float(np.count_nonzero(mapped != g)) / g.size


# Detection AP --------------------------------------------------------------


@dataclass(frozen=True)
class ScoredBox:
    frame_id: int
    klass: SurfaceClass
    bbox: BBox
    score: float = 1.0

    @classmethod
    def from_measurement(cls, m: Measurement) -> "ScoredBox":
        return cls(m.frame_id, m.klass, m.bbox, m.score)


@dataclass
class DetectionAP:
    per_class: Dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def mean_ap(self) -> Optional[float]:
        defined = [v for v in self.per_class.values() if v is not None]
        return float(np.mean(defined)) if defined else None

    def as_dict(self) -> dict:
        return {"per_class": dict(self.per_class), "mAP": self.mean_ap}


def voc_ap(rec: np.ndarray, prec: np.ndarray, use_07_metric: bool = False) -> float:
    """Area under the precision envelope (all points) or the 11-point average."""
    if use_07_metric:
        ap = 0.0
        for t in np.arange(0.0, 1.1, 0.1):
            p = float(np.max(prec[rec >= t])) if np.any(rec >= t) else 0.0
            ap += p / 11.0
        return ap
    mrec = np.concatenate(([0.0], rec, [1.0]))
    mpre = np.concatenate(([0.0], prec, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    idx = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def _class_ap(
    preds: Sequence[ScoredBox], gts: Sequence[ScoredBox], iou_min: float, use_07_metric: bool
) -> Optional[float]:
    if not gts:
        return None
    if not preds:
        return 0.0
    by_frame: Dict[int, List[BBox]] = {}
    for g in gts:
        by_frame.setdefault(g.frame_id, []).append(g.bbox)
    used = {f: [False] * len(boxes) for f, boxes in by_frame.items()}
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, i in enumerate(order):
        det = preds[i]
        candidates = by_frame.get(det.frame_id, [])
        ious = [det.bbox.iou(g) for g in candidates]
        best = int(np.argmax(ious)) if ious else -1
        if best >= 0 and ious[best] >= iou_min and not used[det.frame_id][best]:
            used[det.frame_id][best] = True
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0
    tp, fp = np.cumsum(tp), np.cumsum(fp)
    rec = tp / len(gts)
    prec = tp / np.maximum(tp + fp, np.finfo(float).eps)
    return voc_ap(rec, prec, use_07_metric)


def detection_ap(
    preds: Sequence[ScoredBox],
    gts: Sequence[ScoredBox],
    iou_min: float = 0.5,
    use_07_metric: bool = False,
) -> DetectionAP:
    """Per-class AP (``None`` when a class has no ground truth) and their mean."""
    result = DetectionAP()
    for klass in SurfaceClass:
        result.per_class[klass.value] = _class_ap(
            [p for p in preds if p.klass is klass],
            [g for g in gts if g.klass is klass],
            iou_min,
            use_07_metric,
        )
    return result


def match_by_iou(
    preds: Sequence[Measurement], gts: Sequence[Measurement], iou_min: float = 0.5
) -> List[Tuple[int, int]]:
    """Greedy (pred, gt) index pairs by descending score, within frame and class."""
    taken: set = set()
    pairs: List[Tuple[int, int]] = []
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    for i in order:
        p = preds[i]
        best, best_iou = -1, iou_min
        for j, g in enumerate(gts):
            if j in taken or g.frame_id != p.frame_id or g.klass is not p.klass:
                continue
            iou = p.bbox.iou(g.bbox)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            taken.add(best)
            pairs.append((i, best))
    return pairs


# Layout comparison ---------------------------------------------------------


@dataclass
class WallMatch:
    layout_wall: int
    gt_wall: int
    angle_deg: float
    offset_m: float


@dataclass
class LayoutComparison:
    matches: List[WallMatch]
    missed: List[int]
    spurious: List[int]

    def as_dict(self) -> dict:
        return {
            "matches": [asdict(m) for m in self.matches],
            "missed": list(self.missed),
            "spurious": list(self.spurious),
        }


def _centroid_inside(polygon: PlanarPolygon, plane: Plane, extent: np.ndarray) -> bool:
    frame = PlaneFrame.for_plane(plane)
    return point_in_polygon(frame.to_2d(polygon.centroid3d)[0], frame.to_2d(extent))


def compare_layouts(
    layout: RoomLayout,
    gt_walls: Sequence[Plane],
    angle_gate_deg: float = 10.0,
    offset_gate_m: float = 0.5,
    gt_extents: Optional[Sequence[np.ndarray]] = None,
) -> LayoutComparison:
    """
    Greedily match layout wall polygons one-to-one to ground-truth walls.

    Every polygon is scored on its own, so two cells on one plane can never
    share a match. With ``gt_extents`` a polygon only matches a wall whose
    rectangle contains its centroid.

    Raises:
        LengthMismatch: ``gt_extents`` does not pair up with ``gt_walls``.
    """
    if gt_extents is not None and len(gt_extents) != len(gt_walls):
        raise LengthMismatch(f"{len(gt_extents)} extents vs {len(gt_walls)} ground-truth walls")
    truth = [canonicalize(g) for g in gt_walls]
    scored = []
    for i, wall in enumerate(layout.walls):
        p = canonicalize(wall.plane)
        for j, g in enumerate(truth):
            angle = normal_angle_deg(p.normal, g.normal)
            offset = abs(p.offset - g.offset)
            if angle > angle_gate_deg or offset > offset_gate_m:
                continue
            if gt_extents is not None and not _centroid_inside(wall, g, gt_extents[j]):
                continue
            scored.append((angle, offset, i, j))
    scored.sort()
    used_p, used_g = set(), set()
    matches = []
    for angle, offset, i, j in scored:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append(WallMatch(i, j, angle, offset))
    matches.sort(key=lambda m: m.gt_wall)
    return LayoutComparison(
        matches=matches,
        missed=[j for j in range(len(truth)) if j not in used_g],
        spurious=[i for i in range(len(layout.walls)) if i not in used_p],
    )


def format_plane_report(
    normal: Optional[NormalErrorStats] = None, location: Optional[PlaneLocationStats] = None
) -> str:
    """Plain-text tables: normal errors then plane locations."""
    parts = []
    if normal is not None:
        frame = pd.DataFrame(
            [[normal.mean, normal.median, normal.rms, normal.acc_11_25, normal.acc_22_5, normal.acc_30]],
            columns=["mean", "median", "rms", "11.25°", "22.5°", "30°"],
            index=["normal error (deg / %)"],
        )
        parts.append(frame.to_string(float_format=lambda v: f"{v:.2f}"))
    if location is not None:
        frame = pd.DataFrame(
            [[location.mean, location.median, location.acc_0_2, location.acc_0_5, location.acc_1_0]],
            columns=["mean", "median", "0.2m", "0.5m", "1m"],
            index=["plane location (m / %)"],
        )
        parts.append(frame.to_string(float_format=lambda v: f"{v:.3f}"))
    return "\n\n".join(parts) + "\n"
