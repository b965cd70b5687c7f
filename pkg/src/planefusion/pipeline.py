"""
End-to-end reconstruction: lift, filter, cluster, intersect, vote, assemble.

The world frame is shifted onto the camera centroid before clustering so that
canonical plane offsets stay well away from zero and canonical normals face the
room interior. Outputs are shifted back.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from planefusion.candidates import (
    CandidateSegment,
    extend_bounds_to_band,
    generate_candidates,
    infer_floor_ceiling,
    scene_bounds,
)
from planefusion.clustering import (
    MixtureModel,
    PlaneCluster,
    fit_mixture,
    plane_features,
    select_room_planes,
)
from planefusion.config import ConfigModel, unit_field
from planefusion.errors import (
    AmbiguousNormal,
    GeometryError,
    LayoutError,
    ModelError,
    NoHorizontalCluster,
    NoPlanesSelected,
    TooFewSamples,
)
from planefusion.geometry import Plane, canonicalize
from planefusion.layout import RoomLayout, assemble
from planefusion.measurements import (
    GlobalMeasurement,
    SequenceBundle,
    filter_grazing,
    lift_to_world,
    split_by_class,
)
from planefusion.voting import VotingParams, vote_all

logger = logging.getLogger(__name__)


class PipelineConfig(ConfigModel):
    """Every tuned reconstruction parameter."""

    min_angle_deg: float = unit_field(30.0, "deg", "grazing filter: min angle away from edge-on", gt=0, lt=90)
    w_min: float = unit_field(0.05, "weight", "min mixture weight of an accepted plane", ge=0, le=1)
    k_max_walls: int = unit_field(20, "components", "mixture size for walls", ge=1)
    k_max_fc: int = unit_field(4, "components", "mixture size for floor/ceiling", ge=1)
    n_voters: int = unit_field(100, "voters", "most likely cluster members used as voters", ge=1)
    voting: VotingParams = VotingParams()
    gap_m: float = unit_field(2.0, "m", "synthesised floor-to-ceiling distance", gt=0)
    margin_m: float = unit_field(0.5, "m", "scene box inflation", ge=0)
    seed: int = unit_field(1, "1", "mixture initialisation seed")
    s_n: float = unit_field(1.0, "m", "normal scale in plane features", gt=0)
    alpha0: float = unit_field(0.5, "1", "Dirichlet concentration on mixture weights", gt=0, le=1)
    var_floor: float = unit_field(1e-6, "1", "per-dimension variance floor", ge=0)
    em_tol: float = unit_field(1e-6, "1", "EM objective improvement to stop at", gt=0)
    em_max_iter: int = unit_field(200, "iterations", "EM iteration cap per run", ge=1)
    merge_angle_deg: float = unit_field(5.0, "deg", "duplicate-plane merge angle", ge=0)
    merge_offset_m: float = unit_field(0.15, "m", "duplicate-plane merge offset", ge=0)
    recenter: bool = unit_field(True, "1", "shift the world origin to the camera centroid")
    floor_z: Optional[float] = unit_field(None, "m", "fallback floor height")
    room_height: Optional[float] = unit_field(None, "m", "fallback floor-to-ceiling height", gt=0)
    bounds_from: Literal["walls", "all"] = unit_field("walls", "1", "measurements used for the scene box")

    def mixture_kwargs(self) -> Dict[str, Any]:
        return {
            "alpha0": self.alpha0,
            "var_floor": self.var_floor,
            "tol": self.em_tol,
            "max_iter": self.em_max_iter,
            "merge_angle_deg": self.merge_angle_deg,
            "merge_offset_m": self.merge_offset_m,
            "feature_scale": self.s_n,
        }


class StageCounts(BaseModel):
    loaded: int = 0
    dropped: int = 0
    lifted: int = 0
    filtered: int = 0
    walls: int = 0
    floor_ceiling: int = 0
    wall_components: int = 0
    fc_components: int = 0
    selected_walls: int = 0
    selected_fc: int = 0
    candidates: int = 0
    accepted: int = 0


class RunReport(BaseModel):
    seed: int
    config: Dict[str, Any]
    counts: StageCounts = Field(default_factory=StageCounts)
    drops: Dict[str, int] = Field(default_factory=dict)
    origin_shift: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    wall_clusters: List[Dict[str, Any]] = Field(default_factory=list)
    fc_clusters: List[Dict[str, Any]] = Field(default_factory=list)
    floor: Optional[List[float]] = None
    ceiling: Optional[List[float]] = None
    floor_ceiling_source: Optional[str] = None
    candidates: List[Dict[str, Any]] = Field(default_factory=list)
    layout: Optional[Dict[str, Any]] = None
    timings: Dict[str, float] = Field(default_factory=dict)
    failure: Optional[Dict[str, str]] = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_json(self, include_timings: bool = False) -> str:
        exclude = None if include_timings else {"timings"}
        return json.dumps(self.model_dump(mode="json", exclude=exclude), indent=2, sort_keys=True) + "\n"


@dataclass
class PipelineArtifacts:
    """Intermediate results kept for debug dumps, in world coordinates."""

    wall_model: Optional[MixtureModel] = None
    fc_model: Optional[MixtureModel] = None
    candidates: List[CandidateSegment] = field(default_factory=list)


def _cluster_record(c: PlaneCluster, shift: np.ndarray) -> Dict[str, Any]:
    return {
        "index": c.index,
        "weight": c.weight,
        "members": len(c.members),
        "plane": canonicalize(c.plane.translated(shift)).vector.tolist(),
    }


class ReconstructionPipeline:
    """Single-use orchestration of one reconstruction run."""

    def __init__(self, config: PipelineConfig, workers: int = 1):
        self.config = config
        self.workers = workers
        self.artifacts = PipelineArtifacts()
        self.report = RunReport(seed=config.seed, config=config.model_dump(mode="json"))
        self._used = False

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.report.timings[name] = time.perf_counter() - start

    def run(self, bundle: SequenceBundle) -> Tuple[Optional[RoomLayout], RunReport]:
        if self._used:
            raise RuntimeError("ReconstructionPipeline instances are single-use")
        self._used = True
        try:
            layout = self._run(bundle)
        except (ModelError, LayoutError, GeometryError) as exc:
            logger.error("reconstruction failed: %s", exc)
            self.report.failure = exc.to_dict()
            return None, self.report
        return layout, self.report

    def _fit(self, items: List[GlobalMeasurement], k_max: int, what: str) -> MixtureModel:
        if len(items) < 2:
            raise TooFewSamples(f"{len(items)} {what} measurements, need at least 2")
        feats = plane_features(items, self.config.s_n)
        return fit_mixture(feats, k_max, self.config.seed, **self.config.mixture_kwargs())

    def _floor_ceiling(
        self, horizontal: List[GlobalMeasurement], shift: np.ndarray
    ) -> Tuple[Plane, Plane]:
        cfg = self.config
        try:
            model = self._fit(horizontal, cfg.k_max_fc, "floor/ceiling")
            self.artifacts.fc_model = model
            self.report.counts.fc_components = len(model.clusters)
            selected = select_room_planes(model, cfg.w_min)
            self.report.counts.selected_fc = len(selected)
            self.report.fc_clusters = [_cluster_record(c, -shift) for c in selected]
            floor, ceiling = infer_floor_ceiling(selected, cfg.gap_m)
            self.report.floor_ceiling_source = "measurements"
            return floor, ceiling
        except (TooFewSamples, NoPlanesSelected, NoHorizontalCluster, AmbiguousNormal) as exc:
            if cfg.floor_z is None or cfg.room_height is None:
                raise NoHorizontalCluster(f"floor/ceiling rule failed ({exc}) and no fallback configured") from exc
            logger.warning("floor/ceiling rule failed (%s), using configured fallback", exc)
            self.report.floor_ceiling_source = "config"
            top = cfg.floor_z + cfg.room_height
            floor = canonicalize(Plane(np.array([0.0, 0.0, 1.0]), -cfg.floor_z).translated(shift))
            ceiling = canonicalize(Plane(np.array([0.0, 0.0, -1.0]), top).translated(shift))
            return floor, ceiling

    def _run(self, bundle: SequenceBundle) -> RoomLayout:
        cfg = self.config
        counts = self.report.counts
        counts.loaded = len(bundle.measurements)

        with self._stage("lift"):
            lifted, drops = lift_to_world(bundle)
        counts.dropped = drops.total
        counts.lifted = len(lifted)
        self.report.drops = drops.as_dict()

        offset = bundle.camera_centroid() if cfg.recenter else np.zeros(3)
        shift = -offset
        self.report.origin_shift = offset.tolist()
        if cfg.recenter:
            lifted = [m.translated(shift) for m in lifted]

        filtered = filter_grazing(lifted, cfg.min_angle_deg)
        counts.filtered = len(filtered)
        walls, horizontal = split_by_class(filtered)
        counts.walls = len(walls)
        counts.floor_ceiling = len(horizontal)
        logger.info(
            "lifted %d, kept %d after grazing filter (%d walls, %d floor/ceiling)",
            len(lifted), len(filtered), len(walls), len(horizontal),
        )

        with self._stage("cluster"):
            if len(walls) < 2:
                raise NoPlanesSelected(f"only {len(walls)} wall measurements survived filtering")
            wall_model = self._fit(walls, cfg.k_max_walls, "wall")
            self.artifacts.wall_model = wall_model
            counts.wall_components = len(wall_model.clusters)
            selected = select_room_planes(wall_model, cfg.w_min)
            counts.selected_walls = len(selected)
            self.report.wall_clusters = [_cluster_record(c, offset) for c in selected]
            floor, ceiling = self._floor_ceiling(horizontal, shift)
        self.report.floor = canonicalize(floor.translated(offset)).vector.tolist()
        self.report.ceiling = canonicalize(ceiling.translated(offset)).vector.tolist()

        with self._stage("candidates"):
            source = walls if cfg.bounds_from == "walls" else filtered
            bounds = extend_bounds_to_band(scene_bounds(source, cfg.margin_m), floor, ceiling)
            candidates = generate_candidates(
                [c.plane for c in selected], floor, ceiling, bounds, [c.index for c in selected]
            )
        counts.candidates = len(candidates)

        with self._stage("vote"):
            voted = vote_all(
                candidates, selected, walls, cfg.voting, cfg.n_voters, self.workers, band=(floor, ceiling)
            )
        counts.accepted = sum(c.accepted for c in voted)
        self.artifacts.candidates = [
            c.with_vote(polygon=c.polygon.translated(offset)) for c in voted
        ]
        self.report.candidates = [
            {
                "cluster_id": c.cluster_id,
                "cell": c.cell_index,
                "area": c.area,
                "inliers": c.inliers,
                "voters_total": c.voters_total,
                "raw_energy": c.raw_energy,
                "energy": c.energy,
                "accepted": c.accepted,
            }
            for c in voted
        ]

        layout = assemble(voted, floor, ceiling, bounds).translated(offset)
        self.report.layout = layout.summary()
        return layout


def reconstruct(
    bundle: SequenceBundle, config: PipelineConfig, workers: int = 1
) -> Tuple[Optional[RoomLayout], RunReport]:
    """
    Run the full reconstruction. The report is always returned; on a
    structured failure the layout is None and ``report.failure`` is set.
    """
    return ReconstructionPipeline(config, workers).run(bundle)


__all__ = [
    "PipelineArtifacts",
    "PipelineConfig",
    "ReconstructionPipeline",
    "RunReport",
    "StageCounts",
    "reconstruct",
]
