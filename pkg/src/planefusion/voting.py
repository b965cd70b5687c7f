"""
Spatial voting over candidate segments.

A voter is a measurement patch from the candidate's own cluster. It is an
inlier when it overlaps the candidate by more than ``t_vc`` of its own area and
covers more than ``t_cv`` of the candidate. Inliers add ``1 - i_vc`` to the
raw energy, which is then scaled by the inlier ratio ``r_c`` raised to ``a``.
Wall voters are clipped to the floor-to-ceiling band before any overlap is
measured.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from planefusion.candidates import CandidateSegment, clip_to_band
from planefusion.clustering import PlaneCluster, rank_voters
from planefusion.config import ConfigModel, unit_field
from planefusion.errors import NearPerpendicular
from planefusion.geometry import PlanarPolygon, Plane, polygon_intersection_area, project_patch
from planefusion.measurements import GlobalMeasurement

logger = logging.getLogger(__name__)

Fractions = Optional[Tuple[float, float]]


class RatioMode(str, Enum):
    DIVIDE_BY_RATIO = "divide_by_ratio"
    MULTIPLY_BY_RATIO = "multiply_by_ratio"


class VotingParams(ConfigModel):
    t_vc: float = unit_field(0.7, "fraction", "min share of voter area inside the candidate", gt=0, le=1)
    t_cv: float = unit_field(0.2, "fraction", "min share of candidate area covered by the voter", gt=0, le=1)
    a: float = unit_field(2.0, "1", "inlier-ratio exponent", ge=0)
    e_min: float = unit_field(0.0, "1", "acceptance energy threshold", ge=0)
    v_min: int = unit_field(10, "voters", "minimum voters for acceptance", ge=0)
    min_inliers: int = unit_field(5, "voters", "minimum inlier voters for acceptance", ge=1)
    ratio_mode: RatioMode = RatioMode.MULTIPLY_BY_RATIO


@dataclass(frozen=True)
class VoteResult:
    energy: float
    raw_energy: float
    inliers: int
    voters_total: int
    ratio: float
    accepted: bool


def overlap_fractions(voter: PlanarPolygon, candidate: PlanarPolygon) -> Tuple[float, float]:
    """
    ``(i_vc, i_cv)`` for a voter projected onto the candidate's plane.

    Raises:
        NearPerpendicular: from :func:`project_patch`.
    """
    projected = project_patch(voter, candidate)
    overlap = polygon_intersection_area(projected, candidate)
    voter_area = projected.area
    cand_area = candidate.area
    i_vc = min(1.0, overlap / voter_area) if voter_area > 0 else 0.0
    i_cv = min(1.0, overlap / cand_area) if cand_area > 0 else 0.0
    return max(0.0, i_vc), max(0.0, i_cv)


def accumulate_votes(fractions: Sequence[Fractions], params: VotingParams) -> VoteResult:
    """
    Energy from per-voter overlap fractions; ``None`` marks a voter that could
    not be projected (counted, never an inlier).
    """
    total = len(fractions)
    contributions = [
        1.0 - f[0] for f in fractions if f is not None and f[0] > params.t_vc and f[1] > params.t_cv
    ]
    inliers = len(contributions)
    if inliers == 0:
        return VoteResult(0.0, 0.0, 0, total, 0.0, False)
    raw = math.fsum(contributions)
    ratio = inliers / total
    scale = ratio ** params.a
    if params.ratio_mode is RatioMode.DIVIDE_BY_RATIO:
        energy = raw / scale
    else:
        energy = raw * scale
    accepted = energy >= params.e_min and total >= params.v_min and inliers >= params.min_inliers
    return VoteResult(energy, raw, inliers, total, ratio, accepted)


def _fractions(voter: PlanarPolygon, candidate: PlanarPolygon) -> Fractions:
    if len(voter.vertices) < 3:
        return 0.0, 0.0
    try:
        return overlap_fractions(voter, candidate)
    except NearPerpendicular:
        return None


def vote_candidate(
    candidate: CandidateSegment, voters: Sequence[PlanarPolygon], params: VotingParams
) -> VoteResult:
    return accumulate_votes([_fractions(v, candidate.polygon) for v in voters], params)


def _apply(candidate: CandidateSegment, result: VoteResult) -> CandidateSegment:
    return candidate.with_vote(
        energy=result.energy,
        raw_energy=result.raw_energy,
        inliers=result.inliers,
        voters_total=result.voters_total,
        accepted=result.accepted,
    )


def vote_all(
    candidates: Sequence[CandidateSegment],
    clusters: Sequence[PlaneCluster],
    measurements: Sequence[GlobalMeasurement],
    params: VotingParams,
    n_voters: int = 100,
    workers: int = 1,
    band: Optional[Tuple[Plane, Plane]] = None,
) -> List[CandidateSegment]:
    """
    Vote every candidate with its own cluster's voters; output keeps input order.

    With ``band = (floor, ceiling)`` each voter patch is first cut down to the
    part between the two planes.
    """

    def patch(m: GlobalMeasurement) -> PlanarPolygon:
        return m.patch_world if band is None else clip_to_band(m.patch_world, *band)

    voters: Dict[int, List[PlanarPolygon]] = {
        c.index: [patch(measurements[i]) for i in rank_voters(c, measurements, n_voters)]
        for c in clusters
    }

    def job(candidate: CandidateSegment) -> CandidateSegment:
        return _apply(candidate, vote_candidate(candidate, voters.get(candidate.cluster_id, []), params))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            voted = list(pool.map(job, candidates))
    else:
        voted = [job(c) for c in candidates]
    logger.info(
        "voting accepted %d of %d candidates", sum(c.accepted for c in voted), len(voted)
    )
    return voted


def format_voting_report(candidates: Sequence[CandidateSegment]) -> str:
    lines = ["cluster  cell  inliers/total  raw_energy     energy  accepted"]
    for c in candidates:
        lines.append(
            f"{c.cluster_id:7d}  {c.cell_index:4d}  {c.inliers:7d}/{c.voters_total:<5d}"
            f"  {c.raw_energy:10.6f}  {c.energy:9.6f}  {'yes' if c.accepted else 'no'}"
        )
    return "\n".join(lines) + "\n"
