"""
Unit Tests for Spatial Voting

Test Categories:
- Overlap fractions
- Energy accumulation and ratio modes
- Acceptance thresholds
- Worker-count invariance

Author: planefusion Testing Team
Date: 2026
"""

import numpy as np
import pytest

from planefusion.candidates import CandidateSegment, SceneBounds, generate_candidates
from planefusion.clustering import PlaneCluster, plane_feature
from planefusion.geometry import PlanarPolygon, Plane, PlaneFrame
from planefusion.measurements import GlobalMeasurement
from planefusion.voting import (
    RatioMode,
    VotingParams,
    accumulate_votes,
    format_voting_report,
    overlap_fractions,
    vote_all,
    vote_candidate,
)
from tests.fixtures.test_data import square_patch

HAND_FRACTIONS = [(0.9, 0.5), (0.8, 0.3), (0.5, 0.9)]

WALLS = [
    Plane(np.array([1.0, 0.0, 0.0]), 2.0),
    Plane(np.array([-1.0, 0.0, 0.0]), 2.0),
    Plane(np.array([0.0, 1.0, 0.0]), 2.0),
    Plane(np.array([0.0, -1.0, 0.0]), 2.0),
]
FLOOR = Plane(np.array([0.0, 0.0, 1.0]), 1.5)
CEILING = Plane(np.array([0.0, 0.0, -1.0]), 1.0)
BOX = SceneBounds(np.array([-2.5, -2.5, -2.0]), np.array([2.5, 2.5, 1.5]))


def wall_patch(plane, u0, v0, u1, v1):
    uv = np.array([[u0, v0], [u1, v0], [u1, v1], [u0, v1]])
    return PlanarPolygon(plane, PlaneFrame.for_plane(plane), uv)


@pytest.fixture
def wall_voters(make_measurement):
    """Twelve patches on the x = -2 wall spanning slightly past its neighbours."""
    plane = WALLS[0]
    source = make_measurement()
    return [GlobalMeasurement(source, plane, wall_patch(plane, -2.3, -1.4, 2.3, 0.9)) for _ in range(12)]


@pytest.fixture
def wall_cluster():
    plane = WALLS[0]
    return PlaneCluster(
        index=0,
        weight=1.0,
        mean=plane_feature(plane),
        covariance=np.eye(4) * 1e-4,
        members=tuple(range(12)),
        plane=plane,
    )


class TestOverlap:
    """Test suite for voter/candidate overlap fractions"""

    def test_voter_inside_candidate(self):
        plane = Plane(np.array([0.0, 0.0, 1.0]), 0.0)
        i_vc, i_cv = overlap_fractions(square_patch(plane, 1.0), square_patch(plane, 2.0))
        assert i_vc == pytest.approx(1.0)
        assert i_cv == pytest.approx(0.25)

    def test_voter_half_outside(self):
        plane = Plane(np.array([0.0, 0.0, 1.0]), 0.0)
        voter = square_patch(plane, 1.0, center=(1.0, 0.0))
        i_vc, i_cv = overlap_fractions(voter, square_patch(plane, 2.0))
        assert i_vc == pytest.approx(0.5)
        assert i_cv == pytest.approx(0.125)

    def test_disjoint(self):
        plane = Plane(np.array([0.0, 0.0, 1.0]), 0.0)
        voter = square_patch(plane, 1.0, center=(5.0, 5.0))
        assert overlap_fractions(voter, square_patch(plane, 2.0)) == (0.0, 0.0)


class TestAccumulation:
    """Test suite for energy accumulation"""

    def test_hand_example_multiply(self):
        """
        Test raw energy 0.3 with two of three inliers under the corrected mode
        """
        result = accumulate_votes(HAND_FRACTIONS, VotingParams(v_min=0))
        assert result.inliers == 2
        assert result.voters_total == 3
        assert result.raw_energy == pytest.approx(0.3)
        assert result.ratio == pytest.approx(2.0 / 3.0)
        assert result.energy == pytest.approx(0.3 * 4.0 / 9.0)
        assert not result.accepted

    def test_hand_example_divide(self):
        params = VotingParams(v_min=0, min_inliers=2, e_min=0.5, ratio_mode=RatioMode.DIVIDE_BY_RATIO)
        result = accumulate_votes(HAND_FRACTIONS, params)
        assert result.energy == pytest.approx(0.675)
        assert result.accepted

    def test_thresholds_are_strict(self):
        result = accumulate_votes([(0.7, 0.5), (0.9, 0.2)], VotingParams(v_min=0))
        assert result.inliers == 0
        assert result.energy == 0.0

    def test_unprojectable_voters_count_toward_total(self):
        result = accumulate_votes([(0.8, 0.5), None, None, None], VotingParams(v_min=0, a=1.0))
        assert result.inliers == 1
        assert result.voters_total == 4
        assert result.energy == pytest.approx(0.2 * 0.25)

    def test_v_min(self):
        fractions = [(0.8, 0.5)] * 9
        assert not accumulate_votes(fractions, VotingParams(v_min=10)).accepted
        assert accumulate_votes(fractions + [(0.8, 0.5)], VotingParams(v_min=10)).accepted

    def test_min_inliers(self):
        """
        Test that a strong energy from too few inliers is still rejected
        """
        fractions = [(0.75, 0.5)] * 4 + [(0.1, 0.1)]
        params = VotingParams(v_min=0, a=0.0)
        result = accumulate_votes(fractions, params)
        assert result.energy == pytest.approx(1.0)
        assert not result.accepted
        assert accumulate_votes(fractions + [(0.75, 0.5)], params).accepted

    def test_voters_fully_inside_are_accepted_at_default_threshold(self):
        result = accumulate_votes([(1.0, 0.4)] * 12, VotingParams())
        assert result.inliers == 12
        assert result.energy == 0.0
        assert result.accepted

    def test_no_voters(self):
        result = accumulate_votes([], VotingParams(v_min=0))
        assert (result.energy, result.voters_total, result.accepted) == (0.0, 0, False)

    def test_infinite_e_min_rejects_everything(self):
        result = accumulate_votes([(0.8, 0.5)] * 20, VotingParams(e_min=float("inf")))
        assert result.energy > 0
        assert not result.accepted

    def test_disjoint_voter_never_raises_energy(self):
        base = [(0.8, 0.5), (0.9, 0.3)]
        before = accumulate_votes(base, VotingParams(v_min=0))
        after = accumulate_votes(base + [(0.0, 0.0)], VotingParams(v_min=0))
        assert after.energy < before.energy
        literal = VotingParams(v_min=0, ratio_mode=RatioMode.DIVIDE_BY_RATIO)
        assert accumulate_votes(base + [(0.0, 0.0)], literal).energy > accumulate_votes(base, literal).energy

    def test_exponent_zero_ignores_ratio(self):
        fractions = [(0.8, 0.5), None]
        a = accumulate_votes(fractions, VotingParams(v_min=0, a=0.0))
        b = accumulate_votes(fractions, VotingParams(v_min=0, a=0.0, ratio_mode=RatioMode.DIVIDE_BY_RATIO))
        assert a.energy == b.energy == pytest.approx(0.2)


class TestVoteCandidate:
    """Test suite for voting on a single candidate"""

    def test_partial_overlaps_and_a_stray_voter(self):
        """
        Test twelve voters 80% inside plus one disjoint voter
        """
        plane = WALLS[0]
        candidate = CandidateSegment(cluster_id=0, cell_index=0, polygon=wall_patch(plane, 0.0, 0.0, 2.0, 1.0))
        voters = [wall_patch(plane, -0.2, 0.0, 0.8, 1.0)] * 12 + [wall_patch(plane, 5.0, 0.0, 6.0, 1.0)]
        result = vote_candidate(candidate, voters, VotingParams())
        assert result.inliers == 12
        assert result.voters_total == 13
        assert result.raw_energy == pytest.approx(12 * 0.2)
        assert result.energy == pytest.approx(2.4 * (12.0 / 13.0) ** 2)
        assert result.accepted


class TestVoteAll:
    """Test suite for voting over a candidate set"""

    def test_middle_cell_accepted(self, wall_voters, wall_cluster):
        candidates = generate_candidates(WALLS, FLOOR, CEILING, BOX, cluster_ids=[0, 1, 2, 3])
        voted = vote_all(candidates, [wall_cluster], wall_voters, VotingParams())
        accepted = [c for c in voted if c.accepted]
        assert len(accepted) == 1
        assert accepted[0].cluster_id == 0
        assert accepted[0].area == pytest.approx(4.0 * 2.5)
        assert accepted[0].inliers == 12
        assert accepted[0].energy == pytest.approx(12 * (1.0 - 4.0 / 4.6))
        assert all(c.voters_total == 0 for c in voted if c.cluster_id != 0)

    def test_worker_count_does_not_change_result(self, wall_voters, wall_cluster):
        candidates = generate_candidates(WALLS, FLOOR, CEILING, BOX, cluster_ids=[0, 1, 2, 3])
        serial = vote_all(candidates, [wall_cluster], wall_voters, VotingParams(), workers=1)
        threaded = vote_all(candidates, [wall_cluster], wall_voters, VotingParams(), workers=4)
        assert [(c.cluster_id, c.cell_index, c.energy, c.accepted) for c in serial] == [
            (c.cluster_id, c.cell_index, c.energy, c.accepted) for c in threaded
        ]

    def test_n_voters_limits_total(self, wall_voters, wall_cluster):
        candidates = generate_candidates(WALLS, FLOOR, CEILING, BOX, cluster_ids=[0, 1, 2, 3])
        voted = vote_all(candidates, [wall_cluster], wall_voters, VotingParams(), n_voters=5)
        assert {c.voters_total for c in voted if c.cluster_id == 0} == {5}

    def test_band_clipping_turns_tall_voters_into_inliers(self, make_measurement, wall_cluster):
        """
        Test voters running far past the floor and ceiling

        Unclipped, only 2.5 m of their 7 m height overlaps the middle cell.
        """
        plane = WALLS[0]
        corners = np.array([[-2.0, -1.8, -4.0], [-2.0, 1.8, -4.0], [-2.0, 1.8, 3.0], [-2.0, -1.8, 3.0]])
        source = make_measurement()
        voters = [GlobalMeasurement(source, plane, PlanarPolygon.from_points(plane, corners)) for _ in range(12)]
        candidates = generate_candidates(WALLS, FLOOR, CEILING, BOX, cluster_ids=[0, 1, 2, 3])

        loose = vote_all(candidates, [wall_cluster], voters, VotingParams())
        assert not any(c.accepted for c in loose)

        clipped = vote_all(candidates, [wall_cluster], voters, VotingParams(), band=(FLOOR, CEILING))
        accepted = [c for c in clipped if c.accepted]
        assert len(accepted) == 1
        assert accepted[0].cluster_id == 0
        assert accepted[0].area == pytest.approx(4.0 * 2.5)
        assert accepted[0].inliers == 12
        assert accepted[0].energy == pytest.approx(0.0, abs=1e-9)

    def test_report(self, wall_voters, wall_cluster):
        candidates = generate_candidates(WALLS, FLOOR, CEILING, BOX, cluster_ids=[0, 1, 2, 3])
        report = format_voting_report(vote_all(candidates, [wall_cluster], wall_voters, VotingParams()))
        lines = report.splitlines()
        assert lines[0].split() == ["cluster", "cell", "inliers/total", "raw_energy", "energy", "accepted"]
        assert len(lines) == 13
        assert sum(line.endswith("yes") for line in lines) == 1
