"""
Pytest configuration and shared fixtures for planefusion tests.

This module provides common test fixtures, configuration, and utilities
used across all test modules in the test suite.
"""

import json
from pathlib import Path
from typing import Callable, Dict, Any, Tuple

import numpy as np
import pytest

from planefusion.geometry import BBox, Intrinsics, Plane, canonicalize
from planefusion.measurements import Measurement, SequenceBundle, SurfaceClass
from planefusion.synth import GroundTruth, NoiseSpec, RoomSpec, TrajectorySpec, generate_sequence

from tests.fixtures.sample_configs import SAMPLE_EXPERIMENT_CONFIG, SMALL_TRAJECTORY
from tests.fixtures.test_data import fronto_plane


@pytest.fixture
def temp_workspace(tmp_path: Path) -> Path:
    """
    Create a temporary workspace directory for testing.

    Returns:
        Path: Temporary directory with ``configs`` and ``runs`` subdirectories
    """
    (tmp_path / "configs").mkdir()
    (tmp_path / "runs").mkdir()
    return tmp_path


@pytest.fixture
def intrinsics() -> Intrinsics:
    """Default 320x240 pinhole camera."""
    return Intrinsics()


@pytest.fixture
def square_room() -> RoomSpec:
    """
    Provide the default 4 x 4 m room.

    Returns:
        RoomSpec: Square footprint (1,1)-(5,5), 2.5 m high
    """
    return RoomSpec()


@pytest.fixture
def sample_experiment_config() -> Dict[str, Any]:
    """
    Provide a small but complete experiment configuration.

    Returns:
        Dict[str, Any]: Experiment config data with every section present
    """
    return {section: dict(values) for section, values in SAMPLE_EXPERIMENT_CONFIG.items()}


@pytest.fixture
def experiment_config_file(temp_workspace: Path, sample_experiment_config: Dict[str, Any]) -> Path:
    """
    Write the sample experiment configuration to disk.

    Args:
        temp_workspace: Temporary workspace directory
        sample_experiment_config: Experiment config data

    Returns:
        Path: Path to the created config file
    """
    path = temp_workspace / "configs" / "experiment.json"
    path.write_text(json.dumps(sample_experiment_config, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def clean_square_sequence() -> Tuple[SequenceBundle, GroundTruth]:
    """
    Noise-free 200-frame orbit in the default square room.

    Returns:
        Tuple[SequenceBundle, GroundTruth]: Measurements with poses, plus the truth record
    """
    return generate_sequence(RoomSpec(), TrajectorySpec(), Intrinsics(), NoiseSpec())


@pytest.fixture(scope="session")
def small_square_sequence() -> Tuple[SequenceBundle, GroundTruth]:
    """
    Short noise-free sequence for fast checks.

    Returns:
        Tuple[SequenceBundle, GroundTruth]: Measurements with poses, plus the truth record
    """
    return generate_sequence(RoomSpec(), TrajectorySpec(**SMALL_TRAJECTORY), Intrinsics(), NoiseSpec())


@pytest.fixture
def make_measurement() -> Callable[..., Measurement]:
    """
    Factory for camera-frame measurements.

    Returns:
        Callable: ``make(frame, bbox, plane=None, klass=WALL, score=1.0)``; plane
        defaults to a fronto-parallel plane 2 m ahead
    """

    def make(
        frame: int = 1,
        bbox=(60.0, 20.0, 260.0, 220.0),
        plane=None,
        klass: SurfaceClass = SurfaceClass.WALL,
        score: float = 1.0,
    ) -> Measurement:
        plane = fronto_plane(2.0) if plane is None else canonicalize(plane)
        return Measurement(frame, klass, BBox.from_list(bbox), plane, score)

    return make


def pytest_configure(config):
    """
    Configure pytest with custom markers and settings.
    """
    config.addinivalue_line("markers", "unit: marks tests as unit tests (deselect with '-m \"not unit\"')")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")
    config.addinivalue_line("markers", "e2e: marks tests as end-to-end tests")
    config.addinivalue_line("markers", "bdd: marks tests as behaviour-driven scenarios")
    config.addinivalue_line("markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')")


def pytest_collection_modifyitems(config, items):
    """
    Modify test collection to add markers based on file location.
    """
    for item in items:
        path = str(item.fspath)
        if "/unit/" in path:
            item.add_marker(pytest.mark.unit)
        elif "/integration/" in path:
            item.add_marker(pytest.mark.integration)
        elif "/e2e/" in path:
            item.add_marker(pytest.mark.e2e)
        elif "/bdd/" in path:
            item.add_marker(pytest.mark.bdd)


# Custom assertion helpers
class CustomAssertions:
    """Custom assertion methods for planefusion testing."""

    @staticmethod
    def assert_plane_close(actual: Plane, expected: Plane, atol: float = 1e-9) -> None:
        """
        Assert that two planes agree after canonicalization.

        Args:
            actual: Plane under test
            expected: Reference plane
            atol: Absolute tolerance on every component of ``[n, d]``
        """
        a, e = canonicalize(actual), canonicalize(expected)
        assert np.allclose(a.vector, e.vector, rtol=0.0, atol=atol), f"{a!r} != {e!r}"

    @staticmethod
    def assert_canonical(plane: Plane) -> None:
        """
        Assert unit normal and canonical sign.

        Args:
            plane: Plane to validate
        """
        assert abs(float(np.linalg.norm(plane.normal)) - 1.0) < 1e-12
        assert plane.is_canonical, f"{plane!r} is not canonical"

    @staticmethod
    def assert_on_plane(points: np.ndarray, plane: Plane, atol: float = 1e-6) -> None:
        """
        Assert that every point satisfies the plane equation.

        Args:
            points: ``(N, 3)`` array
            plane: Plane the points should lie on
            atol: Allowed residual in metres
        """
        residual = np.abs(plane.signed_distance(np.asarray(points).reshape(-1, 3)))
        assert residual.max() <= atol, f"max residual {residual.max():.3g}"


# Make custom assertions available as pytest fixture
@pytest.fixture
def assertions():
    """Provide custom assertion helpers."""
    return CustomAssertions()
