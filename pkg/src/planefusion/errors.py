"""
Exception hierarchy for planefusion.

Every error carries a stable ``code`` (echoed in run reports) and the CLI
``exit_code`` it maps to: 2 for configuration/usage, 3 for IO/parse and 4 for
structured pipeline or evaluation failures.
"""

from __future__ import annotations

from typing import Any


class PlaneFusionError(Exception):
    """Base class for all planefusion errors."""

    code = "error"
    exit_code = 4

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": str(self)}


class ConfigError(PlaneFusionError):
    code = "config_error"
    exit_code = 2


# Geometry ------------------------------------------------------------------


class GeometryError(PlaneFusionError):
    code = "geometry_error"


class DegeneratePlane(GeometryError):
    code = "degenerate_plane"


class RayParallel(GeometryError):
    code = "ray_parallel"


class BehindCamera(GeometryError):
    code = "behind_camera"


class DegeneratePatch(GeometryError):
    code = "degenerate_patch"


class ParallelPlanes(GeometryError):
    code = "parallel_planes"


class NearPerpendicular(GeometryError):
    code = "near_perpendicular"


# Data / IO -----------------------------------------------------------------


class DataError(PlaneFusionError):
    code = "data_error"
    exit_code = 3


class ParseError(DataError):
    code = "parse_error"

    def __init__(self, line: int, reason: str, source: str | None = None):
        self.line = line
        self.reason = reason
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {reason}")


class MissingPose(DataError):
    code = "missing_pose"

    def __init__(self, frame_id: int):
        self.frame_id = frame_id
        super().__init__(f"no pose for frame {frame_id}")


class InvariantViolation(DataError):
    code = "invariant_violation"

    def __init__(self, record: Any, reason: str):
        self.record = record
        self.reason = reason
        super().__init__(f"{reason}: {record!r}")


class DimensionMismatch(DataError):
    code = "dimension_mismatch"
    exit_code = 2


class UnknownFrame(DataError):
    code = "unknown_frame"
    exit_code = 2


# Mixture model --------------------------------------------------------------


class ModelError(PlaneFusionError):
    code = "model_error"


class TooFewSamples(ModelError):
    code = "too_few_samples"


class SingularCovariance(ModelError):
    code = "singular_covariance"


class NoPlanesSelected(ModelError):
    code = "no_planes_selected"


# Layout construction --------------------------------------------------------


class LayoutError(PlaneFusionError):
    code = "layout_error"


class NoMeasurements(LayoutError):
    code = "no_measurements"


class DegenerateBounds(LayoutError):
    code = "degenerate_bounds"


class EmptyArrangement(LayoutError):
    code = "empty_arrangement"


class NoHorizontalCluster(LayoutError):
    code = "no_horizontal_cluster"


class AmbiguousNormal(LayoutError):
    code = "ambiguous_normal"


class EmptyLayout(LayoutError):
    code = "empty_layout"


# Evaluation -----------------------------------------------------------------


class EvaluationError(PlaneFusionError):
    code = "evaluation_error"


class LengthMismatch(EvaluationError):
    code = "length_mismatch"


class EmptyBatch(EvaluationError):
    code = "empty_batch"


class EmptyInput(EvaluationError):
    code = "empty_input"


# Synthesis ------------------------------------------------------------------


class SynthesisError(PlaneFusionError):
    code = "synthesis_error"
    exit_code = 2


class InvalidFootprint(SynthesisError):
    code = "invalid_footprint"


class CameraOutsideRoom(SynthesisError):
    code = "camera_outside_room"
