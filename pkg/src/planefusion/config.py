"""
Configuration primitives shared by every module.

Holds the numerical tolerance header, the base class used by all pydantic
configuration sections and small helpers to read them from JSON files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field

from planefusion.errors import ConfigError


class ConfigModel(BaseModel):
    """Base for configuration sections: immutable, unknown keys rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")


def unit_field(default: Any, unit: str, description: str, **constraints: Any) -> Any:
    """Declare a field whose unit is shown by ``--help``."""
    return Field(
        default,
        description=description,
        json_schema_extra={"unit": unit},
        **constraints,
    )


class Tolerances(BaseModel):
    """Numerical tolerances used across geometry, clustering and candidates."""

    model_config = ConfigDict(validate_assignment=True)

    # ||n|| below this is not a plane
    degenerate_norm: float = 1e-12
    # |d| below this is treated as zero during canonicalization
    zero_offset: float = 1e-12
    rotation: float = 1e-9
    # |n . r| below this means the ray never meets the plane
    ray_parallel: float = 1e-9
    # ||n1 x n2|| below this means no intersection line
    parallel_planes: float = 1e-6
    min_patch_area: float = 1e-8
    # cells thinner than this are dropped during arrangement splitting
    min_cell_area: float = 1e-9
    max_projection_angle_deg: float = 60.0
    # two wall planes closer than this never cut each other
    cut_parallel_deg: float = 2.0
    depth_tie: float = 1e-9


TOLERANCES = Tolerances()


def read_json(path: str | Path) -> Dict[str, Any]:
    """Read a JSON object from ``path``; IO errors propagate as OSError."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return data

