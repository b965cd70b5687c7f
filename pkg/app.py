"""
Program entry point.

    python app.py synth --out runs/demo
    python app.py reconstruct --out runs/demo --measurements runs/demo/measurements.jsonl --poses runs/demo/poses.traj
    python app.py demo hexagon_room        # synthesise, reconstruct and score a preset from data/

Subcommands other than ``demo`` go straight to the planefusion CLI. When neither
``--config`` nor ``$PLANEFUSION_CONFIG`` is given, ``layout_config.json`` is used.
"""

import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

from planefusion.cli import CONFIG_ENV, load_experiment_config, main as cli_main
from planefusion.errors import ConfigError, PlaneFusionError
from planefusion.layout import export_mesh, read_obj
from planefusion.log import configure_logging
from planefusion.measurements import load_sequence
from planefusion.metrics import compare_layouts
from planefusion.pipeline import reconstruct
from planefusion.synth import room_planes

logger = logging.getLogger("planefusion.app")

ROOT = Path(__file__).resolve().parent
CONFIG_FILE = ROOT / "layout_config.json"
PRESET_DIR = ROOT / "data"


def list_presets(preset_dir: Path = PRESET_DIR) -> List[str]:
    return sorted(p.stem for p in preset_dir.glob("*.json"))


def with_default_config(argv: List[str]) -> List[str]:
    """Point the CLI at ``layout_config.json`` unless a config is already chosen."""
    if not argv or argv[0].startswith("-") or "--config" in argv or os.environ.get(CONFIG_ENV):
        return argv
    if not CONFIG_FILE.exists():
        return argv
    return [argv[0], "--config", str(CONFIG_FILE), *argv[1:]]


def run_preset(name: str, out_root: Optional[Path] = None, force: bool = True) -> Dict:
    """Synthesise, reconstruct and compare one preset; returns a summary dict."""
    if name not in list_presets():
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(list_presets())}")
    cfg_path = PRESET_DIR / f"{name}.json"
    out = Path(out_root or ROOT / "runs") / name
    synth_args = ["synth", "--config", str(cfg_path), "--out", str(out)] + (["--force"] if force else [])
    code = cli_main(synth_args)
    if code != 0:
        return {"preset": name, "stage": "synth", "exit_code": code}

    experiment = load_experiment_config(str(cfg_path))
    bundle = load_sequence(out / "measurements.jsonl", out / "poses.traj", experiment.intrinsics)
    layout, report = reconstruct(bundle, experiment.pipeline)
    (out / "run_report.json").write_text(report.to_json(), encoding="utf-8")
    summary: Dict = {"preset": name, "stage": "reconstruct", "out": str(out)}
    if layout is None:
        summary.update({"exit_code": 4, "failure": report.failure})
        return summary

    export_mesh(layout, out / "layout.obj", {"preset": name, "seed": experiment.pipeline.seed})
    truth = room_planes(experiment.room)
    truth_walls = truth.walls
    comparison = compare_layouts(layout, truth_walls, gt_extents=truth.wall_extents)
    summary.update(
        {
            "exit_code": 0,
            "walls": layout.wall_count,
            "ground_truth_walls": len(truth_walls),
            "matched_walls": len(comparison.matches),
            "missed_walls": comparison.missed,
            "spurious_walls": comparison.spurious,
            "wall_errors": [
                {"gt_wall": m.gt_wall, "angle_deg": m.angle_deg, "offset_m": m.offset_m} for m in comparison.matches
            ],
            "mesh_groups": sorted(read_obj(out / "layout.obj").groups),
        }
    )
    return summary


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] != "demo":
        return cli_main(with_default_config(argv))

    configure_logging()
    if "--list" in argv:
        print("\n".join(list_presets()))
        return 0
    name = argv[1] if len(argv) > 1 else "square_room"
    try:
        summary = run_preset(name)
    except PlaneFusionError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    print(json.dumps(summary, indent=2, sort_keys=True))
    return int(summary["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
