"""
Command-line interface.

Subcommands: ``synth``, ``reconstruct``, ``eval-planes``, ``eval-2d`` and
``render``. Every run reads one experiment config (``--config`` or the
``PLANEFUSION_CONFIG`` environment variable), applies ``--set section.key=value``
and per-field flags on top, logs the resolved config and writes it next to its
outputs.

Exit codes: 0 success, 2 usage or configuration error, 3 IO or parse error,
4 structured pipeline or evaluation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Type

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from planefusion import __version__
from planefusion.clustering import dump_mixture
from planefusion.config import ConfigModel, read_json
from planefusion.errors import ConfigError, PlaneFusionError, UnknownFrame
from planefusion.geometry import Intrinsics
from planefusion.layout import (
    export_candidates,
    export_mesh,
    read_label_pgm,
    render_layout2d,
    write_label_pgm,
    write_label_ppm,
)
from planefusion.log import configure_logging
from planefusion.measurements import (
    load_sequence,
    read_measurements,
    read_poses,
    save_sequence,
    write_measurements,
)
from planefusion.metrics import (
    ScoredBox,
    detection_ap,
    format_plane_report,
    match_by_iou,
    normal_error_stats,
    pixel_error_2d,
    plane_location_stats,
)
from planefusion.pipeline import PipelineConfig, ReconstructionPipeline
from planefusion.synth import NoiseSpec, RoomSpec, TrajectorySpec, generate_sequence, ground_truth_layout
from planefusion.voting import format_voting_report

logger = logging.getLogger(__name__)

CONFIG_ENV = "PLANEFUSION_CONFIG"
OVERRIDE_PREFIX = "override:"


class ExperimentConfig(ConfigModel):
    """A complete experiment: camera, reconstruction parameters and synthetic scene."""

    intrinsics: Intrinsics = Intrinsics()
    pipeline: PipelineConfig = PipelineConfig()
    room: RoomSpec = RoomSpec()
    trajectory: TrajectorySpec = TrajectorySpec()
    noise: NoiseSpec = NoiseSpec()

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def parse_value(text: str) -> Any:
    """Flag value to a Python value: JSON where possible, infinities, else the string."""
    lowered = text.strip().lower()
    if lowered in ("inf", "+inf", "infinity", "∞"):
        return math.inf
    if lowered in ("-inf", "-infinity"):
        return -math.inf
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    if len(keys) < 2:
        raise ConfigError(f"override {dotted!r} must look like section.key")
    node = data
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override {dotted!r}: {key} is not a section")
        node = child
    node[keys[-1]] = value


def load_experiment_config(
    path: Optional[str] = None, overrides: Sequence[Tuple[str, Any]] = ()
) -> ExperimentConfig:
    """
    Read the experiment file (if any) and apply dotted-key overrides in order.

    Raises:
        ConfigError: unknown keys or out-of-range values.
    """
    data: Dict[str, Any] = read_json(path) if path else {}
    for dotted, value in overrides:
        apply_override(data, dotted, value)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


# Flag generation -------------------------------------------------------------


def iter_config_fields(
    model: Type[BaseModel], prefix: str = ""
) -> Iterator[Tuple[str, Any, Optional[str], str]]:
    """``(dotted key, default, unit, description)`` for every leaf config field."""
    for name, info in model.model_fields.items():
        key = f"{prefix}{name}"
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            yield from iter_config_fields(annotation, key + ".")
            continue
        extra = info.json_schema_extra if isinstance(info.json_schema_extra, dict) else {}
        default = info.default
        if hasattr(default, "value"):
            default = default.value
        yield key, default, extra.get("unit"), info.description or ""


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration keys (override the config file)")
    for key, default, unit, description in iter_config_fields(ExperimentConfig):
        unit_text = f" [{unit}]" if unit and unit != "1" else ""
        group.add_argument(
            f"--{key}",
            dest=OVERRIDE_PREFIX + key,
            metavar="VALUE",
            default=None,
            help=f"{description} (default: {default}){unit_text}".replace("%", "%%"),
        )


def collect_overrides(args: argparse.Namespace) -> List[Tuple[str, Any]]:
    overrides: List[Tuple[str, Any]] = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides.append((key.strip(), parse_value(value)))
    for dest, value in sorted(vars(args).items()):
        if dest.startswith(OVERRIDE_PREFIX) and value is not None:
            overrides.append((dest[len(OVERRIDE_PREFIX):], parse_value(value)))
    return overrides


def resolve_config(args: argparse.Namespace, seed_keys: Sequence[str] = ()) -> ExperimentConfig:
    overrides = collect_overrides(args)
    if args.seed is not None:
        overrides += [(key, args.seed) for key in seed_keys]
    path = args.config or os.environ.get(CONFIG_ENV) or None
    cfg = load_experiment_config(path, overrides)
    logger.info("resolved configuration:\n%s", cfg.to_json())
    return cfg


# Output handling -------------------------------------------------------------


def prepare_outputs(out_dir: Path, names: Sequence[str], force: bool) -> Dict[str, Path]:
    """Create the run directory; refuse to clobber existing outputs without ``force``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / name for name in names}
    existing = [str(p) for p in paths.values() if p.exists()]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    return paths


def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


# Subcommands -----------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, seed_keys=("trajectory.seed",))
    paths = prepare_outputs(
        Path(args.out),
        [
            "measurements.jsonl",
            "poses.traj",
            "ground_truth.obj",
            "ground_truth.json",
            "gt_measurements.jsonl",
            "resolved_config.json",
        ],
        args.force,
    )
    bundle, truth = generate_sequence(cfg.room, cfg.trajectory, cfg.intrinsics, cfg.noise)
    save_sequence(bundle, paths["measurements.jsonl"], paths["poses.traj"])
    write_measurements(paths["gt_measurements.jsonl"], truth.clean_measurements)
    export_mesh(
        ground_truth_layout(cfg.room),
        paths["ground_truth.obj"],
        {"source": "synthetic ground truth", "seed": cfg.trajectory.seed},
    )
    write_text(paths["ground_truth.json"], json.dumps(truth.as_dict(), indent=2, sort_keys=True) + "\n")
    write_text(paths["resolved_config.json"], cfg.to_json())
    print(f"wrote {len(bundle.measurements)} measurements over {len(bundle.poses)} frames to {args.out}")
    return 0


def cmd_reconstruct(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, seed_keys=("pipeline.seed",))
    names = ["layout.obj", "run_report.json", "resolved_config.json"]
    if args.dump_debug:
        names += ["mixture_walls.jsonl", "mixture_floor_ceiling.jsonl", "candidates.obj", "voting_report.txt"]
    paths = prepare_outputs(Path(args.out), names, args.force)
    bundle = load_sequence(args.measurements, args.poses, cfg.intrinsics)

    pipeline = ReconstructionPipeline(cfg.pipeline, workers=args.threads)
    layout, report = pipeline.run(bundle)

    write_text(paths["resolved_config.json"], cfg.to_json())
    write_text(paths["run_report.json"], report.to_json(include_timings=args.timings))
    if args.dump_debug:
        art = pipeline.artifacts
        if art.wall_model is not None:
            dump_mixture(art.wall_model, paths["mixture_walls.jsonl"])
        if art.fc_model is not None:
            dump_mixture(art.fc_model, paths["mixture_floor_ceiling.jsonl"])
        if art.candidates:
            export_candidates(art.candidates, paths["candidates.obj"])
            write_text(paths["voting_report.txt"], format_voting_report(art.candidates))
    if layout is None:
        failure = report.failure or {}
        print(f"reconstruction failed: {failure.get('code')}: {failure.get('message')}")
        return 4
    params = {
        "w_min": cfg.pipeline.w_min,
        "e_min": cfg.pipeline.voting.e_min,
        "min_inliers": cfg.pipeline.voting.min_inliers,
        "ratio_mode": cfg.pipeline.voting.ratio_mode.value,
        "seed": cfg.pipeline.seed,
    }
    export_mesh(layout, paths["layout.obj"], params)
    print(f"layout with {layout.wall_count} walls written to {paths['layout.obj']}")
    return 0


def cmd_eval_planes(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    preds = read_measurements(args.pred)
    gts = read_measurements(args.gt)
    pairs = match_by_iou(preds, gts, args.iou_min)
    if not pairs:
        logger.warning("no prediction matched a ground-truth detection at IoU >= %s", args.iou_min)
    matched = [(preds[i], gts[j]) for i, j in pairs]
    normal = normal_error_stats([(p.plane_cam, g.plane_cam) for p, g in matched])
    location = plane_location_stats(
        [(p.plane_cam, p.bbox, cfg.intrinsics, g.plane_cam) for p, g in matched], stride=args.stride
    )
    ap = detection_ap(
        [ScoredBox.from_measurement(m) for m in preds],
        [ScoredBox.from_measurement(m) for m in gts],
        iou_min=args.iou_min,
    )
    text = format_plane_report(normal, location)
    mean_ap = ap.mean_ap
    text += f"\nmatched pairs: {len(pairs)}\nmAP@{args.iou_min}: " + (
        f"{mean_ap:.4f}" if mean_ap is not None else "n/a"
    ) + "\n"
    print(text, end="")
    if args.out:
        paths = prepare_outputs(Path(args.out), ["plane_metrics.txt", "plane_metrics.json"], args.force)
        write_text(paths["plane_metrics.txt"], text)
        payload = {
            "matched": len(pairs),
            "normal": normal.as_dict(),
            "location": location.as_dict(),
            "detection": ap.as_dict(),
        }
        write_text(paths["plane_metrics.json"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_eval_2d(args: argparse.Namespace) -> int:
    pred = read_label_pgm(args.pred)
    gt = read_label_pgm(args.gt)
    error = pixel_error_2d(pred, gt)
    print(f"pixel error: {error:.2f}%")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.poses:
        poses = read_poses(args.poses)
        if args.frame not in poses:
            raise UnknownFrame(f"frame {args.frame} has no pose in {args.poses}")
    frame = [m for m in read_measurements(args.measurements) if m.frame_id == args.frame]
    stem = f"layout_{args.frame}"
    paths = prepare_outputs(Path(args.out), [f"{stem}.pgm", f"{stem}.ppm"], args.force)
    image = render_layout2d(frame, cfg.intrinsics)
    write_label_pgm(paths[f"{stem}.pgm"], image)
    write_label_ppm(paths[f"{stem}.ppm"], image)
    print(f"rendered {len(frame)} detections of frame {args.frame} to {paths[f'{stem}.pgm']}")
    return 0


# Parser ------------------------------------------------------------------------


def _common_parser(with_config: bool) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"experiment JSON file (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int, default=None, help="override the run seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--out", default="run", help="output directory (default: run)")
    common.add_argument("--log-level", default=None, help="logging level (default: $PLANEFUSION_LOG_LEVEL or INFO)")
    common.add_argument(
        "--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config key (repeatable)"
    )
    if with_config:
        add_config_flags(common)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planefusion",
        description="Fuse per-frame plane detections into a 3D room layout.",
    )
    parser.add_argument("--version", action="version", version=f"planefusion {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser(with_config=True)
    plain = _common_parser(with_config=False)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic measurement sequence")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("reconstruct", parents=[common], help="reconstruct a room layout")
    p.add_argument("--measurements", required=True, help="measurement file (.jsonl)")
    p.add_argument("--poses", required=True, help="trajectory file (.traj)")
    p.add_argument("--dump-debug", action="store_true", help="also write mixtures, candidates and the voting report")
    p.add_argument("--timings", action="store_true", help="include stage timings in the run report")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("eval-planes", parents=[common], help="normal and plane-location errors")
    p.add_argument("--pred", required=True, help="predicted measurements (.jsonl)")
    p.add_argument("--gt", required=True, help="ground-truth measurements (.jsonl)")
    p.add_argument("--iou-min", type=float, default=0.5, help="bbox IoU needed to match (default: 0.5)")
    p.add_argument("--stride", type=int, default=1, help="pixel stride for plane location (default: 1)")
    p.set_defaults(handler=cmd_eval_planes, out=None)

    p = sub.add_parser("eval-2d", parents=[plain], help="2D layout pixel error")
    p.add_argument("--pred", required=True, help="predicted label map (.pgm)")
    p.add_argument("--gt", required=True, help="ground-truth label map (.pgm)")
    p.set_defaults(handler=cmd_eval_2d)

    p = sub.add_parser("render", parents=[common], help="render one frame's 2D layout segmentation")
    p.add_argument("--measurements", required=True, help="measurement file (.jsonl)")
    p.add_argument("--frame", type=int, required=True, help="frame id")
    p.add_argument("--poses", default=None, help="trajectory file; frame must exist in it")
    p.set_defaults(handler=cmd_render)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except PlaneFusionError as exc:
        logger.error("%s", exc)
        print(f"error [{exc.code}]: {exc}")
        return exc.exit_code
    except OSError as exc:
        logger.error("%s", exc)
        print(f"error [io]: {exc}")
        return 3
