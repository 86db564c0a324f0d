"""Command-line surface: track, synth, eval, export-scene.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

from . import evaluate, export, frames_io, pose3d, synth
from .errors import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_INTERNAL,
    EXIT_OK,
    ConfigError,
    DataError,
    InvariantError,
    ToolTrackError,
)

log = logging.getLogger("tooltrack")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="tracker configuration JSON")
    p.add_argument("--input", type=Path, help="input directory or file")
    p.add_argument("--output", type=Path, help="output directory or file")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized presets")
    p.add_argument("--runs", type=int, default=1, help="number of synthetic runs")
    p.add_argument(
        "--box-mode",
        choices=frames_io.BOX_MODES,
        help="override the configured box mode",
    )
    p.add_argument(
        "--angle-convention",
        choices=frames_io.ANGLE_CONVENTIONS,
        help="override the configured roll/pitch angle grouping",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tooltrack",
        description=(
            "Monocular 3D instrument tracking from segmentation label maps: "
            "per-part oriented boxes, frame-to-frame 3D motion, synthetic "
            "validation, and error reports."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run the tracking pipeline on a frame dir")
    _add_common_flags(p_track)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument(
        "preset",
        choices=sorted(synth.PRESETS),
        help="synthetic motion preset",
    )
    p_synth.add_argument("--frames", type=int, default=None, help="frame count")
    p_synth.add_argument("--vx", type=float, default=0.5, help="x speed, px/frame")
    p_synth.add_argument("--vy", type=float, default=0.3, help="y speed, px/frame")
    p_synth.add_argument("--z0", type=float, default=2.0, help="start depth")
    p_synth.add_argument("--z1", type=float, default=2.4, help="end depth")
    p_synth.add_argument(
        "--rate-deg", type=float, default=0.5, help="rotation rate, degrees/frame"
    )
    _add_common_flags(p_synth)

    p_eval = sub.add_parser("eval", help="compare a track against ground truth")
    p_eval.add_argument(
        "--no-figures", action="store_true", help="skip figure rendering"
    )
    _add_common_flags(p_eval)

    p_scene = sub.add_parser(
        "export-scene", help="write a replayable scene file from a track JSON"
    )
    _add_common_flags(p_scene)
    return parser


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"missing required flag --{name}")
    return value


def cmd_track(args) -> int:
    cfg = frames_io.load_config(_require(args.config, "config"))
    cfg = frames_io.with_overrides(
        cfg, box_mode=args.box_mode, angle_convention=args.angle_convention
    )
    in_dir = _require(args.input, "input")
    out_dir = Path(_require(args.output, "output"))
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    frames = frames_io.load_sequence(in_dir)
    t1 = time.perf_counter()
    results = pose3d.track_sequence_2d(
        frames,
        cfg.parts,
        box_mode=cfg.tracker.box_mode,
        overlap=cfg.overlap,
        link_gap=cfg.tracker.link_gap,
    )
    t2 = time.perf_counter()
    track = pose3d.track_from_results(results, cfg.camera, cfg.tracker)
    t3 = time.perf_counter()

    export.write_boxes_csv(results, out_dir / "boxes.csv")
    export.write_track_csv(track, out_dir / "track.csv")
    export.write_track_json(track, out_dir / "track.json")

    n = len(frames)
    total_ms = (t3 - t0) * 1e3
    print(
        f"tracked {n} frames x {len(cfg.parts)} parts: "
        f"load {1e3 * (t1 - t0):.1f} ms, boxes {1e3 * (t2 - t1):.1f} ms, "
        f"pose {1e3 * (t3 - t2):.1f} ms, total {total_ms:.1f} ms "
        f"({total_ms / n:.3f} ms/frame)"
    )
    print(f"wrote {out_dir / 'boxes.csv'}, {out_dir / 'track.csv'}, {out_dir / 'track.json'}")
    return EXIT_OK


def _synth_script(args, frames: int):
    preset = args.preset
    if preset == "static":
        return synth.static(frames=frames)
    if preset == "translate_xy":
        return synth.translate_xy(vx=args.vx, vy=args.vy, frames=frames)
    if preset == "dolly":
        return synth.dolly(z0=args.z0, z1=args.z1, frames=frames)
    if preset == "yaw_spin":
        return synth.yaw_spin(rate=math.radians(args.rate_deg), frames=frames)
    if preset == "pitch_tilt":
        return synth.pitch_tilt(rate=math.radians(args.rate_deg), frames=frames)
    if preset == "combined":
        return synth.combined(seed=args.seed, frames=frames)
    raise ConfigError(
        f"unknown preset {preset!r}; valid presets: {', '.join(sorted(synth.PRESETS))}"
    )


_DEFAULT_FRAMES = {
    "static": 10,
    "translate_xy": 60,
    "dolly": 50,
    "yaw_spin": 30,
    "pitch_tilt": 30,
    "combined": 30,
}


def cmd_synth(args) -> int:
    out_dir = Path(_require(args.output, "output"))
    frames_n = args.frames or _DEFAULT_FRAMES[args.preset]
    runs = max(1, args.runs)
    run_dirs = (
        [out_dir]
        if runs == 1
        else [out_dir / f"run_{i + 1:02d}" for i in range(runs)]
    )
    for i, run_dir in enumerate(run_dirs):
        run_dir.mkdir(parents=True, exist_ok=True)
        run_args = argparse.Namespace(**vars(args))
        run_args.seed = args.seed + i
        script = _synth_script(run_args, frames_n)
        label_frames, gt = synth.generate(script)
        frames_io.save_sequence(label_frames, run_dir)
        synth.write_ground_truth(gt, run_dir / "ground_truth.csv")
        frames_io.save_config(synth.default_config(), run_dir / "config.json")
        print(f"wrote {frames_n} frames + ground truth to {run_dir}")
    return EXIT_OK


def _eval_one(run_dir: Path, out_dir: Path, make_figures: bool):
    track_json = run_dir / "track.json"
    track_csv = run_dir / "track.csv"
    gt_path = run_dir / "ground_truth.csv"
    if not gt_path.exists():
        raise DataError(f"no ground_truth.csv in {run_dir}")
    if track_json.exists():
        track = export.read_track_json(track_json)
    elif track_csv.exists():
        track = export.read_track_csv(track_csv)
    else:
        raise DataError(f"no track.json or track.csv in {run_dir}")
    gt = synth.read_ground_truth(gt_path)
    report = evaluate.compare_3d(track, gt)
    out_dir.mkdir(parents=True, exist_ok=True)
    text, csv_text = evaluate.report_render(report)
    (out_dir / "report_3d.txt").write_text(text, encoding="utf-8")
    (out_dir / "report_3d.csv").write_text(csv_text, encoding="utf-8")
    if make_figures:
        from . import figures

        figures.render_report_figure(report, out_dir / "errors.png")
        figures.render_track_figure(track, gt, out_dir / "timeseries.png")
    print(text, end="")
    return report


def cmd_eval(args) -> int:
    in_dir = Path(_require(args.input, "input"))
    out_dir = Path(args.output) if args.output else in_dir / "report"
    make_figures = not args.no_figures

    run_dirs = sorted(d for d in in_dir.glob("run_*") if d.is_dir())
    if not run_dirs:
        _eval_one(in_dir, out_dir, make_figures)
        print(f"report written to {out_dir}")
        return EXIT_OK

    reports = []
    for run_dir in run_dirs:
        reports.append(_eval_one(run_dir, out_dir / run_dir.name, make_figures))
    aggregate = evaluate.aggregate_runs(reports)
    text, csv_text = evaluate.report_render(aggregate)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "aggregate_3d.txt").write_text(text, encoding="utf-8")
    (out_dir / "aggregate_3d.csv").write_text(csv_text, encoding="utf-8")
    if make_figures:
        from . import figures

        figures.render_report_figure(aggregate, out_dir / "aggregate_errors.png")
    print(text, end="")
    print(f"aggregate over {len(reports)} runs written to {out_dir}")
    return EXIT_OK


def cmd_export_scene(args) -> int:
    in_path = Path(_require(args.input, "input"))
    out_path = Path(_require(args.output, "output"))
    track = export.read_track_json(in_path)
    scene = export.export_scene(track, out_path)
    print(f"wrote {len(scene)} scene frames to {out_path}")
    return EXIT_OK


_COMMANDS = {
    "track": cmd_track,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "export-scene": cmd_export_scene,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ToolTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
