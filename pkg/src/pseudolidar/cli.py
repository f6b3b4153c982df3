"""Command-line entry point.

Subcommands:
    run    process a frame list into velodyne .bin clouds (plus optional
           PLY / pillar dump / disparity PNG outputs)
    eval   stereo 3-pixel error or detection AP over result directories
    bench  repeated pipeline timing with per-stage statistics

Exit codes: 0 success, 1 partial failure (some frame failed), 2 config
or usage error.
"""

import argparse
import logging
import os
import sys

from .config import PipelineConfig
from .errors import ConfigError, PseudoLidarError
from .pipeline import (
    detection_report_csv,
    format_detection_report,
    run_bench,
    run_eval_detection,
    run_eval_stereo,
    run_pipeline,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _read_frames(spec: str):
    """--frames accepts a comma-separated id list or a file of ids."""
    if os.path.isfile(spec):
        with open(spec) as fh:
            return [line.strip() for line in fh if line.strip()]
    return [tok for tok in (t.strip() for t in spec.split(",")) if tok]


def _common_overrides(args) -> dict:
    overrides = {}
    if args.out is not None:
        overrides["output.dir"] = args.out
    if args.de is not None:
        overrides["de.enabled"] = args.de
    if args.sparsing is not None:
        overrides["dd.enabled"] = "on" if args.sparsing == "dd" else "off"
        overrides["ad.enabled"] = "on" if args.sparsing == "ad" else "off"
    if args.pillar_size is not None:
        overrides["pillar.size_x"] = str(args.pillar_size)
        overrides["pillar.size_y"] = str(args.pillar_size)
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    if args.seed is not None:
        overrides["ad.seed"] = str(args.seed)
    return overrides


def _add_common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--frames", help="comma-separated frame ids, or a file with one id per line")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--de", choices=("on", "off"), help="toggle sub-pixel refinement")
    parser.add_argument(
        "--sparsing", choices=("none", "dd", "ad"), help="density reduction scheme"
    )
    parser.add_argument("--pillar-size", type=float, help="square BEV pillar edge, meters")
    parser.add_argument("--threads", type=int, help="frame-level worker threads")
    parser.add_argument("--seed", type=int, help="adaptive-downsampling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudolidar",
        description="Stereo pseudo-lidar pipeline: SGM, refinement, sparsification, pillars",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="process frames into point clouds")
    _add_common(p_run)

    p_eval = sub.add_parser("eval", help="evaluate predictions against ground truth")
    _add_common(p_eval)
    p_eval.add_argument("--mode", choices=("stereo", "detection"), required=True)
    p_eval.add_argument("--pred", required=True, help="prediction directory")
    p_eval.add_argument("--gt", required=True, help="ground-truth directory")
    p_eval.add_argument("--interp", type=int, choices=(11, 40), default=40)

    p_bench = sub.add_parser("bench", help="time the pipeline")
    _add_common(p_bench)
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument(
        "--backend", choices=("numba", "numpy"), help="kernel backend for this run"
    )
    return parser


def _load_config(args) -> PipelineConfig:
    frames = _read_frames(args.frames) if args.frames else []
    return PipelineConfig.load(
        config_path=args.config, overrides=_common_overrides(args), frames=frames
    )


def _cmd_run(args) -> int:
    summary = run_pipeline(_load_config(args))
    print(summary.format_text())
    return summary.exit_code


def _cmd_eval(args) -> int:
    config = _load_config(args)
    if args.mode == "stereo":
        report = run_eval_stereo(config, args.pred, args.gt)
        csv_lines = ["region,three_pixel_error"]
        for tag in ("noc", "all"):
            if tag in report:
                print(f"3-pixel error ({tag}): {report[tag] * 100.0:.2f}%")
                csv_lines.append(f"{tag},{report[tag]:.6f}")
        csv_text = "\n".join(csv_lines) + "\n"
    else:
        rows = run_eval_detection(config, args.pred, args.gt, interp=args.interp)
        print(format_detection_report(rows), end="")
        csv_text = detection_report_csv(rows)
    out_dir = config["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, f"eval_{args.mode}.csv")
    with open(report_path, "w") as fh:
        fh.write(csv_text)
    print(f"report written to {report_path}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.backend:
        from ._backend import set_backend

        set_backend(args.backend)
    config = _load_config(args)
    report = run_bench(config, args.repeats)
    print(report.format_text(), end="")
    out_dir = config["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "bench.csv")
    with open(report_path, "w") as fh:
        fh.write(report.to_csv())
    print(f"report written to {report_path}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "eval": _cmd_eval, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PseudoLidarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
