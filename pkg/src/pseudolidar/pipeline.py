"""Batch orchestration of the stereo-to-pillars pipeline.

Per frame: load stereo pair -> census -> cost volume -> SGM aggregation,
winner-take-all and LR check -> optional sub-pixel refinement -> depth
-> optional direct decimation -> cloud, crop -> optional adaptive
thinning -> pillars -> outputs.  A failing frame is logged and skipped;
it never aborts the batch.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import costvolume, kitti_io, metrics, pointcloud, refine, sgm
from .config import PipelineConfig
from .errors import ConfigError, MissingCounterpart
from .pillars import build_pillars, write_pillar_dump
from .types import StereoFrame

log = logging.getLogger("pseudolidar")

STAGES = ("census", "cost_volume", "sgm", "refine", "cloud", "pillars", "io")


@dataclass
class FrameResult:
    frame_id: str
    ok: bool
    num_points: int = 0
    num_pillars: int = 0
    error: Optional[str] = None


@dataclass
class RunSummary:
    results: List[FrameResult] = field(default_factory=list)
    timings: List[Tuple[str, float]] = field(default_factory=list)

    @property
    def frames_processed(self) -> int:
        return sum(1 for r in self.results if r.ok)

    @property
    def frames_failed(self) -> int:
        return sum(1 for r in self.results if not r.ok)

    @property
    def points_emitted(self) -> int:
        return sum(r.num_points for r in self.results if r.ok)

    @property
    def exit_code(self) -> int:
        return 1 if self.frames_failed else 0

    def format_text(self) -> str:
        lines = [
            f"frames processed: {self.frames_processed}",
            f"frames failed:    {self.frames_failed}",
            f"points emitted:   {self.points_emitted}",
            "",
            metrics.stage_timer_report(self.timings).format_text(),
        ]
        return "\n".join(lines)


class _StageClock:
    """Accumulates wall time per pipeline stage for one frame."""

    def __init__(self):
        self.samples = {name: 0.0 for name in STAGES}
        self._t0 = None
        self._stage = None

    def start(self, stage: str):
        self._stage = stage
        self._t0 = time.perf_counter()

    def stop(self):
        self.samples[self._stage] += time.perf_counter() - self._t0
        self._stage = None

    def as_samples(self) -> List[Tuple[str, float]]:
        return [(name, self.samples[name]) for name in STAGES]


def process_frame(frame: StereoFrame, config: PipelineConfig):
    """Run the in-memory pipeline on one loaded frame.

    Returns (cloud, pillar grid, refined disparity map, stage samples).
    """
    clock = _StageClock()

    clock.start("census")
    window = config.census_window
    census_left = costvolume.census_transform(frame.left, window)
    census_right = costvolume.census_transform(frame.right, window)
    clock.stop()

    clock.start("cost_volume")
    volume = costvolume.build_cost_volume(census_left, census_right, config["max_disparity"])
    clock.stop()

    clock.start("sgm")
    params = config.sgm_params
    aggregated = sgm.aggregate(volume, params)
    disparity = sgm.winner_take_all(aggregated)
    right = sgm.right_disparity(aggregated)
    disparity = sgm.lr_consistency(disparity, right, params.lr_threshold)
    clock.stop()

    clock.start("refine")
    if config["de.enabled"]:
        disparity = refine.subpixel_refine(disparity, volume)
    clock.stop()

    clock.start("cloud")
    depth = pointcloud.disparity_to_depth(disparity, frame.calib, config["d_min"])
    clock.stop()

    clock.start("refine")
    if config["dd.enabled"]:
        depth = refine.downsample_direct(depth)
    clock.stop()

    clock.start("cloud")
    cloud = pointcloud.depth_to_cloud(depth, frame.calib)
    cloud = pointcloud.crop_scope(cloud, config.scope)
    clock.stop()

    clock.start("refine")
    if config["ad.enabled"]:
        cloud = refine.downsample_adaptive(cloud, config.adaptive_policy)
    clock.stop()

    clock.start("pillars")
    grid = build_pillars(cloud, config.pillar_config)
    clock.stop()

    return cloud, grid, disparity, clock

def _frame_paths(config: PipelineConfig, frame_id: str):
    return (
        os.path.join(config["input.left_dir"], f"{frame_id}.png"),
        os.path.join(config["input.right_dir"], f"{frame_id}.png"),
        os.path.join(config["input.calib_dir"], f"{frame_id}.txt"),
    )


def _run_one(config: PipelineConfig, frame_id: str):
    clock_io = 0.0
    t0 = time.perf_counter()
    frame = kitti_io.load_stereo_frame(*_frame_paths(config, frame_id), frame_id=frame_id)
    clock_io += time.perf_counter() - t0

    cloud, grid, disparity, clock = process_frame(frame, config)

    out_dir = config["output.dir"]
    t0 = time.perf_counter()
    kitti_io.write_velodyne_bin(cloud, os.path.join(out_dir, f"{frame_id}.bin"))
    if config["output.write_ply"]:
        kitti_io.write_ply(cloud, os.path.join(out_dir, f"{frame_id}.ply"))
    if config["output.write_pillars"]:
        write_pillar_dump(grid, os.path.join(out_dir, f"{frame_id}.pillars.txt"))
    if config["output.write_disparity_png"]:
        kitti_io.write_disparity_png(disparity, os.path.join(out_dir, f"{frame_id}.png"))
    clock_io += time.perf_counter() - t0

    clock.samples["io"] += clock_io
    result = FrameResult(
        frame_id=frame_id, ok=True, num_points=len(cloud), num_pillars=grid.num_pillars
    )
    return result, clock.as_samples()


def run_pipeline(config: PipelineConfig) -> RunSummary:
    """Process every configured frame; skip-and-log on per-frame failure."""
    for key in ("input.left_dir", "input.right_dir", "input.calib_dir"):
        if not config[key] or not os.path.isdir(config[key]):
            raise ConfigError(f"{key} does not point to an existing directory: {config[key]!r}")
    os.makedirs(config["output.dir"], exist_ok=True)

    summary = RunSummary()
    threads = max(1, config["threads"])

    def job(frame_id):
        try:
            return _run_one(config, frame_id)
        except Exception as exc:  # skip-and-log policy: a bad frame never aborts the batch
            log.error("frame %s failed: %s", frame_id, exc)
            return FrameResult(frame_id=frame_id, ok=False, error=str(exc)), []

    if threads == 1:
        outcomes = [job(frame_id) for frame_id in config.frames]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(job, config.frames))
    for result, samples in outcomes:
        summary.results.append(result)
        summary.timings.extend(samples)
    return summary


def run_bench(config: PipelineConfig, repeats: int) -> metrics.StageReport:
    """Latency benchmark: one untimed warm-up pass, then `repeats` timed
    passes over the configured frames."""
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    run_pipeline(config)  # warm-up: JIT compilation, page cache
    samples = []
    for _ in range(repeats):
        summary = run_pipeline(config)
        samples.extend(summary.timings)
    return metrics.stage_timer_report(samples)


def _frame_ids_in(directory: str, suffix: str) -> set:
    return {name[: -len(suffix)] for name in os.listdir(directory) if name.endswith(suffix)}


def run_eval_stereo(config: PipelineConfig, pred_dir: str, gt_dir: str) -> Dict[str, float]:
    """Pooled 3-pixel error of predicted vs ground-truth disparity PNGs.

    gt_dir may contain "noc"/"all" subdirectories (both get reported) or
    be a flat directory of PNGs (reported as "all").
    """
    regions = {}
    for tag in ("noc", "all"):
        sub = os.path.join(gt_dir, tag)
        if os.path.isdir(sub):
            regions[tag] = sub
    if not regions:
        regions["all"] = gt_dir

    report = {}
    for tag, directory in regions.items():
        pred_ids = _frame_ids_in(pred_dir, ".png")
        gt_ids = _frame_ids_in(directory, ".png")
        if pred_ids != gt_ids:
            odd = sorted(pred_ids.symmetric_difference(gt_ids))
            raise MissingCounterpart(f"frame ids differ between {pred_dir} and {directory}: {odd}")
        if not gt_ids:
            raise MissingCounterpart(f"no frames found in {directory}")
        bad = 0
        total = 0
        for frame_id in sorted(gt_ids):
            pred_disp, pred_valid = kitti_io.read_disparity_png(
                os.path.join(pred_dir, frame_id + ".png")
            )
            gt_disp, gt_valid = kitti_io.read_disparity_png(
                os.path.join(directory, frame_id + ".png")
            )
            both = pred_valid & gt_valid
            bad += int((np.abs(pred_disp[both] - gt_disp[both]) > 3.0).sum())
            total += int(both.sum())
        report[tag] = bad / total if total else float("nan")
    return report


def run_eval_detection(config: PipelineConfig, pred_dir: str, gt_dir: str,
                       interp: int = 40) -> List[dict]:
    """AP_BEV / AP_3D at IoU 0.5 and 0.7 per difficulty over label files.

    A completely empty prediction directory means the detector emitted
    nothing: every frame evaluates against zero detections (AP 0.0).  A
    partial id mismatch is an error.
    """
    pred_ids = _frame_ids_in(pred_dir, ".txt")
    gt_ids = _frame_ids_in(gt_dir, ".txt")
    if pred_ids and pred_ids != gt_ids:
        odd = sorted(pred_ids.symmetric_difference(gt_ids))
        raise MissingCounterpart(f"frame ids differ between {pred_dir} and {gt_dir}: {odd}")

    frame_pairs = []
    for frame_id in sorted(gt_ids):
        calib = kitti_io.load_calibration(
            os.path.join(config["input.calib_dir"], frame_id + ".txt")
        )
        dets = []
        if pred_ids:
            dets = kitti_io.load_labels(os.path.join(pred_dir, frame_id + ".txt"), calib)
        gts = kitti_io.load_labels(os.path.join(gt_dir, frame_id + ".txt"), calib)
        frame_pairs.append((dets, gts))

    rows = []
    for metric in ("bev", "3d"):
        for iou_threshold in (0.5, 0.7):
            for difficulty in ("easy", "moderate", "hard"):
                curve = metrics.average_precision_frames(
                    frame_pairs, iou_threshold, metric=metric,
                    difficulty=difficulty, interp=interp,
                )
                rows.append(
                    {
                        "metric": metric,
                        "iou": iou_threshold,
                        "difficulty": difficulty,
                        "ap": None if curve is None else curve.ap,
                    }
                )
    return rows


def format_detection_report(rows: List[dict]) -> str:
    lines = [f"{'metric':<8} {'iou':>4} {'difficulty':<10} {'AP':>8}"]
    for row in rows:
        ap = "absent" if row["ap"] is None else f"{row['ap']:.4f}"
        lines.append(f"{row['metric']:<8} {row['iou']:>4} {row['difficulty']:<10} {ap:>8}")
    return "\n".join(lines) + "\n"


def detection_report_csv(rows: List[dict]) -> str:
    out = ["metric,iou,difficulty,ap"]
    for row in rows:
        ap = "" if row["ap"] is None else f"{row['ap']:.6f}"
        out.append(f"{row['metric']},{row['iou']},{row['difficulty']},{ap}")
    return "\n".join(out) + "\n"
