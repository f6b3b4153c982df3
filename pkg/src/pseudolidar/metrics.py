"""Evaluation metrics: 3-pixel disparity error, rotated BEV / 3D IoU,
KITTI-style interpolated average precision, and per-stage latency
statistics."""

import io
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import NoValidPixels, SizeMismatch
from .types import DisparityMap, LabelBox3D

# Intersection areas below this are treated as empty (degenerate boxes,
# grazing contact).
AREA_EPS = 1e-9


@dataclass
class DisparityGroundTruth:
    """Reference disparity with a validity mask; region_tag records
    whether it covers non-occluded pixels only ("noc") or all ("all")."""

    disparity: np.ndarray
    valid: np.ndarray
    region_tag: str = "all"


@dataclass
class PrCurve:
    """Precision/recall samples sorted by recall, plus the interpolated AP."""

    points: List[Tuple[float, float]]
    ap: float


def three_pixel_error(pred: DisparityMap, gt: DisparityGroundTruth) -> float:
    """Fraction of jointly-valid pixels with |pred - gt| > 3.0 px."""
    if pred.data.shape != gt.disparity.shape:
        raise SizeMismatch(
            f"prediction {pred.data.shape} does not match ground truth {gt.disparity.shape}"
        )
    both = pred.valid & gt.valid
    n = int(both.sum())
    if n == 0:
        raise NoValidPixels("no jointly-valid pixels to evaluate")
    bad = np.abs(pred.data[both] - gt.disparity[both]) > 3.0
    return float(bad.sum()) / n


def _box_corners_bev(box: LabelBox3D) -> np.ndarray:
    """Counter-clockwise BEV footprint corners, length along the yaw axis."""
    dx, dy = box.length / 2.0, box.width / 2.0
    local = np.array([[dx, dy], [-dx, dy], [-dx, -dy], [dx, -dy]])
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([box.center_x, box.center_y])


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject against a convex,
    counter-clockwise clip polygon."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        input_pts = output
        output = []
        if not input_pts:
            break
        ex, ey = bx - ax, by - ay
        prev = input_pts[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in input_pts:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= 0:
                if prev_side < 0:
                    t = prev_side / (prev_side - cur_side)
                    output.append(
                        (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
                    )
                output.append(cur)
            elif prev_side >= 0:
                t = prev_side / (prev_side - cur_side)
                output.append(
                    (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
                )
            prev, prev_side = cur, cur_side
    return np.array(output) if output else np.empty((0, 2))


def bev_intersection_area(a: LabelBox3D, b: LabelBox3D) -> float:
    inter = _clip_polygon(_box_corners_bev(a), _box_corners_bev(b))
    area = _polygon_area(inter)
    return area if area > AREA_EPS else 0.0


def bev_iou(a: LabelBox3D, b: LabelBox3D) -> float:
    """IoU of the yaw-rotated BEV rectangles."""
    inter = bev_intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.length * a.width + b.length * b.width - inter
    return inter / union if union > AREA_EPS else 0.0


def iou_3d(a: LabelBox3D, b: LabelBox3D) -> float:
    """Volumetric IoU: BEV intersection times vertical overlap over volume union."""
    inter_bev = bev_intersection_area(a, b)
    if inter_bev == 0.0:
        return 0.0
    z_lo = max(a.center_z - a.height / 2.0, b.center_z - b.height / 2.0)
    z_hi = min(a.center_z + a.height / 2.0, b.center_z + b.height / 2.0)
    overlap = max(0.0, z_hi - z_lo)
    if overlap == 0.0:
        return 0.0
    inter = inter_bev * overlap
    union = a.length * a.width * a.height + b.length * b.width * b.height - inter
    return inter / union if union > AREA_EPS else 0.0


RECALL_POINTS_11 = tuple(i / 10.0 for i in range(11))
RECALL_POINTS_40 = tuple(i / 40.0 for i in range(1, 41))


def match_detections(dets: Sequence[LabelBox3D], gts: Sequence[LabelBox3D],
                     iou_threshold: float, metric: str = "bev") -> List[bool]:
    """Greedy matching in descending score order (stable on ties).

    Each detection takes the highest-IoU unmatched ground truth with
    IoU >= threshold; returns a true/false flag per detection in that
    score order.
    """
    iou_fn = bev_iou if metric == "bev" else iou_3d
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(gts)
    hits = []
    for i in order:
        best_iou, best_j = -1.0, None
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            iou = iou_fn(dets[i], gt)
            if iou >= iou_threshold and iou > best_iou:
                best_iou, best_j = iou, j
        if best_j is not None:
            taken[best_j] = True
            hits.append(True)
        else:
            hits.append(False)
    return hits


def _curve_from_hits(scored_hits, n_gts: int, interp: int) -> PrCurve:
    scored_hits = sorted(scored_hits, key=lambda t: -t[0])
    recalls, precisions = [], []
    tp = 0
    for k, (_, hit) in enumerate(scored_hits, start=1):
        tp += int(hit)
        recalls.append(tp / n_gts)
        precisions.append(tp / k)
    grid = RECALL_POINTS_11 if interp == 11 else RECALL_POINTS_40
    interpolated = []
    for r in grid:
        candidates = [p for p, rec in zip(precisions, recalls) if rec >= r]
        interpolated.append(max(candidates) if candidates else 0.0)
    return PrCurve(points=sorted(zip(recalls, precisions)), ap=float(np.mean(interpolated)))


def average_precision(dets: Sequence[LabelBox3D], gts: Sequence[LabelBox3D],
                      iou_threshold: float, metric: str = "bev",
                      difficulty: Optional[str] = None, interp: int = 40) -> Optional[PrCurve]:
    """Interpolated AP over KITTI-style recall grids.

    difficulty filters the ground truths (None = use all); returns None
    when no ground truth of that difficulty exists.  interp selects the
    11-point grid {0, .1, ..., 1} or the 40-point grid {1/40, ..., 1}.
    """
    return average_precision_frames(
        [(dets, gts)], iou_threshold, metric=metric, difficulty=difficulty, interp=interp
    )


def average_precision_frames(frame_pairs, iou_threshold: float, metric: str = "bev",
                             difficulty: Optional[str] = None, interp: int = 40) -> Optional[PrCurve]:
    """AP over multiple (detections, ground truths) frame pairs.

    Matching is confined to each frame; the precision/recall sweep pools
    every detection across frames in descending score order.
    """
    if interp not in (11, 40):
        raise ValueError(f"interp must be 11 or 40, got {interp}")
    total_gts = 0
    scored_hits = []
    for dets, gts in frame_pairs:
        if difficulty is not None:
            gts = [g for g in gts if g.difficulty == difficulty]
        total_gts += len(gts)
        hits = match_detections(dets, gts, iou_threshold, metric)
        order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
        scored_hits.extend((dets[i].score, hit) for i, hit in zip(order, hits))
    if total_gts == 0:
        return None
    return _curve_from_hits(scored_hits, total_gts, interp)


@dataclass
class StageStats:
    stage: str
    count: int
    mean_ms: float
    median_ms: float
    p95_ms: float


@dataclass
class StageReport:
    stages: List[StageStats]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("stage,mean_ms,median_ms,p95_ms\n")
        for s in self.stages:
            out.write(f"{s.stage},{s.mean_ms:.4f},{s.median_ms:.4f},{s.p95_ms:.4f}\n")
        return out.getvalue()

    def format_text(self) -> str:
        if not self.stages:
            return "(no timing samples)\n"
        lines = [f"{'stage':<12} {'n':>6} {'mean ms':>10} {'median ms':>10} {'p95 ms':>10}"]
        for s in self.stages:
            lines.append(
                f"{s.stage:<12} {s.count:>6} {s.mean_ms:>10.3f} {s.median_ms:>10.3f} {s.p95_ms:>10.3f}"
            )
        return "\n".join(lines) + "\n"


def stage_timer_report(samples: Sequence[Tuple[str, float]]) -> StageReport:
    """Aggregate (stage, seconds) samples into per-stage ms statistics.

    Stages appear in first-occurrence order of the samples.
    """
    grouped = {}
    for stage, seconds in samples:
        grouped.setdefault(stage, []).append(seconds * 1000.0)
    stages = [
        StageStats(
            stage=stage,
            count=len(ms),
            mean_ms=float(np.mean(ms)),
            median_ms=float(np.median(ms)),
            p95_ms=float(np.percentile(ms, 95)),
        )
        for stage, ms in grouped.items()
    ]
    return StageReport(stages=stages)
