"""Semi-global matching: multi-path cost aggregation, winner-take-all
disparity selection, and the left-right consistency check.

Aggregation follows the classic recurrence along each 1-D path r:

    L_r(p, d) = C(p, d) + min(L_r(p-r, d),
                              L_r(p-r, d-1) + P1,
                              L_r(p-r, d+1) + P1,
                              min_k L_r(p-r, k) + P2)
                - min_k L_r(p-r, k)

summed over 4 or 8 compass directions.  All accumulators are int32 so
the sum is schedule-independent and both backends agree exactly.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import use_numba
from .errors import SizeMismatch, WrongLayer
from .types import (
    DISPARITY_SENTINEL,
    LAYER_AGGREGATED,
    LAYER_RAW,
    CostVolume,
    DisparityMap,
)

DIRECTIONS_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIRECTIONS_8 = DIRECTIONS_4 + ((1, 1), (-1, -1), (1, -1), (-1, 1))

# Stand-in for "no predecessor / off-frame" in argmin contexts; large but
# far from int32 overflow even after adding P1/P2.
_BIG = np.int32(2**30)


@dataclass(frozen=True)
class SgmParams:
    p1: int = 10
    p2: int = 120
    num_paths: int = 8
    lr_threshold: float = 1.0

    def __post_init__(self):
        if not (0 < self.p1 <= self.p2):
            raise ValueError(f"need 0 < p1 <= p2, got p1={self.p1} p2={self.p2}")
        if self.num_paths not in (4, 8):
            raise ValueError(f"num_paths must be 4 or 8, got {self.num_paths}")
        if self.lr_threshold < 0:
            raise ValueError("lr_threshold must be >= 0")


def aggregate(volume: CostVolume, params: SgmParams) -> CostVolume:
    """Sum the path recurrence over the configured compass directions."""
    if volume.layer != LAYER_RAW:
        raise WrongLayer(f"aggregate expects a raw volume, got {volume.layer!r}")
    directions = DIRECTIONS_8 if params.num_paths == 8 else DIRECTIONS_4
    agg = aggregate_directions(volume, params.p1, params.p2, directions)
    return CostVolume(costs=agg, layer=LAYER_AGGREGATED)


def aggregate_directions(volume: CostVolume, p1: int, p2: int, directions) -> np.ndarray:
    """Aggregated int32 costs for an explicit direction set (tests use a
    single direction against the dynamic-programming oracle)."""
    cost = volume.costs
    agg = np.zeros(cost.shape, np.int32)
    for dx, dy in directions:
        if use_numba():
            from . import _kernels

            sx, sy = _path_starts(volume.height, volume.width, dx, dy)
            _kernels.aggregate_direction(cost, int(p1), int(p2), dx, dy, sx, sy, agg)
        else:
            _aggregate_direction_numpy(cost, int(p1), int(p2), dx, dy, agg)
    return agg


def _path_starts(height, width, dx, dy):
    """Pixels whose predecessor along (dx, dy) falls off-frame."""
    xs, ys = [], []
    if dx == 1:
        xs.append(np.zeros(height, np.int64))
        ys.append(np.arange(height, dtype=np.int64))
    elif dx == -1:
        xs.append(np.full(height, width - 1, np.int64))
        ys.append(np.arange(height, dtype=np.int64))
    if dy == 1:
        col = np.arange(width, dtype=np.int64)
        row = np.zeros(width, np.int64)
        if dx == 1:  # corner already covered by the x border
            col, row = col[1:], row[1:]
        elif dx == -1:
            col, row = col[:-1], row[:-1]
        xs.append(col)
        ys.append(row)
    elif dy == -1:
        col = np.arange(width, dtype=np.int64)
        row = np.full(width, height - 1, np.int64)
        if dx == 1:
            col, row = col[1:], row[1:]
        elif dx == -1:
            col, row = col[:-1], row[:-1]
        xs.append(col)
        ys.append(row)
    return np.concatenate(xs), np.concatenate(ys)


def _step_numpy(l_prev, c_cur, p1, p2):
    """One recurrence step, vectorized over paths: (..., D) -> (..., D)."""
    m = l_prev.min(axis=-1, keepdims=True)
    down = np.empty_like(l_prev)
    down[..., 1:] = l_prev[..., :-1]
    down[..., 0] = _BIG
    up = np.empty_like(l_prev)
    up[..., :-1] = l_prev[..., 1:]
    up[..., -1] = _BIG
    best = np.minimum(np.minimum(l_prev, down + p1), np.minimum(up + p1, m + p2))
    return c_cur + best - m


def _aggregate_direction_numpy(cost, p1, p2, dx, dy, agg):
    height, width, _ = cost.shape
    c = cost.astype(np.int32)
    p1 = np.int32(p1)
    p2 = np.int32(p2)
    if dy == 0:
        cols = range(width) if dx == 1 else range(width - 1, -1, -1)
        l_prev = None
        for x in cols:
            l_cur = c[:, x, :] if l_prev is None else _step_numpy(l_prev, c[:, x, :], p1, p2)
            agg[:, x, :] += l_cur
            l_prev = l_cur
        return
    rows = range(height) if dy == 1 else range(height - 1, -1, -1)
    l_prev = None
    for y in rows:
        cy = c[y]
        if l_prev is None:
            l_cur = cy
        elif dx == 0:
            l_cur = _step_numpy(l_prev, cy, p1, p2)
        else:
            # Diagonal: pixel x descends from x - dx in the previous row;
            # the vacated border column starts a fresh path.
            upd = _step_numpy(l_prev, np.zeros_like(l_prev), p1, p2)
            l_cur = cy.copy()
            if dx == 1:
                l_cur[1:] += upd[:-1]
            else:
                l_cur[:-1] += upd[1:]
        agg[y] += l_cur
        l_prev = l_cur


def winner_take_all(volume: CostVolume) -> DisparityMap:
    """Per-pixel argmin over d, ties resolved toward the smaller disparity."""
    if volume.layer != LAYER_AGGREGATED:
        raise WrongLayer(f"winner_take_all expects an aggregated volume, got {volume.layer!r}")
    if use_numba():
        from . import _kernels

        best = _kernels.wta_argmin(volume.costs)
    else:
        best = np.argmin(volume.costs, axis=2)
    return DisparityMap(
        data=best.astype(np.float64),
        valid=np.ones(best.shape, bool),
        max_disparity=volume.max_disparity,
    )


def right_disparity(volume: CostVolume) -> DisparityMap:
    """WTA on the volume re-indexed to the right view, C_R(x,y,d) = C(x+d,y,d).

    Avoids a second aggregation pass; columns where x + d runs off-frame
    get _BIG so they never win the argmin.
    """
    if volume.layer != LAYER_AGGREGATED:
        raise WrongLayer(f"right_disparity expects an aggregated volume, got {volume.layer!r}")
    h, w, d_max = volume.costs.shape
    if use_numba():
        from . import _kernels

        best = _kernels.wta_right_argmin(volume.costs, _BIG)
    else:
        reindexed = np.full((h, w, d_max), _BIG, np.int32)
        for d in range(min(d_max, w)):
            reindexed[:, : w - d, d] = volume.costs[:, d:, d]
        best = np.argmin(reindexed, axis=2)
    return DisparityMap(
        data=best.astype(np.float64),
        valid=np.ones(best.shape, bool),
        max_disparity=d_max,
    )


def lr_consistency(left_disp: DisparityMap, right_disp: DisparityMap, threshold: float) -> DisparityMap:
    """Invalidate left pixels whose right-view counterpart disagrees.

    A pixel survives iff x - round(d_L) stays on-frame and
    |d_L(x, y) - d_R(x - round(d_L), y)| <= threshold.
    """
    if left_disp.data.shape != right_disp.data.shape:
        raise SizeMismatch(
            f"disparity map shapes differ: {left_disp.data.shape} vs {right_disp.data.shape}"
        )
    h, w = left_disp.data.shape
    xs = np.arange(w)[None, :]
    proj = xs - np.rint(left_disp.data).astype(np.int64)
    on_frame = (proj >= 0) & (proj < w)
    proj_safe = np.clip(proj, 0, w - 1)
    d_right = right_disp.data[np.arange(h)[:, None], proj_safe]
    consistent = on_frame & (np.abs(left_disp.data - d_right) <= threshold)
    valid = left_disp.valid & consistent
    data = np.where(valid, left_disp.data, DISPARITY_SENTINEL)
    return DisparityMap(data=data, valid=valid, max_disparity=left_disp.max_disparity)
