"""Geometric pillar encoding: bin cloud points into vertical BEV columns
and emit the 9-feature rows a pillar-based detector consumes.

Feature row layout per point:
    (x, y, z, r, xc, yc, zc, xp, yp)
where (xc, yc, zc) are offsets to the centroid of the pillar's kept
points and (xp, yp) are offsets to the pillar's geometric cell center.
The neural stages of a detector (per-pillar embedding, backbone, head)
are deliberately absent; this module ends where tensors would begin.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .pointcloud import crop_scope
from .types import PointCloud, ScopeCrop

# Guard against float quirks when a scope extent is an exact multiple of
# the pillar size (69.12 / 0.12 must give 576 cells, not 577).
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class PillarConfig:
    pillar_x: float = 0.12
    pillar_y: float = 0.12
    pillar_z: float = 4.0
    scope: ScopeCrop = field(default_factory=ScopeCrop)
    max_points_per_pillar: int = 32
    max_pillars: int = 12000

    def __post_init__(self):
        if not (self.pillar_x > 0 and self.pillar_y > 0 and self.pillar_z > 0):
            raise ValueError("pillar dimensions must be positive")
        if self.max_points_per_pillar < 1 or self.max_pillars < 1:
            raise ValueError("max counts must be >= 1")


@dataclass
class PillarGrid:
    """Sparse map from BEV cell index (ix, iy) to an (n, 9) feature array.

    Iteration order of `pillars` is first-occupancy order of the cells.
    """

    pillars: Dict[Tuple[int, int], np.ndarray]
    config: PillarConfig

    @property
    def num_pillars(self) -> int:
        return len(self.pillars)

    @property
    def num_points(self) -> int:
        return sum(rows.shape[0] for rows in self.pillars.values())


def grid_shape(config: PillarConfig) -> Tuple[int, int]:
    """BEV cell counts (nx, ny) covering the scope."""
    nx = math.ceil((config.scope.x_max - config.scope.x_min) / config.pillar_x - _GRID_EPS)
    ny = math.ceil((config.scope.y_max - config.scope.y_min) / config.pillar_y - _GRID_EPS)
    return nx, ny


def build_pillars(cloud: PointCloud, config: PillarConfig) -> PillarGrid:
    """Assign in-scope points to pillars and compute augmented features.

    Cell index is floor((coord - min) / pillar_size); a point on a cell's
    max edge belongs to the next cell, a point at the scope max is out of
    scope.  Each pillar keeps its first max_points_per_pillar arrivals in
    point order; pillars beyond max_pillars (first-occupancy order) are
    dropped.  Centroids are taken over the kept rows.
    """
    nx, ny = grid_shape(config)
    pts = crop_scope(cloud, config.scope).points
    if pts.shape[0] == 0:
        return PillarGrid(pillars={}, config=config)

    ix = np.floor((pts[:, 0] - config.scope.x_min) / config.pillar_x).astype(np.int64)
    iy = np.floor((pts[:, 1] - config.scope.y_min) / config.pillar_y).astype(np.int64)
    np.clip(ix, 0, nx - 1, out=ix)
    np.clip(iy, 0, ny - 1, out=iy)
    cell = ix * ny + iy

    uniq, first_pos, inverse = np.unique(cell, return_index=True, return_inverse=True)
    occupancy_order = np.argsort(first_pos, kind="stable")
    rank_of_uniq = np.empty(uniq.shape[0], np.int64)
    rank_of_uniq[occupancy_order] = np.arange(uniq.shape[0])
    point_rank = rank_of_uniq[inverse]

    order = np.argsort(point_rank, kind="stable")
    sorted_rank = point_rank[order]
    starts = np.searchsorted(sorted_rank, np.arange(uniq.shape[0]))
    pos_in_pillar = np.arange(order.shape[0]) - starts[sorted_rank]
    keep = (pos_in_pillar < config.max_points_per_pillar) & (sorted_rank < config.max_pillars)

    kept_pts = pts[order[keep]]
    kept_rank = sorted_rank[keep]
    n_pillars = min(uniq.shape[0], config.max_pillars)

    counts = np.bincount(kept_rank, minlength=n_pillars)
    centroids = np.empty((n_pillars, 3))
    for axis in range(3):
        centroids[:, axis] = np.bincount(
            kept_rank, weights=kept_pts[:, axis], minlength=n_pillars
        ) / counts

    cell_of_rank = uniq[occupancy_order[:n_pillars]]
    ix_of_rank = cell_of_rank // ny
    iy_of_rank = cell_of_rank % ny
    center_x = config.scope.x_min + (ix_of_rank + 0.5) * config.pillar_x
    center_y = config.scope.y_min + (iy_of_rank + 0.5) * config.pillar_y

    features = np.empty((kept_pts.shape[0], 9))
    features[:, 0:4] = kept_pts
    features[:, 4:7] = kept_pts[:, 0:3] - centroids[kept_rank]
    features[:, 7] = kept_pts[:, 0] - center_x[kept_rank]
    features[:, 8] = kept_pts[:, 1] - center_y[kept_rank]

    bounds = np.searchsorted(kept_rank, np.arange(n_pillars + 1))
    pillars = {}
    for rank in range(n_pillars):
        lo, hi = bounds[rank], bounds[rank + 1]
        pillars[(int(ix_of_rank[rank]), int(iy_of_rank[rank]))] = features[lo:hi].copy()
    return PillarGrid(pillars=pillars, config=config)


def write_pillar_dump(grid: PillarGrid, path) -> None:
    """Golden-test text dump: per pillar a header line "ix iy count"
    followed by one 9-value feature row per kept point."""
    with open(path, "w") as fh:
        for (ix, iy), rows in grid.pillars.items():
            fh.write(f"{ix} {iy} {rows.shape[0]}\n")
            for row in rows:
                fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")
