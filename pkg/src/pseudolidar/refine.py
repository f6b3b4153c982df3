"""Point-cloud enhancement stages: sub-pixel de-smoothing of the
disparity map and the two density-reduction schemes.

Sub-pixel refinement fits a parabola through the matching costs at the
winning disparity and its two neighbors:

    d_sub = d_ori - (C+ - C-) / (2 * (C+ - 2C + C-))

Direct downsampling decimates the depth map to a quarter of its pixel
count; adaptive downsampling keeps each cloud point with a probability
that grows linearly with forward distance, so sparse far points survive.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, SizeMismatch
from .types import CostVolume, DepthMap, DisparityMap, PointCloud


@dataclass(frozen=True)
class AdaptiveSamplingPolicy:
    near_keep_prob: float = 0.25
    far_keep_prob: float = 1.0
    z_near: float = 0.0
    z_far: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.near_keep_prob <= self.far_keep_prob <= 1.0):
            raise ValueError("need 0 <= near_keep_prob <= far_keep_prob <= 1")
        if not self.z_near < self.z_far:
            raise ValueError("need z_near < z_far")

    def keep_probability(self, z):
        """Linear ramp in forward distance, clamped to the two endpoints."""
        t = (np.asarray(z, dtype=np.float64) - self.z_near) / (self.z_far - self.z_near)
        p = self.near_keep_prob + (self.far_keep_prob - self.near_keep_prob) * t
        return np.clip(p, self.near_keep_prob, self.far_keep_prob)


def subpixel_refine(disp: DisparityMap, volume: CostVolume) -> DisparityMap:
    """Quadratic-fit sub-pixel disparity; validity mask unchanged.

    Pixels at the disparity range ends or with a flat cost triple keep
    their integer value.  Results are clamped into [0, D-1] so the map
    invariant survives pixels where the winning disparity is not a local
    minimum of this volume's costs.
    """
    if disp.data.shape != volume.costs.shape[:2]:
        raise SizeMismatch(
            f"disparity {disp.data.shape} does not match volume {volume.costs.shape[:2]}"
        )
    d_max = volume.max_disparity
    d_ori = np.rint(disp.data).astype(np.int64)
    refinable = disp.valid & (d_ori >= 1) & (d_ori <= d_max - 2)
    data = disp.data.copy()
    ys, xs = np.nonzero(refinable)
    if ys.size:
        d0 = d_ori[ys, xs]
        c_minus = volume.costs[ys, xs, d0 - 1].astype(np.float64)
        c_center = volume.costs[ys, xs, d0].astype(np.float64)
        c_plus = volume.costs[ys, xs, d0 + 1].astype(np.float64)
        denom = 2.0 * (c_plus - 2.0 * c_center + c_minus)
        offset = np.divide(
            c_plus - c_minus,
            denom,
            out=np.zeros_like(denom),
            where=denom != 0.0,
        )
        data[ys, xs] = np.clip(d0 - offset, 0.0, float(d_max - 1))
    return DisparityMap(data=data, valid=disp.valid.copy(), max_disparity=d_max)


def downsample_direct(depth: DepthMap) -> DepthMap:
    """Stride-2 decimation to quarter pixel count; no averaging."""
    if depth.height < 2 or depth.width < 2:
        raise EmptyInput(
            f"downsample_direct needs at least 2x2 pixels, got {depth.width}x{depth.height}"
        )
    return DepthMap(
        data=depth.data[::2, ::2].copy(),
        valid=depth.valid[::2, ::2].copy(),
        stride=depth.stride * 2,
    )


def _uniform01(seed, index):
    """Counter-based uniforms in [0, 1): splitmix64 of (seed + index).

    Each value depends only on (seed, index), so the draw is
    reproducible, order-stable, and independent of any threading.
    """
    z = np.uint64(seed) + index * np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def downsample_adaptive(cloud: PointCloud, policy: AdaptiveSamplingPolicy) -> PointCloud:
    """Distance-adaptive thinning; point order preserved.

    Forward distance is the velodyne x coordinate.  A point at index i
    survives iff u(seed, i) < p(z_i).
    """
    n = len(cloud)
    if n == 0:
        return PointCloud(points=cloud.points.copy())
    p = policy.keep_probability(cloud.points[:, 0])
    u = _uniform01(policy.seed, np.arange(n, dtype=np.uint64))
    return PointCloud(points=cloud.points[u < p].copy())
