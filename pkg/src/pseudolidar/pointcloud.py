"""Disparity-to-depth conversion, back-projection into the velodyne
frame, and the perception-scope crop."""

import numpy as np

from .types import CameraCalibration, DepthMap, DisparityMap, PointCloud, ScopeCrop

# Disparities at or below this default are treated as unmeasured: they
# would otherwise back-project to arbitrarily distant phantom points.
DEFAULT_MIN_DISPARITY = 0.5

# Every generated point carries a constant reflectance channel so that
# consumers of 4-channel lidar data see a well-formed cloud.
REFLECTANCE = 1.0


def disparity_to_depth(disp: DisparityMap, calib: CameraCalibration,
                       min_disparity: float = DEFAULT_MIN_DISPARITY) -> DepthMap:
    """depth = focal_u * baseline / disparity on pixels above min_disparity."""
    usable = disp.valid & (disp.data > min_disparity)
    depth = np.zeros_like(disp.data)
    np.divide(calib.focal_u * calib.baseline, disp.data, out=depth, where=usable)
    return DepthMap(data=depth, valid=usable, stride=1)


def depth_to_cloud(depth: DepthMap, calib: CameraCalibration) -> PointCloud:
    """Back-project valid depth pixels and map them into the velodyne frame.

    Points come out in row-major pixel order.  The map's stride restores
    original-image pixel coordinates for decimated maps.
    """
    ys, xs = np.nonzero(depth.valid)
    z = depth.data[ys, xs]
    u = xs.astype(np.float64) * depth.stride
    v = ys.astype(np.float64) * depth.stride
    x_cam = (u - calib.center_u) * z / calib.focal_u
    y_cam = (v - calib.center_v) * z / calib.focal_v
    pts_cam = np.column_stack([x_cam, y_cam, z])
    rot = calib.cam_to_velo[:, :3]
    trans = calib.cam_to_velo[:, 3]
    pts_velo = pts_cam @ rot.T + trans
    points = np.column_stack([pts_velo, np.full(len(pts_velo), REFLECTANCE)])
    return PointCloud(points=points)


def crop_scope(cloud: PointCloud, scope: ScopeCrop) -> PointCloud:
    """Keep points inside the half-open [min, max) box; order preserved."""
    p = cloud.points
    keep = (
        (p[:, 0] >= scope.x_min) & (p[:, 0] < scope.x_max)
        & (p[:, 1] >= scope.y_min) & (p[:, 1] < scope.y_max)
        & (p[:, 2] >= scope.z_min) & (p[:, 2] < scope.z_max)
    )
    return PointCloud(points=p[keep].copy())
