"""Shared data containers for the stereo-to-pillars pipeline.

Grayscale images travel as plain 2-D float64 arrays with intensities in
[0, 255]; everything else gets a small dataclass wrapper around its
numpy payload.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MalformedCalibration

# Value stored at invalid pixels of a DisparityMap.
DISPARITY_SENTINEL = -1.0

# Out-of-range entries of a raw cost volume (right column off-frame) carry
# the maximum representable uint8 cost.
RAW_COST_SENTINEL = np.iinfo(np.uint8).max


@dataclass(frozen=True)
class CameraCalibration:
    """Rectified pinhole intrinsics plus the camera-to-velodyne rigid transform.

    cam_to_velo is a 3x4 matrix [R | t] mapping rectified-camera points
    (x right, y down, z forward) into the velodyne frame (x forward,
    y left, z up).
    """

    focal_u: float
    focal_v: float
    center_u: float
    center_v: float
    baseline: float
    cam_to_velo: np.ndarray

    def __post_init__(self):
        if not (self.focal_u > 0 and self.focal_v > 0):
            raise MalformedCalibration("focal lengths must be positive")
        if not self.baseline > 0:
            raise MalformedCalibration("baseline must be positive")
        m = np.asarray(self.cam_to_velo, dtype=np.float64)
        if m.shape != (3, 4):
            raise MalformedCalibration(f"cam_to_velo must be 3x4, got {m.shape}")
        r = m[:, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise MalformedCalibration("rotation part of cam_to_velo is not orthonormal")
        object.__setattr__(self, "cam_to_velo", m)

    @property
    def velo_to_cam(self) -> np.ndarray:
        """Inverse rigid transform, also 3x4."""
        r = self.cam_to_velo[:, :3]
        t = self.cam_to_velo[:, 3]
        return np.hstack([r.T, (-r.T @ t)[:, None]])


@dataclass
class StereoFrame:
    """Rectified grayscale stereo pair with its calibration."""

    left: np.ndarray
    right: np.ndarray
    calib: CameraCalibration
    frame_id: Optional[str] = None

    @property
    def height(self) -> int:
        return self.left.shape[0]

    @property
    def width(self) -> int:
        return self.left.shape[1]


@dataclass
class CensusImage:
    """Per-pixel census codes packed into uint64 (window w*h-1 bits)."""

    codes: np.ndarray
    window: tuple

    @property
    def code_length(self) -> int:
        w, h = self.window
        return w * h - 1


LAYER_RAW = "raw"
LAYER_AGGREGATED = "aggregated"


@dataclass
class CostVolume:
    """H x W x D matching costs; costs[y, x, d] is the cost of disparity d at (x, y).

    Raw volumes hold Hamming distances (uint8, sentinel at x < d);
    aggregated volumes hold int32 path sums.
    """

    costs: np.ndarray
    layer: str = LAYER_RAW

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    @property
    def max_disparity(self) -> int:
        return self.costs.shape[2]


@dataclass
class DisparityMap:
    """Per-pixel disparity in pixels with a validity mask.

    Invalid pixels hold DISPARITY_SENTINEL; valid pixels lie in
    [0, max_disparity).  Values are integer-valued after winner-take-all
    and fractional after sub-pixel refinement.
    """

    data: np.ndarray
    valid: np.ndarray
    max_disparity: int

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class DepthMap:
    """Per-pixel metric depth (meters) with a validity mask.

    stride records the decimation factor relative to the image the
    calibration refers to: pixel (i, j) of this map sits at image pixel
    (stride * i, stride * j).  Stride-2 decimation doubles it.
    """

    data: np.ndarray
    valid: np.ndarray
    stride: int = 1

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class PointCloud:
    """N x 4 float array of velodyne-frame points (x fwd, y left, z up, reflectance)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 4)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"points must be (N, 4), got {pts.shape}")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ScopeCrop:
    """Half-open axis-aligned crop box [min, max) per velodyne axis, meters."""

    x_min: float = 0.0
    x_max: float = 69.12
    y_min: float = -39.68
    y_max: float = 39.68
    z_min: float = -3.0
    z_max: float = 1.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max):
            raise ValueError("scope ranges must satisfy min < max per axis")


DIFFICULTIES = ("easy", "moderate", "hard")


@dataclass
class LabelBox3D:
    """Oriented 3D box in the velodyne frame.

    center_* is the geometric box center; yaw rotates the length axis
    about +z, in (-pi, pi].  score is None for ground truth.  difficulty
    is one of DIFFICULTIES or None when the box meets no KITTI bucket.
    """

    cls: str
    center_x: float
    center_y: float
    center_z: float
    length: float
    width: float
    height: float
    yaw: float
    score: Optional[float] = None
    difficulty: Optional[str] = None
    truncation: float = 0.0
    occlusion: int = 0

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.height > 0):
            raise ValueError("box dimensions must be positive")
        if not (-np.pi < self.yaw <= np.pi + 1e-12):
            raise ValueError(f"yaw must lie in (-pi, pi], got {self.yaw}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y, self.center_z], dtype=np.float64)
