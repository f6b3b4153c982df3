"""Fast classical pseudo-lidar front end.

Stereo pairs go in; refined velodyne-style point clouds and pillar
features come out, with KITTI-style metrics and latency reporting on
the side.  Hot kernels run under numba by default; set
PSEUDOLIDAR_BACKEND=numpy for the pure-numpy fallback.
"""

from ._backend import backend_name, set_backend, use_numba
from .config import PipelineConfig
from .costvolume import build_cost_volume, census_transform
from .errors import PseudoLidarError
from .metrics import (
    DisparityGroundTruth,
    PrCurve,
    average_precision,
    average_precision_frames,
    bev_iou,
    iou_3d,
    stage_timer_report,
    three_pixel_error,
)
from .pillars import PillarConfig, PillarGrid, build_pillars, grid_shape
from .pipeline import process_frame, run_bench, run_pipeline
from .pointcloud import crop_scope, depth_to_cloud, disparity_to_depth
from .refine import (
    AdaptiveSamplingPolicy,
    downsample_adaptive,
    downsample_direct,
    subpixel_refine,
)
from .sgm import SgmParams, aggregate, lr_consistency, winner_take_all
from .types import (
    CameraCalibration,
    CostVolume,
    DepthMap,
    DisparityMap,
    LabelBox3D,
    PointCloud,
    ScopeCrop,
    StereoFrame,
)

__version__ = "0.1.0"


def warmup():
    """Compile the numba kernels on tiny inputs (no-op on the numpy backend)."""
    if use_numba():
        from . import _kernels

        _kernels.warm_up()
