import numpy as np
import pytest

from pseudolidar import warmup
from pseudolidar.types import CameraCalibration


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT-compile the numba kernels before any timed assertions run.
    warmup()


# velodyne -> camera axis permutation used by KITTI (x fwd, y left, z up
# to x right, y down, z fwd)
VELO_TO_CAM_R = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


def kitti_like_calib(fu=700.0, fv=700.0, cu=612.0, cv=185.0, baseline=0.54,
                     t_velo_to_cam=(0.0, 0.0, 0.0)):
    rot = VELO_TO_CAM_R.T  # cam -> velo
    trans = -rot @ np.asarray(t_velo_to_cam, dtype=np.float64)
    return CameraCalibration(
        focal_u=fu, focal_v=fv, center_u=cu, center_v=cv, baseline=baseline,
        cam_to_velo=np.hstack([rot, trans[:, None]]),
    )


def identity_calib(fu=700.0, fv=700.0, cu=320.0, cv=240.0, baseline=0.5):
    return CameraCalibration(
        focal_u=fu, focal_v=fv, center_u=cu, center_v=cv, baseline=baseline,
        cam_to_velo=np.hstack([np.eye(3), np.zeros((3, 1))]),
    )


def write_kitti_calib(path, fu=700.0, fv=700.0, cu=612.0, cv=185.0, baseline=0.54):
    p2 = [fu, 0.0, cu, 0.0, 0.0, fv, cv, 0.0, 0.0, 0.0, 1.0, 0.0]
    p3 = list(p2)
    p3[3] = -fu * baseline
    tr = [
        VELO_TO_CAM_R[0, 0], VELO_TO_CAM_R[0, 1], VELO_TO_CAM_R[0, 2], 0.0,
        VELO_TO_CAM_R[1, 0], VELO_TO_CAM_R[1, 1], VELO_TO_CAM_R[1, 2], 0.0,
        VELO_TO_CAM_R[2, 0], VELO_TO_CAM_R[2, 1], VELO_TO_CAM_R[2, 2], 0.0,
    ]
    r0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    with open(path, "w") as fh:
        fh.write("P2: " + " ".join(f"{v:.12e}" for v in p2) + "\n")
        fh.write("P3: " + " ".join(f"{v:.12e}" for v in p3) + "\n")
        fh.write("R0_rect: " + " ".join(f"{v:.12e}" for v in r0) + "\n")
        fh.write("Tr_velo_to_cam: " + " ".join(f"{v:.12e}" for v in tr) + "\n")


def shifted_pair(height, width, shift, rng):
    """Random textured pair where left pixel x matches right pixel x - shift."""
    left = rng.integers(0, 256, (height, width)).astype(np.float64)
    right = np.empty_like(left)
    right[:, : width - shift] = left[:, shift:]
    right[:, width - shift:] = rng.integers(0, 256, (height, shift))
    return left, right


def smooth_pair(height, width, shift, rng, cell=8):
    """Smooth horizontal texture sampled at a (possibly fractional) shift.

    The underlying profile is piecewise linear between random knots, so
    every pixel's true disparity is exactly `shift`.
    """
    n_knots = int(np.ceil((width + shift) / cell)) + 4
    knots_x = (np.arange(n_knots) - 1) * float(cell)
    values = rng.uniform(0.0, 255.0, (height, n_knots))
    xs = np.arange(width, dtype=np.float64)
    left = np.empty((height, width))
    right = np.empty((height, width))
    for y in range(height):
        left[y] = np.interp(xs, knots_x, values[y])
        right[y] = np.interp(xs + shift, knots_x, values[y])
    return left, right
