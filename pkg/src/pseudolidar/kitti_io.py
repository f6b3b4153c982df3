"""KITTI-format readers and writers.

Covers stereo PNG pairs, calib text files, object label files,
ground-truth disparity PNGs (uint16, value / 256.0, zero = invalid),
velodyne .bin point clouds, and ASCII PLY output.
"""

import os
from typing import List, Optional

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatch,
    IoFailure,
    MalformedCalibration,
    MalformedLine,
    MissingFile,
)
from .types import CameraCalibration, DisparityMap, LabelBox3D, PointCloud, StereoFrame

# ITU-R 601 luma weights for color-to-grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# KITTI difficulty thresholds: min 2D box height (px), max occlusion
# level, max truncation fraction.
DIFFICULTY_RULES = (
    ("easy", 40.0, 0, 0.15),
    ("moderate", 25.0, 1, 0.30),
    ("hard", 25.0, 2, 0.50),
)


def _load_gray(path) -> np.ndarray:
    if not os.path.isfile(path):
        raise MissingFile(f"image not found: {path}")
    with Image.open(path) as img:
        if img.mode in ("L", "I", "I;16"):
            return np.asarray(img, dtype=np.float64)
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return np.rint(rgb[:, :, 0] * r + rgb[:, :, 1] * g + rgb[:, :, 2] * b)


def read_calib_file(path) -> dict:
    """Parse "key: v0 v1 ..." lines into float arrays."""
    if not os.path.isfile(path):
        raise MissingFile(f"calibration file not found: {path}")
    entries = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or ":" not in line:
                continue
            key, value = line.split(":", 1)
            try:
                entries[key.strip()] = np.array([float(tok) for tok in value.split()])
            except ValueError as exc:
                raise MalformedCalibration(f"non-numeric value for {key!r} in {path}") from exc
    return entries


def calibration_from_kitti(entries: dict) -> CameraCalibration:
    """Intrinsics from P2, baseline from the P2/P3 horizontal offsets,
    cam_to_velo from inverting R0_rect @ Tr_velo_to_cam."""
    for key, size in (("P2", 12), ("P3", 12), ("Tr_velo_to_cam", 12)):
        if key not in entries:
            raise MalformedCalibration(f"missing calibration key {key!r}")
        if entries[key].size != size:
            raise MalformedCalibration(
                f"calibration key {key!r} has {entries[key].size} values, expected {size}"
            )
    p2 = entries["P2"].reshape(3, 4)
    p3 = entries["P3"].reshape(3, 4)
    focal_u = p2[0, 0]
    if focal_u <= 0:
        raise MalformedCalibration("P2 focal length must be positive")
    baseline = (p2[0, 3] - p3[0, 3]) / focal_u
    velo_to_cam = entries["Tr_velo_to_cam"].reshape(3, 4)
    if "R0_rect" in entries:
        if entries["R0_rect"].size != 9:
            raise MalformedCalibration("R0_rect must hold 9 values")
        r0 = entries["R0_rect"].reshape(3, 3)
    else:
        r0 = np.eye(3)
    rot = r0 @ velo_to_cam[:, :3]
    trans = r0 @ velo_to_cam[:, 3]
    cam_to_velo = np.hstack([rot.T, (-rot.T @ trans)[:, None]])
    return CameraCalibration(
        focal_u=focal_u,
        focal_v=p2[1, 1],
        center_u=p2[0, 2],
        center_v=p2[1, 2],
        baseline=baseline,
        cam_to_velo=cam_to_velo,
    )


def load_calibration(path) -> CameraCalibration:
    return calibration_from_kitti(read_calib_file(path))


def load_stereo_frame(left_path, right_path, calib_path, frame_id: Optional[str] = None) -> StereoFrame:
    left = _load_gray(left_path)
    right = _load_gray(right_path)
    if left.shape != right.shape:
        raise DimensionMismatch(
            f"stereo pair dimensions differ: left {left.shape} vs right {right.shape}"
        )
    calib = load_calibration(calib_path)
    return StereoFrame(left=left, right=right, calib=calib, frame_id=frame_id)


def write_velodyne_bin(cloud: PointCloud, path) -> None:
    """N x 4 little-endian float32 rows (x, y, z, reflectance)."""
    data = np.ascontiguousarray(cloud.points, dtype="<f4")
    try:
        with open(path, "wb") as fh:
            fh.write(data.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_velodyne_bin(path) -> PointCloud:
    if not os.path.isfile(path):
        raise MissingFile(f"velodyne bin not found: {path}")
    try:
        raw = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if raw.size % 4 != 0:
        raise IoFailure(f"{path}: size {raw.size * 4} bytes is not a multiple of 16")
    return PointCloud(points=raw.reshape(-1, 4).astype(np.float64))


def write_ply(cloud: PointCloud, path) -> None:
    """ASCII PLY with x/y/z vertex properties, one point per line."""
    try:
        with open(path, "w") as fh:
            fh.write("ply\n")
            fh.write("format ascii 1.0\n")
            fh.write(f"element vertex {len(cloud)}\n")
            fh.write("property float x\n")
            fh.write("property float y\n")
            fh.write("property float z\n")
            fh.write("end_header\n")
            for x, y, z, _ in cloud.points:
                fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_ply(path) -> PointCloud:
    """Parse the subset of PLY emitted by write_ply (reflectance set to 1)."""
    if not os.path.isfile(path):
        raise MissingFile(f"ply file not found: {path}")
    with open(path) as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise IoFailure(f"{path}: not a PLY file")
        count = None
        while True:
            line = fh.readline()
            if not line:
                raise IoFailure(f"{path}: missing end_header")
            line = line.strip()
            if line.startswith("element vertex"):
                count = int(line.split()[-1])
            elif line == "end_header":
                break
        if count is None:
            raise IoFailure(f"{path}: missing vertex count")
        points = np.ones((count, 4))
        for i in range(count):
            points[i, :3] = [float(tok) for tok in fh.readline().split()[:3]]
    return PointCloud(points=points)


def _difficulty(box_height_px: float, occlusion: int, truncation: float) -> Optional[str]:
    for name, min_height, max_occ, max_trunc in DIFFICULTY_RULES:
        if box_height_px >= min_height and occlusion <= max_occ and truncation <= max_trunc:
            return name
    return None


def _wrap_angle(a: float) -> float:
    a = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if a == -np.pi else a


def load_labels(path, calib: CameraCalibration) -> List[LabelBox3D]:
    """KITTI object labels converted into velodyne-frame boxes.

    Camera-frame location is the bottom-face center; the geometric
    center used here sits half a height above it.  The heading is
    carried through the rigid transform as a direction vector, so any
    valid cam_to_velo (including identity) behaves consistently.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"label file not found: {path}")
    boxes = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) < 15:
                raise MalformedLine(f"{path}:{line_no}: expected >= 15 fields, got {len(fields)}")
            cls = fields[0]
            try:
                values = [float(tok) for tok in fields[1:]]
            except ValueError as exc:
                raise MalformedLine(f"{path}:{line_no}: non-numeric field") from exc
            truncation, occlusion = values[0], int(values[1])
            bbox = values[3:7]
            dim_h, dim_w, dim_l = values[7:10]
            loc = np.array(values[10:13])
            ry = values[13]
            score = values[14] if len(values) >= 15 else None
            if cls.lower() == "dontcare":
                continue
            box = box_cam_to_velo(
                cls=cls,
                location=loc,
                dimensions=(dim_h, dim_w, dim_l),
                rotation_y=ry,
                calib=calib,
                score=score,
                truncation=truncation,
                occlusion=occlusion,
                bbox_height=bbox[3] - bbox[1],
            )
            boxes.append(box)
    return boxes


def box_cam_to_velo(cls, location, dimensions, rotation_y, calib,
                    score=None, truncation=0.0, occlusion=0, bbox_height=0.0) -> LabelBox3D:
    dim_h, dim_w, dim_l = dimensions
    center_cam = np.asarray(location, dtype=np.float64) + np.array([0.0, -dim_h / 2.0, 0.0])
    rot = calib.cam_to_velo[:, :3]
    center_velo = rot @ center_cam + calib.cam_to_velo[:, 3]
    heading_cam = np.array([np.cos(rotation_y), 0.0, -np.sin(rotation_y)])
    heading_velo = rot @ heading_cam
    yaw = _wrap_angle(np.arctan2(heading_velo[1], heading_velo[0]))
    return LabelBox3D(
        cls=cls,
        center_x=center_velo[0],
        center_y=center_velo[1],
        center_z=center_velo[2],
        length=dim_l,
        width=dim_w,
        height=dim_h,
        yaw=yaw,
        score=score,
        difficulty=_difficulty(bbox_height, occlusion, truncation),
        truncation=truncation,
        occlusion=occlusion,
    )


def box_velo_to_cam(box: LabelBox3D, calib: CameraCalibration):
    """Inverse of box_cam_to_velo: (location, dimensions, rotation_y)."""
    rot = calib.velo_to_cam[:, :3]
    center_cam = rot @ box.center + calib.velo_to_cam[:, 3]
    location = center_cam + np.array([0.0, box.height / 2.0, 0.0])
    heading_velo = np.array([np.cos(box.yaw), np.sin(box.yaw), 0.0])
    heading_cam = rot @ heading_velo
    rotation_y = _wrap_angle(np.arctan2(-heading_cam[2], heading_cam[0]))
    return location, (box.height, box.width, box.length), rotation_y


def _project_bbox(box: LabelBox3D, calib: CameraCalibration):
    """2D image bbox of the 3D box corners (for difficulty on written labels)."""
    location, (h, w, l), ry = box_velo_to_cam(box, calib)
    dx, dz = l / 2.0, w / 2.0
    corners = []
    for cx in (-dx, dx):
        for cy in (0.0, -h):
            for cz in (-dz, dz):
                corners.append((cx, cy, cz))
    corners = np.array(corners)
    c, s = np.cos(ry), np.sin(ry)
    rot_y = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    pts = corners @ rot_y.T + location
    z = np.maximum(pts[:, 2], 1e-6)
    us = calib.focal_u * pts[:, 0] / z + calib.center_u
    vs = calib.focal_v * pts[:, 1] / z + calib.center_v
    return us.min(), vs.min(), us.max(), vs.max()


def write_labels(boxes: List[LabelBox3D], calib: CameraCalibration, path) -> None:
    """Velodyne-frame boxes back to KITTI label lines (16 fields when scored)."""
    try:
        with open(path, "w") as fh:
            for box in boxes:
                location, (h, w, l), ry = box_velo_to_cam(box, calib)
                left, top, right, bottom = _project_bbox(box, calib)
                alpha = _wrap_angle(ry - np.arctan2(location[0], location[2]))
                fields = [
                    box.cls,
                    f"{box.truncation:.2f}",
                    str(int(box.occlusion)),
                    f"{alpha:.6f}",
                    f"{left:.2f}", f"{top:.2f}", f"{right:.2f}", f"{bottom:.2f}",
                    f"{h:.6f}", f"{w:.6f}", f"{l:.6f}",
                    f"{location[0]:.6f}", f"{location[1]:.6f}", f"{location[2]:.6f}",
                    f"{ry:.6f}",
                ]
                if box.score is not None:
                    fields.append(f"{box.score:.6f}")
                fh.write(" ".join(fields) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_disparity_png(path) -> tuple:
    """KITTI ground-truth disparity: uint16 PNG, px = value / 256, 0 invalid.

    Returns (disparity float64 array, validity mask).
    """
    if not os.path.isfile(path):
        raise MissingFile(f"disparity png not found: {path}")
    with Image.open(path) as img:
        raw = np.asarray(img).astype(np.float64)
    valid = raw > 0
    return raw / 256.0, valid


def write_disparity_png(disp: DisparityMap, path) -> None:
    """Encode a disparity map in the KITTI uint16 convention."""
    encoded = np.zeros(disp.data.shape, np.uint16)
    valid = disp.valid & (disp.data > 0)
    encoded[valid] = np.clip(np.rint(disp.data[valid] * 256.0), 1, 65535).astype(np.uint16)
    try:
        Image.fromarray(encoded).save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
