"""Census transform and Hamming-distance cost volume construction.

The volume is dense H x W x D: entries whose right-image column would
fall off-frame (x < d) carry RAW_COST_SENTINEL so downstream stages see
a uniform shape.
"""

import numpy as np

from ._backend import use_numba
from .errors import SizeMismatch, WindowTooLarge
from .types import LAYER_RAW, CensusImage, CostVolume, RAW_COST_SENTINEL

DEFAULT_WINDOW = (5, 5)
DEFAULT_MAX_DISPARITY = 128


def census_transform(img: np.ndarray, window=DEFAULT_WINDOW) -> CensusImage:
    """Per-pixel census code over an odd w x h window, borders edge-clamped.

    Bit k of a code (counting from the most significant end of the
    w*h-1 used bits) is 1 iff the k-th neighbor in row-major order,
    center excluded, is strictly darker than the center.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    w, h = int(window[0]), int(window[1])
    if w % 2 == 0 or h % 2 == 0 or w < 1 or h < 1:
        raise WindowTooLarge(f"census window must be odd-sized, got {w}x{h}")
    if w * h - 1 > 64:
        raise WindowTooLarge(f"census window {w}x{h} exceeds 64 code bits")
    if img.shape[0] < h or img.shape[1] < w:
        raise WindowTooLarge(
            f"image {img.shape[1]}x{img.shape[0]} smaller than census window {w}x{h}"
        )
    if use_numba():
        from . import _kernels

        codes = _kernels.census_codes(img, w // 2, h // 2)
    else:
        codes = _census_numpy(img, w // 2, h // 2)
    return CensusImage(codes=codes, window=(w, h))


def _census_numpy(img, half_w, half_h):
    height, width = img.shape
    padded = np.pad(img, ((half_h, half_h), (half_w, half_w)), mode="edge")
    codes = np.zeros((height, width), np.uint64)
    one = np.uint64(1)
    for dy in range(-half_h, half_h + 1):
        for dx in range(-half_w, half_w + 1):
            if dx == 0 and dy == 0:
                continue
            neighbor = padded[half_h + dy : half_h + dy + height, half_w + dx : half_w + dx + width]
            codes = (codes << one) | (neighbor < img).astype(np.uint64)
    return codes


def build_cost_volume(left: CensusImage, right: CensusImage, max_disparity: int = DEFAULT_MAX_DISPARITY) -> CostVolume:
    """Raw volume: C(x, y, d) = popcount(left(x, y) ^ right(x - d, y)) for x >= d."""
    if left.codes.shape != right.codes.shape:
        raise SizeMismatch(
            f"census image shapes differ: {left.codes.shape} vs {right.codes.shape}"
        )
    if left.window != right.window:
        raise SizeMismatch(f"census windows differ: {left.window} vs {right.window}")
    if max_disparity < 1:
        raise ValueError(f"max_disparity must be >= 1, got {max_disparity}")
    if use_numba():
        from . import _kernels

        costs = _kernels.hamming_volume(
            left.codes, right.codes, int(max_disparity), np.uint8(RAW_COST_SENTINEL)
        )
    else:
        costs = _hamming_numpy(left.codes, right.codes, int(max_disparity))
    return CostVolume(costs=costs, layer=LAYER_RAW)


def _hamming_numpy(left_codes, right_codes, max_disparity):
    height, width = left_codes.shape
    costs = np.full((height, width, max_disparity), RAW_COST_SENTINEL, np.uint8)
    for d in range(min(max_disparity, width)):
        xor = left_codes[:, d:] ^ right_codes[:, : width - d]
        costs[:, d:, d] = np.bitwise_count(xor).astype(np.uint8)
    return costs
