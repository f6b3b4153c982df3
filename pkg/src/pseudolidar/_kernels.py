"""Numba kernels for the hot loops: census, Hamming volume, SGM paths.

Imported lazily; importing this module triggers JIT compilation on first
call (cached on disk via cache=True).  Pure-numpy twins live next to the
dispatching functions in costvolume.py and sgm.py.  All kernels use
integer arithmetic only so results match the numpy backend bit for bit
and are independent of the parallel schedule.
"""

import numpy as np
from numba import njit, prange

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_U1 = np.uint64(1)
_U2 = np.uint64(2)
_U4 = np.uint64(4)
_U56 = np.uint64(56)


@njit(inline="always")
def _popcount64(x):
    x = x - ((x >> _U1) & _M1)
    x = (x & _M2) + ((x >> _U2) & _M2)
    x = (x + (x >> _U4)) & _M4
    return (x * _H01) >> _U56


@njit(cache=True, parallel=True)
def census_codes(img, half_w, half_h):
    """Row-major neighbor comparison codes, edge-clamped at the borders."""
    h, w = img.shape
    out = np.zeros((h, w), np.uint64)
    for y in prange(h):
        for x in range(w):
            center = img[y, x]
            code = np.uint64(0)
            for dy in range(-half_h, half_h + 1):
                yy = y + dy
                if yy < 0:
                    yy = 0
                elif yy >= h:
                    yy = h - 1
                for dx in range(-half_w, half_w + 1):
                    if dx == 0 and dy == 0:
                        continue
                    xx = x + dx
                    if xx < 0:
                        xx = 0
                    elif xx >= w:
                        xx = w - 1
                    code = code << _U1
                    if img[yy, xx] < center:
                        code = code | _U1
            out[y, x] = code
    return out


@njit(cache=True, parallel=True)
def hamming_volume(left_codes, right_codes, max_disparity, sentinel):
    h, w = left_codes.shape
    out = np.empty((h, w, max_disparity), np.uint8)
    for y in prange(h):
        for x in range(w):
            code = left_codes[y, x]
            d_reach = x + 1
            if d_reach > max_disparity:
                d_reach = max_disparity
            for d in range(d_reach):
                out[y, x, d] = np.uint8(_popcount64(code ^ right_codes[y, x - d]))
            for d in range(d_reach, max_disparity):
                out[y, x, d] = sentinel
    return out


@njit(cache=True, parallel=True)
def aggregate_direction(cost, p1, p2, dx, dy, starts_x, starts_y, agg):
    """Accumulate one SGM path direction into agg (int32, in place).

    Each start pixel owns an independent 1-D path; paths within a
    direction touch disjoint pixels, so the prange carries no races.
    """
    h, w, nd = cost.shape
    p1_ = np.int32(p1)
    p2_ = np.int32(p2)
    for i in prange(starts_x.shape[0]):
        x = starts_x[i]
        y = starts_y[i]
        prev = np.empty(nd, np.int32)
        cur = np.empty(nd, np.int32)
        for d in range(nd):
            v = np.int32(cost[y, x, d])
            prev[d] = v
            agg[y, x, d] += v
        x += dx
        y += dy
        while 0 <= x < w and 0 <= y < h:
            m = prev[0]
            for d in range(1, nd):
                if prev[d] < m:
                    m = prev[d]
            cap = m + p2_
            if nd == 1:
                v = np.int32(cost[y, x, 0]) + min(prev[0], cap) - m
                cur[0] = v
                agg[y, x, 0] += v
            else:
                best = prev[0]
                c = prev[1] + p1_
                if c < best:
                    best = c
                if cap < best:
                    best = cap
                v = np.int32(cost[y, x, 0]) + best - m
                cur[0] = v
                agg[y, x, 0] += v
                for d in range(1, nd - 1):
                    best = prev[d]
                    c = prev[d - 1] + p1_
                    if c < best:
                        best = c
                    c = prev[d + 1] + p1_
                    if c < best:
                        best = c
                    if cap < best:
                        best = cap
                    v = np.int32(cost[y, x, d]) + best - m
                    cur[d] = v
                    agg[y, x, d] += v
                best = prev[nd - 1]
                c = prev[nd - 2] + p1_
                if c < best:
                    best = c
                if cap < best:
                    best = cap
                v = np.int32(cost[y, x, nd - 1]) + best - m
                cur[nd - 1] = v
                agg[y, x, nd - 1] += v
            tmp = prev
            prev = cur
            cur = tmp
            x += dx
            y += dy


@njit(cache=True, parallel=True)
def wta_argmin(costs):
    """First-minimum argmin over the disparity axis (ties to smaller d)."""
    h, w, nd = costs.shape
    out = np.empty((h, w), np.int64)
    for y in prange(h):
        for x in range(w):
            best = costs[y, x, 0]
            best_d = 0
            for d in range(1, nd):
                c = costs[y, x, d]
                if c < best:
                    best = c
                    best_d = d
            out[y, x] = best_d
    return out


@njit(cache=True, parallel=True)
def wta_right_argmin(costs, big):
    """Argmin over the right-view re-indexing C_R(x,y,d) = C(x+d,y,d).

    Scans left pixels in ascending x so candidates for a right pixel
    arrive in ascending d; strict < keeps the smallest d on ties,
    matching a materialized-argmin result exactly.
    """
    h, w, nd = costs.shape
    out = np.zeros((h, w), np.int64)
    for y in prange(h):
        best = np.full(w, big, np.int32)
        for xl in range(w):
            d_reach = xl + 1
            if d_reach > nd:
                d_reach = nd
            for d in range(d_reach):
                c = costs[y, xl, d]
                xr = xl - d
                if c < best[xr]:
                    best[xr] = c
                    out[y, xr] = d
    return out


def warm_up():
    """Force compilation of every kernel on tiny inputs."""
    img = np.arange(36, dtype=np.float64).reshape(6, 6)
    codes = census_codes(img, 1, 1)
    vol = hamming_volume(codes, codes, 3, np.uint8(255))
    agg = np.zeros(vol.shape, np.int32)
    sx = np.zeros(vol.shape[0], np.int64)
    sy = np.arange(vol.shape[0], dtype=np.int64)
    aggregate_direction(vol, 10, 120, 1, 0, sx, sy, agg)
    wta_argmin(agg)
    wta_right_argmin(agg, np.int32(2**30))
