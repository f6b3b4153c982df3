"""The numba kernels and the pure-numpy fallbacks must agree bit for bit."""

import numpy as np
import pytest

from pseudolidar import costvolume, sgm
from pseudolidar._backend import backend_name, set_backend

from conftest import shifted_pair


@pytest.fixture
def restore_backend():
    original = backend_name()
    yield
    set_backend(original)


def _stereo_products(left, right, d_max, params):
    cl = costvolume.census_transform(left, (5, 5))
    cr = costvolume.census_transform(right, (5, 5))
    vol = costvolume.build_cost_volume(cl, cr, d_max)
    agg = sgm.aggregate(vol, params)
    disp = sgm.winner_take_all(agg)
    rdisp = sgm.right_disparity(agg)
    out = sgm.lr_consistency(disp, rdisp, params.lr_threshold)
    return cl.codes, vol.costs, agg.costs, out.data, out.valid


def test_backends_bit_identical(restore_backend):
    rng = np.random.default_rng(99)
    left, right = shifted_pair(40, 70, 4, rng)
    params = sgm.SgmParams(p1=8, p2=90, num_paths=8)

    set_backend("numba")
    numba_out = _stereo_products(left, right, 16, params)
    set_backend("numpy")
    numpy_out = _stereo_products(left, right, 16, params)

    for a, b in zip(numba_out, numpy_out):
        assert a.dtype == b.dtype
        assert np.array_equal(a, b)


@pytest.mark.parametrize("direction", sgm.DIRECTIONS_8)
def test_single_direction_backends_agree(direction, restore_backend):
    rng = np.random.default_rng(hash(direction) % 2**32)
    from pseudolidar.types import LAYER_RAW, CostVolume

    vol = CostVolume(costs=rng.integers(0, 40, (13, 17, 6)).astype(np.uint8), layer=LAYER_RAW)
    set_backend("numba")
    a = sgm.aggregate_directions(vol, 9, 70, [direction])
    set_backend("numpy")
    b = sgm.aggregate_directions(vol, 9, 70, [direction])
    assert np.array_equal(a, b)


def test_numpy_backend_four_paths(restore_backend):
    rng = np.random.default_rng(3)
    left, right = shifted_pair(24, 40, 3, rng)
    set_backend("numpy")
    cl = costvolume.census_transform(left, (5, 5))
    cr = costvolume.census_transform(right, (5, 5))
    vol = costvolume.build_cost_volume(cl, cr, 8)
    agg = sgm.aggregate(vol, sgm.SgmParams(num_paths=4))
    disp = sgm.winner_take_all(agg)
    inner = disp.data[4:-4, 8:-4]
    assert (inner == 3).mean() > 0.95
