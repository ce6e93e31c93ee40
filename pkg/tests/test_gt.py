import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primsynth.cameras import CameraSample, Region, look_at
from primsynth.gt import (EmptyMaskWarning, depth_to_points, masked_smooth_l1, project,
                          reprojection_error, smooth_l1, validity_mask)


def _cam(w=4, h=4, pos=(0.0, 0.0, 0.0), target=(0.0, 0.0, 1.0), fov=60.0):
    return CameraSample(tuple(pos), tuple(look_at(pos, target).ravel()), fov, w, h, Region.INNER)


def _identity_cam(w, h, fov=60.0):
    return CameraSample((0.0, 0.0, 0.0), tuple(np.eye(3).ravel()), fov, w, h, Region.INNER)


def test_principal_pixel_unit_depth():
    # an odd-sized image puts a pixel centre exactly on the principal point
    cam = _identity_cam(5, 5)
    depth = np.ones((5, 5))
    pm = depth_to_points(depth, cam)
    assert np.allclose(pm.points[2, 2], (0.0, 0.0, 1.0), atol=1e-15)


def test_points_round_trip(rng):
    for _ in range(20):
        cam = _cam(32, 24, rng.normal(size=3) * 3, rng.normal(size=3) * 3, rng.uniform(45, 70))
        depth = rng.uniform(0.5, 30.0, (24, 32))
        pm = depth_to_points(depth, cam)
        uv, z = project(cam, pm.points)
        rows, cols = np.mgrid[0:24, 0:32]
        assert np.abs(uv[..., 0] - (cols + 0.5)).max() < 1e-9
        assert np.abs(uv[..., 1] - (rows + 0.5)).max() < 1e-9
        assert np.allclose(z, depth, rtol=1e-12)
        assert reprojection_error(depth, cam) < 1e-4


def test_miss_is_invalid():
    depth = np.array([[np.inf, 2.0], [3.0, np.inf]])
    pm = depth_to_points(depth, _identity_cam(2, 2))
    assert pm.valid.tolist() == [[False, True], [True, False]]
    assert np.isnan(pm.points[0, 0]).all() and np.isfinite(pm.points[0, 1]).all()


def test_depth_shape_checked():
    with pytest.raises(ValueError):
        depth_to_points(np.ones((3, 4)), _identity_cam(3, 3))


def test_mask_example():
    m = validity_mask(np.array([[50.0, 150.0], [np.inf, 99.0]]), 100.0)
    assert m.mask.tolist() == [[True, False], [False, True]]
    assert m.threshold == 100.0


def test_mask_boundary_and_threshold():
    assert validity_mask(np.array([100.0]), 100.0).mask[0]
    assert validity_mask(np.array([1e30, np.inf]), np.inf).mask.tolist() == [True, False]
    assert not validity_mask(np.full((3, 3), np.inf), 100.0).mask.any()
    with pytest.raises(ValueError):
        validity_mask(np.ones(2), 0.0)


def test_smooth_l1_values():
    v = smooth_l1(np.array([0.0, 0.5, 2.0, -2.0]), 1.0)
    assert np.abs(v - [0.0, 0.125, 1.5, 1.5]).max() < 1e-12


@pytest.mark.parametrize("beta", [0.1, 1.0, 3.0])
def test_smooth_l1_knee_continuous(beta):
    h = 1e-7
    lo = smooth_l1(np.array([beta - h]), beta)[0]
    hi = smooth_l1(np.array([beta + h]), beta)[0]
    mid = smooth_l1(np.array([beta]), beta)[0]
    assert abs(hi - lo) / (2 * h) == pytest.approx(1.0, abs=1e-6)
    assert abs(mid - 0.5 * beta) < 1e-12


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0, 100), b=st.floats(0, 100), beta=st.floats(0.01, 10))
def test_smooth_l1_monotone_in_magnitude(a, b, beta):
    lo, hi = sorted((a, b))
    va, vb = smooth_l1(np.array([lo, -hi]), beta)
    assert va <= vb + 1e-12


def test_masked_loss_mean_over_masked_coords():
    gt = np.zeros((2, 2, 3))
    pred = np.zeros((2, 2, 3))
    pred[0, 0] = 2.0
    pred[1, 1] = 100.0
    mask = np.array([[True, True], [False, False]])
    assert masked_smooth_l1(pred, gt, mask) == pytest.approx((3 * 1.5 + 3 * 0.0) / 6)


def test_masked_loss_empty_mask_warns():
    z = np.zeros((2, 2, 3))
    with pytest.warns(EmptyMaskWarning):
        assert masked_smooth_l1(z, z + 1, np.zeros((2, 2), bool)) == 0.0


def test_masked_loss_shape_mismatch():
    with pytest.raises(ValueError):
        masked_smooth_l1(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)), np.ones((2, 2), bool))
    with pytest.raises(ValueError):
        masked_smooth_l1(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((3, 2), bool))


def test_masked_loss_ignores_nan_outside_mask():
    gt = np.full((2, 2), np.nan)
    gt[0, 0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        loss = masked_smooth_l1(np.ones((2, 2)), gt, np.array([[True, False], [False, False]]))
    assert loss == 0.0
