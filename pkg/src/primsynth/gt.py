"""Reconstruction targets: point maps from z-depth, validity masks, smooth-L1."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cameras import CameraSample


@dataclass
class PointMap:
    points: np.ndarray      # (H, W, 3), NaN where invalid
    valid: np.ndarray       # (H, W) bool


@dataclass
class ValidityMask:
    mask: np.ndarray
    threshold: float


class EmptyMaskWarning(UserWarning):
    pass


def pixel_rays(cam: CameraSample) -> np.ndarray:
    """Camera-frame rays ``(x, y, 1)`` through every pixel centre, (H, W, 3)."""
    f = cam.focal
    cx, cy = cam.principal_point
    u = (np.arange(cam.width) + 0.5 - cx) / f
    v = (np.arange(cam.height) + 0.5 - cy) / f
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv, np.ones_like(uu)], axis=-1)


def validity_mask(depth: np.ndarray, threshold: float) -> ValidityMask:
    """``hit and depth <= threshold``; misses are non-finite depths."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    depth = np.asarray(depth, dtype=float)
    with np.errstate(invalid="ignore"):
        mask = np.isfinite(depth) & (depth > 0) & (depth <= threshold)
    return ValidityMask(mask, float(threshold))


def depth_to_points(depth: np.ndarray, cam: CameraSample,
                    threshold: float = np.inf) -> PointMap:
    """World points of every pixel; invalid pixels are NaN."""
    depth = np.asarray(depth, dtype=float)
    if depth.shape != (cam.height, cam.width):
        raise ValueError(f"depth raster {depth.shape} does not match camera "
                         f"{(cam.height, cam.width)}")
    valid = validity_mask(depth, threshold).mask if np.isfinite(threshold) else (
        np.isfinite(depth) & (depth > 0))
    cam_pts = pixel_rays(cam) * np.where(valid, depth, np.nan)[..., None]
    world = cam_pts @ cam.R.T + cam.center
    return PointMap(world, valid)


def project(cam: CameraSample, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Continuous pixel coordinates (pixel centres at ``+0.5``) and z-depth."""
    p = np.asarray(points, dtype=float)
    c = (p - cam.center) @ cam.R
    z = c[..., 2]
    f = cam.focal
    cx, cy = cam.principal_point
    uv = np.stack([f * c[..., 0] / z + cx, f * c[..., 1] / z + cy], axis=-1)
    return uv, z


def reprojection_error(depth: np.ndarray, cam: CameraSample) -> float:
    """Largest pixel distance between a valid pixel centre and its re-projected point."""
    pm = depth_to_points(depth, cam)
    if not pm.valid.any():
        return 0.0
    uv, _ = project(cam, pm.points[pm.valid])
    rows, cols = np.nonzero(pm.valid)
    centre = np.stack([cols + 0.5, rows + 0.5], axis=1)
    return float(np.abs(uv - centre).max())


def smooth_l1(e: np.ndarray, beta: float) -> np.ndarray:
    a = np.abs(e)
    return np.where(a < beta, 0.5 * a * a / beta, a - 0.5 * beta)


def masked_smooth_l1(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray,
                     beta: float = 1.0) -> float:
    """Mean smooth-L1 over masked pixels and their coordinates.

    ``pred``/``gt`` are (H, W, C) or (H, W); ``mask`` is (H, W). An empty mask
    gives 0.0 with an :class:`EmptyMaskWarning`.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if isinstance(mask, ValidityMask):
        mask = mask.mask
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or pred.shape[:mask.ndim] != mask.shape:
        raise ValueError("prediction, target and mask shapes do not match")
    if not mask.any():
        warnings.warn("no masked pixels; loss defined as 0", EmptyMaskWarning, stacklevel=2)
        return 0.0
    return float(smooth_l1(pred[mask] - gt[mask], beta).mean())
