"""
Position-sensitive RoI pooling and position-sensitive average pooling.

Score maps hold k*k groups of M channels. Bin j = ph * k + pw of a pooled RoI reads only the
channel group starting at j * M, so pooled value (i, ph, pw) averages channel j * M + i over the
cells of that bin.

Position-sensitive average pooling then reduces each pooled map X_i (N * N positions, N = k) to
y_i = (1 / N^2) * sum_j w_j * x_{i,j}; with w = 1 this is plain global average pooling.
"""
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import BoxError, ShapeError

Bin = Tuple[int, int, int, int]


@dataclass
class PoolWeights:
    """Learnable per-position weights w_j with gradient and momentum buffers."""

    w: np.ndarray
    grad_w: np.ndarray = field(default=None)
    momentum: np.ndarray = field(default=None)
    frozen: bool = False

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if self.grad_w is None:
            self.grad_w = np.zeros_like(self.w)
        if self.momentum is None:
            self.momentum = np.zeros_like(self.w)

    @classmethod
    def uniform(cls, positions: int, frozen: bool = False) -> "PoolWeights":
        return cls(w=np.ones(positions, dtype=np.float64), frozen=frozen)

    @property
    def positions(self) -> int:
        return len(self.w)

    def zero_grad(self) -> None:
        self.grad_w[...] = 0.0


def _roi_bins(
    roi: Sequence[float], k: int, spatial_scale: float, height: int, width: int
) -> List[Bin]:
    """Integer (h_start, h_end, w_start, w_end) cell ranges of the k x k bins, row-major."""
    x1, y1, x2, y2 = (float(v) * spatial_scale for v in roi)
    if x2 <= x1 or y2 <= y1:
        raise BoxError(f"RoI {tuple(roi)} has no area on the feature grid")

    bin_w = (x2 - x1) / k
    bin_h = (y2 - y1) / k
    bins = []
    for ph in range(k):
        h_start = math.floor(y1 + ph * bin_h)
        h_end = max(math.ceil(y1 + (ph + 1) * bin_h), h_start + 1)
        h_start, h_end = min(max(h_start, 0), height), min(max(h_end, 0), height)
        for pw in range(k):
            w_start = math.floor(x1 + pw * bin_w)
            w_end = max(math.ceil(x1 + (pw + 1) * bin_w), w_start + 1)
            w_start, w_end = min(max(w_start, 0), width), min(max(w_end, 0), width)
            bins.append((h_start, h_end, w_start, w_end))
    return bins


def _group_channels(channels: int, k: int) -> int:
    if channels % (k * k) != 0:
        raise ShapeError(f"Channel count {channels} is not divisible by k^2 = {k * k}")
    return channels // (k * k)


def psroi_pool_forward(
    maps: np.ndarray, roi: Sequence[float], k: int, spatial_scale: float
) -> np.ndarray:
    """
    Pool one RoI from position-sensitive score maps.

    Args:
        maps: (k*k*M, H, W) score maps
        roi: (x1, y1, x2, y2) in image pixels
        k: pooling grid size
        spatial_scale: image-to-feature coordinate factor (1 / stride)

    Returns:
        (M, k, k) pooled feature; empty bins are 0
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    channels, height, width = maps.shape
    m = _group_channels(channels, k)
    out = np.zeros((m, k, k), dtype=np.float64)

    for j, (hs, he, ws, we) in enumerate(_roi_bins(roi, k, spatial_scale, height, width)):
        if he <= hs or we <= ws:
            continue
        window = maps[j * m : (j + 1) * m, hs:he, ws:we]
        out[:, j // k, j % k] = window.sum(axis=(1, 2)) / ((he - hs) * (we - ws))
    return out


def psroi_pool_backward(
    grad_out: np.ndarray,
    roi: Sequence[float],
    k: int,
    spatial_scale: float,
    maps_shape: Tuple[int, int, int],
) -> np.ndarray:
    """Gradient w.r.t. the score maps: each cell of bin j gets grad_out[i, j] / cell count."""
    grad_maps = np.zeros(maps_shape, dtype=np.float64)
    _accumulate_psroi_grad(grad_maps, grad_out, roi, k, spatial_scale)
    return grad_maps


def _accumulate_psroi_grad(
    grad_maps: np.ndarray, grad_out: np.ndarray, roi: Sequence[float], k: int, spatial_scale: float
) -> None:
    channels, height, width = grad_maps.shape
    m = _group_channels(channels, k)
    if grad_out.shape != (m, k, k):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match ({m}, {k}, {k})")

    for j, (hs, he, ws, we) in enumerate(_roi_bins(roi, k, spatial_scale, height, width)):
        if he <= hs or we <= ws:
            continue
        share = grad_out[:, j // k, j % k] / ((he - hs) * (we - ws))
        grad_maps[j * m : (j + 1) * m, hs:he, ws:we] += share[:, None, None]


def psroi_pool_forward_batch(
    maps: np.ndarray, rois: np.ndarray, k: int, spatial_scale: float
) -> np.ndarray:
    """(R, M, k, k) pooled features for R RoIs."""
    rois = np.asarray(rois, dtype=np.float64).reshape(-1, 4)
    m = _group_channels(maps.shape[0], k)
    out = np.zeros((len(rois), m, k, k), dtype=np.float64)
    for r, roi in enumerate(rois):
        out[r] = psroi_pool_forward(maps, roi, k, spatial_scale)
    return out


def psroi_pool_backward_batch(
    grad_out: np.ndarray,
    rois: np.ndarray,
    k: int,
    spatial_scale: float,
    maps_shape: Tuple[int, int, int],
) -> np.ndarray:
    """Score-map gradient for R RoIs, accumulated in RoI order."""
    rois = np.asarray(rois, dtype=np.float64).reshape(-1, 4)
    if len(grad_out) != len(rois):
        raise ShapeError(f"{len(grad_out)} gradients for {len(rois)} RoIs")
    grad_maps = np.zeros(maps_shape, dtype=np.float64)
    for r, roi in enumerate(rois):
        _accumulate_psroi_grad(grad_maps, grad_out[r], roi, k, spatial_scale)
    return grad_maps


def _flatten_positions(x: np.ndarray) -> Tuple[np.ndarray, int]:
    """View (..., M, N, N) as contiguous (..., M, N*N)."""
    if x.ndim < 3 or x.shape[-1] != x.shape[-2]:
        raise ShapeError(f"Pooled feature must end in (M, N, N), got {x.shape}")
    positions = x.shape[-1] * x.shape[-2]
    return np.ascontiguousarray(x).reshape(*x.shape[:-2], positions), positions


def global_average_pool(x: np.ndarray) -> np.ndarray:
    """Uniform voting over the N*N positions of every pooled map."""
    flat, positions = _flatten_positions(x)
    return flat.sum(axis=-1) / positions


def ps_avg_pool_forward(x: np.ndarray, w: PoolWeights) -> np.ndarray:
    """
    Position-sensitive average pooling.

    Args:
        x: (M, N, N) pooled feature, or (R, M, N, N) for a batch of RoIs
        w: N*N position weights

    Returns:
        (M,) or (R, M) pooled values y_i = (1 / N^2) * sum_j w_j * x_{i,j}
    """
    flat, positions = _flatten_positions(x)
    if w.positions != positions:
        raise ShapeError(f"{w.positions} weights for {positions} positions")
    return (flat * w.w).sum(axis=-1) / positions


def ps_avg_pool_backward(
    grad_y: np.ndarray, x: np.ndarray, w: PoolWeights
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Adjoint of ps_avg_pool_forward.

    Returns:
        grad_x with the shape of x (dL/dx_{i,j} = grad_y_i * w_j / N^2) and grad_w of length
        N^2 (dL/dw_j = (1 / N^2) * sum_i grad_y_i * x_{i,j}, summed over RoIs for a batch)
    """
    flat, positions = _flatten_positions(x)
    grad_y = np.asarray(grad_y, dtype=np.float64)
    if grad_y.shape != flat.shape[:-1]:
        raise ShapeError(f"grad_y shape {grad_y.shape} does not match {flat.shape[:-1]}")
    if w.positions != positions:
        raise ShapeError(f"{w.positions} weights for {positions} positions")

    grad_x = (grad_y[..., None] * w.w / positions).reshape(x.shape)
    grad_w = (grad_y[..., None] * flat).reshape(-1, positions).sum(axis=0) / positions
    return grad_x, grad_w
