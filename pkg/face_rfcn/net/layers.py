"""Strided, dilated, zero-padded convolution and rectifier layers with explicit backward passes."""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..errors import ShapeError


def conv_output_size(size: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    span = dilation * (kernel - 1) + 1
    return (size + 2 * padding - span) // stride + 1


def _taps(start: int, stride: int, count: int) -> slice:
    return slice(start, start + stride * (count - 1) + 1, stride)


def _gather_windows(
    xp: np.ndarray, kh: int, kw: int, stride: int, dilation: int, out_h: int, out_w: int
) -> np.ndarray:
    """im2col: (C, kh, kw, out_h, out_w) taps read from the padded input."""
    channels = xp.shape[0]
    cols = np.empty((channels, kh, kw, out_h, out_w), dtype=np.float64)
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            cols[:, i, j] = xp[:, _taps(y0, stride, out_h), _taps(x0, stride, out_w)]
    return cols


def conv2d_forward(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, dilation: int, padding: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    2-D cross-correlation of a single (C, H, W) input.

    Returns:
        (output (O, H', W'), gathered windows kept for the backward pass)
    """
    out_ch, in_ch, kh, kw = kernel.shape
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ShapeError(f"Expected input with {in_ch} channels, got {x.shape}")
    _, height, width = x.shape
    out_h = conv_output_size(height, kh, stride, dilation, padding)
    out_w = conv_output_size(width, kw, stride, dilation, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"Input {x.shape} too small for kernel {kernel.shape}")

    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _gather_windows(xp, kh, kw, stride, dilation, out_h, out_w)
    out = kernel.reshape(out_ch, -1) @ cols.reshape(in_ch * kh * kw, -1) + bias[:, None]
    return out.reshape(out_ch, out_h, out_w), cols


def conv2d_backward(
    grad_out: np.ndarray,
    cols: np.ndarray,
    x_shape: Tuple[int, int, int],
    kernel: np.ndarray,
    stride: int,
    dilation: int,
    padding: int,
    need_input_grad: bool = True,
) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Gradients (input, kernel, bias) of conv2d_forward."""
    out_ch, in_ch, kh, kw = kernel.shape
    _, out_h, out_w = grad_out.shape
    g = grad_out.reshape(out_ch, -1)

    grad_kernel = (g @ cols.reshape(in_ch * kh * kw, -1).T).reshape(kernel.shape)
    grad_bias = g.sum(axis=1)
    if not need_input_grad:
        return None, grad_kernel, grad_bias

    dcols = (kernel.reshape(out_ch, -1).T @ g).reshape(in_ch, kh, kw, out_h, out_w)
    _, height, width = x_shape
    dxp = np.zeros((in_ch, height + 2 * padding, width + 2 * padding), dtype=np.float64)
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            dxp[:, _taps(y0, stride, out_h), _taps(x0, stride, out_w)] += dcols[:, i, j]
    return dxp[:, padding : padding + height, padding : padding + width], grad_kernel, grad_bias


@dataclass
class ConvLayer:
    """Convolution with optional trailing rectifier, its gradients and momentum buffers."""

    name: str
    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    dilation: int = 1
    padding: int = 0
    relu: bool = True
    frozen: bool = False
    grad_kernel: np.ndarray = field(default=None, repr=False)
    grad_bias: np.ndarray = field(default=None, repr=False)
    momentum_kernel: np.ndarray = field(default=None, repr=False)
    momentum_bias: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.stride < 1 or self.dilation < 1:
            raise ValueError(f"{self.name}: stride and dilation must be >= 1")
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        for attr, like in (
            ("grad_kernel", self.kernel),
            ("grad_bias", self.bias),
            ("momentum_kernel", self.kernel),
            ("momentum_bias", self.bias),
        ):
            if getattr(self, attr) is None:
                setattr(self, attr, np.zeros_like(like))

    @classmethod
    def initialize(
        cls,
        name: str,
        in_ch: int,
        out_ch: int,
        size: int,
        rng: np.random.Generator,
        std: Optional[float] = None,
        **kwargs,
    ) -> "ConvLayer":
        """Zero-mean normal kernel (fan-in scaled unless ``std`` is given), zero bias."""
        fan_in = in_ch * size * size
        std = std if std is not None else np.sqrt(2.0 / fan_in)
        kernel = rng.normal(0.0, std, size=(out_ch, in_ch, size, size))
        return cls(name=name, kernel=kernel, bias=np.zeros(out_ch), **kwargs)

    @property
    def num_parameters(self) -> int:
        return self.kernel.size + self.bias.size

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, tuple]:
        out, cols = conv2d_forward(
            x, self.kernel, self.bias, self.stride, self.dilation, self.padding
        )
        if self.relu:
            out = np.maximum(out, 0.0)
        return out, (x.shape, cols, out)

    def backward(self, grad_out: np.ndarray, cache: tuple, need_input_grad: bool = True):
        """Accumulate kernel/bias gradients and return the input gradient."""
        x_shape, cols, out = cache
        if self.relu:
            grad_out = grad_out * (out > 0)
        grad_x, grad_kernel, grad_bias = conv2d_backward(
            grad_out, cols, x_shape, self.kernel, self.stride, self.dilation, self.padding,
            need_input_grad,
        )
        self.grad_kernel += grad_kernel
        self.grad_bias += grad_bias
        return grad_x

    def zero_grad(self) -> None:
        self.grad_kernel[...] = 0.0
        self.grad_bias[...] = 0.0
