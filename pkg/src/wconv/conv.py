"""Direct 2-D convolution, its density-weighted variant, and analytic gradients.

All operators use "same" zero padding: the output pixel (i, j) at stride s
is the inner product of the kernel with the K x K input window centred at
(i * s, j * s), entries outside the image counting as zero.  The weighted
forward pass scales each tap's contribution by the density value for that
offset inside the accumulation loop; premultiplying the kernel once via
``scale_kernel`` is numerically equivalent (to rounding) and cheaper when
the density is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class KernelStack:
    """Trainable conv weights (filters, in_channels, K, K) plus optional bias.

    The bias length must match the channel count of the operator's output:
    ``filters`` for the forward direction, ``in_channels`` for the
    transposed direction.
    """

    weights: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 4:
            raise ShapeError(f"weights must be 4-D, got rank {w.ndim}")
        if w.shape[2] != w.shape[3]:
            raise ShapeError(f"kernel must be square, got {w.shape[2]}x{w.shape[3]}")
        if w.shape[2] % 2 == 0:
            raise ValueError(f"kernel extent must be odd, got {w.shape[2]}")
        if not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite")
        self.weights = w
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.ndim != 1 or not np.all(np.isfinite(b)):
                raise ValueError("bias must be a finite 1-D vector")
            self.bias = b

    @property
    def filters(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def k(self) -> int:
        return self.weights.shape[2]


def scale_kernel(kernel: KernelStack, density: np.ndarray) -> KernelStack:
    """Kernel with every filter premultiplied tap-wise by the density matrix."""
    density = _check_density(density, kernel.k)
    return KernelStack(kernel.weights * density, kernel.bias)


def _check_density(density, k: int) -> np.ndarray:
    density = np.asarray(density, dtype=np.float64)
    if density.shape != (k, k):
        raise ShapeError(f"density shape {density.shape} does not match kernel {k}x{k}")
    return density


def _check_input(x, kernel: KernelStack, stride: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"input must be (batch, channel, row, col), got rank {x.ndim}")
    if x.shape[1] != kernel.in_channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels, kernel expects {kernel.in_channels}"
        )
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    return x


def _window(xp, a, b, stride, ro, co):
    return xp[:, :, a:a + (ro - 1) * stride + 1:stride,
              b:b + (co - 1) * stride + 1:stride]


def _forward(x, weights, density, bias, stride):
    bsz, _, rows, cols = x.shape
    fout, _, k, _ = weights.shape
    pad = k // 2
    ro = -(-rows // stride)
    co = -(-cols // stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((bsz, fout, ro, co))
    for a in range(k):
        for b in range(k):
            term = np.einsum("bcij,fc->bfij", _window(xp, a, b, stride, ro, co),
                             weights[:, :, a, b])
            if density is not None:
                term *= density[a, b]
            out += term
    if bias is not None:
        out += bias[:, None, None]
    return out


def conv2d(x, kernel: KernelStack, stride: int = 1) -> np.ndarray:
    """Standard convolution; output (batch, filters, ceil(R/s), ceil(C/s))."""
    x = _check_input(x, kernel, stride)
    if kernel.bias is not None and kernel.bias.shape[0] != kernel.filters:
        raise ShapeError(f"bias length {kernel.bias.shape[0]} != filters {kernel.filters}")
    return _forward(x, kernel.weights, None, kernel.bias, stride)


def conv2d_weighted(x, kernel: KernelStack, density, stride: int = 1) -> np.ndarray:
    """Weighted convolution: each tap scaled by the density value at that offset.

    A uniform all-ones density reproduces ``conv2d`` bit-for-bit.
    """
    x = _check_input(x, kernel, stride)
    density = _check_density(density, kernel.k)
    if kernel.bias is not None and kernel.bias.shape[0] != kernel.filters:
        raise ShapeError(f"bias length {kernel.bias.shape[0]} != filters {kernel.filters}")
    return _forward(x, kernel.weights, density, kernel.bias, stride)


def _scatter_input(weights, density, upstream, rows, cols, stride):
    bsz, _, ro, co = upstream.shape
    _, cin, k, _ = weights.shape
    pad = k // 2
    gxp = np.zeros((bsz, cin, rows + 2 * pad, cols + 2 * pad))
    for a in range(k):
        for b in range(k):
            w_ab = weights[:, :, a, b]
            if density is not None:
                w_ab = w_ab * density[a, b]
            gxp[:, :, a:a + (ro - 1) * stride + 1:stride,
                b:b + (co - 1) * stride + 1:stride] += np.einsum(
                    "bfij,fc->bcij", upstream, w_ab)
    return gxp[:, :, pad:pad + rows, pad:pad + cols]


def conv2d_transposed_weighted(y, kernel: KernelStack, density=None,
                               upsample: int = 1) -> np.ndarray:
    """Adjoint of the stride-``upsample`` weighted convolution.

    Maps (batch, filters, r, c) to (batch, in_channels, r * upsample,
    c * upsample); satisfies <conv(x), y> == <x, conv_T(y)> when the bias
    is absent.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 4:
        raise ShapeError(f"input must be (batch, channel, row, col), got rank {y.ndim}")
    if y.shape[1] != kernel.filters:
        raise ShapeError(f"input has {y.shape[1]} channels, kernel expects {kernel.filters}")
    if not isinstance(upsample, (int, np.integer)) or upsample < 1:
        raise ValueError(f"upsample factor must be a positive integer, got {upsample!r}")
    if density is not None:
        density = _check_density(density, kernel.k)
    rows, cols = y.shape[2] * upsample, y.shape[3] * upsample
    out = _scatter_input(kernel.weights, density, y, rows, cols, upsample)
    if kernel.bias is not None:
        if kernel.bias.shape[0] != kernel.in_channels:
            raise ShapeError(
                f"bias length {kernel.bias.shape[0]} != output channels "
                f"{kernel.in_channels}"
            )
        out += kernel.bias[:, None, None]
    return out


def grad_weights(x, density, upstream, k: int | None = None,
                 stride: int = 1) -> KernelStack:
    """Loss gradient with respect to the kernel weights and bias.

    ``upstream`` is the loss gradient at the conv output.  With a density
    in place each tap's weight gradient carries the density factor for
    that offset.  ``k`` is only needed when ``density`` is None.
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if density is not None:
        density = np.asarray(density, dtype=np.float64)
        k = density.shape[0]
    elif k is None:
        raise ValueError("kernel extent required when no density is given")
    if x.ndim != 4 or upstream.ndim != 4 or x.shape[0] != upstream.shape[0]:
        raise ShapeError("input and upstream must be 4-D with matching batch")
    bsz, cin, rows, cols = x.shape
    _, fout, ro, co = upstream.shape
    if ro != -(-rows // stride) or co != -(-cols // stride):
        raise ShapeError(f"upstream spatial {ro}x{co} inconsistent with stride {stride}")
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gw = np.zeros((fout, cin, k, k))
    for a in range(k):
        for b in range(k):
            g = np.einsum("bfij,bcij->fc", upstream,
                          _window(xp, a, b, stride, ro, co))
            if density is not None:
                g *= density[a, b]
            gw[:, :, a, b] = g
    gb = upstream.sum(axis=(0, 2, 3))
    return KernelStack(gw, gb)


def grad_input(kernel: KernelStack, density, upstream, input_hw=None,
               stride: int = 1) -> np.ndarray:
    """Loss gradient with respect to the conv input (adjoint map on upstream)."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim != 4:
        raise ShapeError(f"upstream must be 4-D, got rank {upstream.ndim}")
    if upstream.shape[1] != kernel.filters:
        raise ShapeError(
            f"upstream has {upstream.shape[1]} channels, kernel has {kernel.filters}"
        )
    if density is not None:
        density = _check_density(density, kernel.k)
    if input_hw is None:
        input_hw = (upstream.shape[2] * stride, upstream.shape[3] * stride)
    rows, cols = input_hw
    if -(-rows // stride) != upstream.shape[2] or -(-cols // stride) != upstream.shape[3]:
        raise ShapeError(f"input size {rows}x{cols} inconsistent with upstream/stride")
    return _scatter_input(kernel.weights, density, upstream, rows, cols, stride)


def grad_density(x, kernel: KernelStack, upstream, stride: int = 1) -> np.ndarray:
    """Loss gradient with respect to the K x K density matrix (diagnostic)."""
    x = _check_input(x, kernel, stride)
    upstream = np.asarray(upstream, dtype=np.float64)
    k = kernel.k
    bsz, _, rows, cols = x.shape
    ro = -(-rows // stride)
    co = -(-cols // stride)
    if upstream.shape != (bsz, kernel.filters, ro, co):
        raise ShapeError(f"upstream shape {upstream.shape} inconsistent with forward pass")
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gd = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            g = np.einsum("bfij,bcij->fc", upstream,
                          _window(xp, a, b, stride, ro, co))
            gd[a, b] = float(np.sum(g * kernel.weights[:, :, a, b]))
    return gd


def flop_count(rows: int, cols: int, filters: int, k: int, weighted: bool) -> int:
    """Operation count of the direct conv: R*C*F*(3 or 2)*K^2.

    The weighted form spends one extra multiply per tap and output pixel.
    """
    if min(rows, cols, filters, k) <= 0:
        raise ValueError("all dimensions must be positive")
    per_tap = 3 if weighted else 2
    return rows * cols * filters * per_tap * k * k
