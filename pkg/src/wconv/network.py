"""Image-to-image learning model and its plain-SGD trainer.

The model is three density-weighted convolution layers, each followed by
batch normalisation and a ReLU: a strided 1->c layer, a c->c layer, and a
transposed c->1 layer that undoes the stride.  All three share one density
matrix, which scales kernel taps but is never trained; the trainable
parameters (weights, biases, batch-norm scale/shift) are updated with
stochastic gradient descent on the mean squared error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .conv import (KernelStack, conv2d, conv2d_transposed_weighted,
                   conv2d_weighted, grad_input, grad_weights)
from .errors import DegenerateBatchError, DivergenceError, ShapeError


@dataclass
class ModelConfig:
    channels: int = 4
    stride: int = 1
    kernel: int = 3
    density: np.ndarray | None = None
    epochs: int = 20
    learning_rate: float = 0.01
    batch_size: int | None = None
    seed: int = 0
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel extent must be odd, got {self.kernel}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.density is not None:
            d = np.asarray(self.density, dtype=np.float64)
            if d.shape != (self.kernel, self.kernel):
                raise ShapeError(
                    f"density shape {d.shape} does not match kernel "
                    f"{self.kernel}x{self.kernel}"
                )
            self.density = d


def kaiming_init(shape, fan_in: int, seed) -> np.ndarray:
    """Zero-mean normal draws with standard deviation sqrt(2 / fan_in)."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_grad(pred, target) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


class BatchNorm2d:
    """Per-channel normalisation over (batch, row, col), training statistics."""

    def __init__(self, channels: int, eps: float = 1e-5):
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.eps = eps
        self.grad_gamma = np.zeros(channels)
        self.grad_beta = np.zeros(channels)
        self._xhat = None
        self._inv_std = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count < 2:
            raise DegenerateBatchError(
                f"need at least 2 samples per channel, got {count}"
            )
        mean = x.mean(axis=(0, 2, 3), keepdims=True)
        var = x.var(axis=(0, 2, 3), keepdims=True)
        self._inv_std = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mean) * self._inv_std
        return self.gamma[:, None, None] * self._xhat + self.beta[:, None, None]

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        xhat, inv_std = self._xhat, self._inv_std
        self.grad_gamma = np.sum(upstream * xhat, axis=(0, 2, 3))
        self.grad_beta = np.sum(upstream, axis=(0, 2, 3))
        g = upstream * self.gamma[:, None, None]
        g_mean = g.mean(axis=(0, 2, 3), keepdims=True)
        gx_mean = (g * xhat).mean(axis=(0, 2, 3), keepdims=True)
        return inv_std * (g - g_mean - xhat * gx_mean)


class _WeightedConv:
    def __init__(self, kernel: KernelStack, density, stride: int):
        self.kernel = kernel
        self.density = density
        self.stride = stride
        self.grad_w = np.zeros_like(kernel.weights)
        self.grad_b = np.zeros_like(kernel.bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        if self.density is None:
            return conv2d(x, self.kernel, self.stride)
        return conv2d_weighted(x, self.kernel, self.density, self.stride)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        g = grad_weights(self._x, self.density, upstream, k=self.kernel.k,
                         stride=self.stride)
        self.grad_w, self.grad_b = g.weights, g.bias
        return grad_input(self.kernel, self.density, upstream,
                          input_hw=self._x.shape[2:], stride=self.stride)


class _TransposedWeightedConv:
    def __init__(self, kernel: KernelStack, density, upsample: int):
        self.kernel = kernel
        self.density = density
        self.upsample = upsample
        self.grad_w = np.zeros_like(kernel.weights)
        self.grad_b = np.zeros_like(kernel.bias)
        self._y = None

    def forward(self, y: np.ndarray) -> np.ndarray:
        self._y = y
        return conv2d_transposed_weighted(y, self.kernel, self.density,
                                          self.upsample)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        # The forward map is the adjoint of a strided conv, so the weight
        # gradient swaps the roles of input and upstream, and the input
        # gradient is the strided conv itself.
        g = grad_weights(upstream, self.density, self._y, k=self.kernel.k,
                         stride=self.upsample)
        self.grad_w = g.weights
        self.grad_b = upstream.sum(axis=(0, 2, 3))
        unbiased = KernelStack(self.kernel.weights, None)
        if self.density is None:
            return conv2d(upstream, unbiased, self.upsample)
        return conv2d_weighted(upstream, unbiased, self.density, self.upsample)


class DenoiseNet:
    """Three weighted conv layers with batch norm and ReLU after each."""

    def __init__(self, cfg: ModelConfig):
        c, k, s = cfg.channels, cfg.kernel, cfg.stride
        density = cfg.density
        self.cfg = cfg
        w1 = kaiming_init((c, 1, k, k), fan_in=k * k, seed=[cfg.seed, 0])
        w2 = kaiming_init((c, c, k, k), fan_in=c * k * k, seed=[cfg.seed, 1])
        w3 = kaiming_init((c, 1, k, k), fan_in=c * k * k, seed=[cfg.seed, 2])
        self.conv1 = _WeightedConv(KernelStack(w1, np.zeros(c)), density, s)
        self.conv2 = _WeightedConv(KernelStack(w2, np.zeros(c)), density, 1)
        self.conv3 = _TransposedWeightedConv(KernelStack(w3, np.zeros(1)), density, s)
        self.bn1 = BatchNorm2d(c, cfg.bn_eps)
        self.bn2 = BatchNorm2d(c, cfg.bn_eps)
        self.bn3 = BatchNorm2d(1, cfg.bn_eps)
        self._masks = [None, None, None]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"expected (batch, 1, rows, cols), got {x.shape}")
        s = self.cfg.stride
        if x.shape[2] % s or x.shape[3] % s:
            raise ShapeError(f"spatial dims {x.shape[2:]} not divisible by stride {s}")
        h = x
        for i, (conv, bn) in enumerate([(self.conv1, self.bn1),
                                        (self.conv2, self.bn2),
                                        (self.conv3, self.bn3)]):
            h = bn.forward(conv.forward(h))
            self._masks[i] = h > 0
            h = np.maximum(h, 0.0)
        return h

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        g = upstream
        for i, (conv, bn) in zip([2, 1, 0], [(self.conv3, self.bn3),
                                             (self.conv2, self.bn2),
                                             (self.conv1, self.bn1)]):
            g = conv.backward(bn.backward(g * self._masks[i]))
        return g

    def params(self) -> list[np.ndarray]:
        out = []
        for conv, bn in [(self.conv1, self.bn1), (self.conv2, self.bn2),
                         (self.conv3, self.bn3)]:
            out += [conv.kernel.weights, conv.kernel.bias, bn.gamma, bn.beta]
        return out

    def grads(self) -> list[np.ndarray]:
        out = []
        for conv, bn in [(self.conv1, self.bn1), (self.conv2, self.bn2),
                         (self.conv3, self.bn3)]:
            out += [conv.grad_w, conv.grad_b, bn.grad_gamma, bn.grad_beta]
        return out

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params())


@dataclass
class TrainReport:
    seed: int
    kernel: int
    epochs: int
    learning_rate: float
    stride: int
    channels: int
    batch_size: int
    initial_loss: float
    final_loss: float
    epoch_losses: list[float]
    param_count: int
    seconds: float
    model: DenoiseNet | None = field(default=None, repr=False, compare=False)


def _stack_pairs(dataset):
    noisy = np.stack([np.asarray(p[0], dtype=np.float64) for p in dataset])
    clean = np.stack([np.asarray(p[1], dtype=np.float64) for p in dataset])
    return noisy[:, None, :, :], clean[:, None, :, :]


def sgd_train(dataset, cfg: ModelConfig) -> TrainReport:
    """Train the model on (noisy, clean) pairs; deterministic per seed.

    Runs epochs * ceil(N / batch) gradient steps of w <- w - lr * grad.
    The default batch size is the full set for N <= 32, otherwise 8 with
    a per-seed fixed shuffle.  A non-finite loss aborts with the epoch and
    step in the exception.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    x, t = _stack_pairs(dataset)
    n = x.shape[0]
    batch = cfg.batch_size if cfg.batch_size is not None else (n if n <= 32 else 8)
    batch = min(batch, n)
    net = DenoiseNet(cfg)
    shuffle_rng = np.random.default_rng([cfg.seed, 7919])
    t0 = time.perf_counter()
    initial = mse_loss(net.forward(x), t)
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n) if batch < n else np.arange(n)
        total = 0.0
        for step, s0 in enumerate(range(0, n, batch)):
            idx = order[s0:s0 + batch]
            pred = net.forward(x[idx])
            loss = mse_loss(pred, t[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, step)
            total += loss * len(idx)
            net.backward(mse_grad(pred, t[idx]))
            for p, g in zip(net.params(), net.grads()):
                p -= cfg.learning_rate * g
        epoch_losses.append(total / n)
    final = mse_loss(net.forward(x), t)
    if not np.isfinite(final):
        raise DivergenceError(cfg.epochs, 0)
    return TrainReport(
        seed=cfg.seed, kernel=cfg.kernel, epochs=cfg.epochs,
        learning_rate=cfg.learning_rate, stride=cfg.stride,
        channels=cfg.channels, batch_size=batch, initial_loss=initial,
        final_loss=final, epoch_losses=epoch_losses,
        param_count=net.param_count, seconds=time.perf_counter() - t0,
        model=net,
    )
