"""Layers. Linear and convolution VMMs run on the crossbar core; everything else is digital."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import MissingActivationsError
from ..mapping import map_weights, weight_step
from ..update import apply_update
from .crossbar import CrossbarCore
from .tensor import quantize


class Layer:
    params = ()

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class CrossbarLinear(Layer):
    """``y = x @ W + b`` with ``W`` of shape (n_in, n_out) held in crossbar tiles.

    The weight gradient is the exact integer product of the quantized input
    and quantized error, rescaled; the bias lives in digital memory.
    """

    def __init__(self, W, hw, bias=None, layer_scale=None, index=0):
        self.hw = hw
        self.index = index
        self.weights = map_weights(W, hw.mapping, hw.crossbar, layer_scale)
        self.update_spec = replace(hw.update, layer_scale=self.weights.layer_scale)
        self.core = CrossbarCore(self.weights, hw)
        n_out = self.weights.shape[1]
        self.b = np.zeros(n_out) if bias is None else np.asarray(bias, dtype=float).copy()
        self.observe = False
        self._x = None
        self.dW = None
        self.db = None

    @property
    def shape(self):
        return self.weights.shape

    @property
    def w_step(self):
        return weight_step(self.weights)

    def _matmul(self, xq, direction):
        acc = self.core.vmm(xq.q, xq.bits, direction, observe=self.observe)
        return acc * (xq.scale * self.w_step)

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.shape[0]:
            raise ValueError(f"expected input (batch, {self.shape[0]}), got {x.shape}")
        xq = quantize(x, self.hw.input_bits)
        if train:
            self._x = xq
        return self._matmul(xq, "fwd") + self.b

    def backward(self, dy):
        if self._x is None:
            raise MissingActivationsError("backward called without a cached forward pass")
        dy = np.asarray(dy, dtype=float)
        dq = quantize(dy, self.hw.error_bits)
        dx = self._matmul(dq, "bwd")
        xq, self._x = self._x, None
        self.dW = (xq.q.T @ dq.q) * (xq.scale * dq.scale)
        self.db = dy.sum(axis=0)
        return dx

    def step(self, iteration):
        """Write the pending gradient into the devices and regenerate G_nonideal."""
        if self.dW is None:
            return
        apply_update(self.weights, self.dW, self.update_spec, iteration=iteration, layer=self.index)
        self.b = self.b - self.update_spec.lr * self.db
        self.dW = self.db = None
        self.core.refresh()


def _im2col(x, kernel, stride, padding):
    """(B, C, H, W) -> (B * Ho * Wo, C * k * k) patch matrix, plus (Ho, Wo)."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, Ho, Wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kernel * kernel)
    return cols, (Ho, Wo)


def _col2im(cols, x_shape, kernel, stride, padding, out_hw):
    B, C, H, W = x_shape
    Ho, Wo = out_hw
    dx = np.zeros((B, C, H + 2 * padding, W + 2 * padding))
    c = cols.reshape(B, Ho, Wo, C, kernel, kernel)
    for i in range(kernel):
        for j in range(kernel):
            dx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += c[..., i, j].transpose(0, 3, 1, 2)
    if padding:
        dx = dx[:, :, padding:-padding, padding:-padding]
    return dx


class CrossbarConv2d(CrossbarLinear):
    """Square-kernel convolution lowered to a crossbar VMM over im2col patches.

    ``W`` has shape (in_channels * kernel * kernel, out_channels) with rows in
    (channel, ky, kx) order.
    """

    def __init__(self, W, hw, kernel, stride=1, padding=0, **kw):
        super().__init__(W, hw, **kw)
        self.kernel, self.stride, self.padding = kernel, stride, padding
        if self.shape[0] % (kernel * kernel):
            raise ValueError(f"weight rows {self.shape[0]} are not a multiple of kernel area {kernel * kernel}")
        self._geom = None

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=float)
        if x.ndim != 4:
            raise ValueError(f"expected (batch, channels, H, W), got {x.shape}")
        B = x.shape[0]
        # quantize before lowering so every patch shares one scale
        xq = quantize(x, self.hw.input_bits)
        cols, hw_out = _im2col(xq.q, self.kernel, self.stride, self.padding)
        if cols.shape[1] != self.shape[0]:
            raise ValueError(f"patch size {cols.shape[1]} does not match weight rows {self.shape[0]}")
        cq = replace(xq, q=cols)
        if train:
            self._x = cq
            self._geom = (x.shape, hw_out)
        y = self._matmul(cq, "fwd") + self.b
        return y.reshape(B, *hw_out, -1).transpose(0, 3, 1, 2)

    def backward(self, dy):
        if self._x is None:
            raise MissingActivationsError("backward called without a cached forward pass")
        x_shape, hw_out = self._geom
        flat = np.asarray(dy, dtype=float).transpose(0, 2, 3, 1).reshape(-1, self.shape[1])
        dcols = super().backward(flat)
        return _col2im(dcols, x_shape, self.kernel, self.stride, self.padding, hw_out)


class ReLU(Layer):
    def forward(self, x, train=False):
        mask = x > 0
        if train:
            self._mask = mask
        return np.where(mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)


class MaxPool2d(Layer):
    def __init__(self, size=2):
        self.size = size

    def forward(self, x, train=False):
        B, C, H, W = x.shape
        k = self.size
        Ho, Wo = H // k, W // k
        win = x[:, :, : Ho * k, : Wo * k].reshape(B, C, Ho, k, Wo, k).transpose(0, 1, 2, 4, 3, 5)
        win = win.reshape(B, C, Ho, Wo, k * k)
        idx = win.argmax(axis=-1)
        if train:
            self._cache = (x.shape, idx)
        return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        shape, idx = self._cache
        B, C, H, W = shape
        k = self.size
        Ho, Wo = idx.shape[2:]
        g = np.zeros((B, C, Ho, Wo, k * k))
        np.put_along_axis(g, idx[..., None], dy[..., None], axis=-1)
        g = g.reshape(B, C, Ho, Wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho * k, Wo * k)
        out = np.zeros(shape)
        out[:, :, : Ho * k, : Wo * k] = g
        return out


class Flatten(Layer):
    def forward(self, x, train=False):
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    @property
    def crossbar_layers(self):
        return [l for l in self.layers if isinstance(l, CrossbarLinear)]

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def step(self, iteration):
        for layer in self.crossbar_layers:
            layer.step(iteration)

    def set_observe(self, flag):
        for layer in self.crossbar_layers:
            layer.observe = flag

    def calibrate(self):
        for layer in self.crossbar_layers:
            layer.core.calibrate()

    @property
    def refreshes(self):
        return sum(l.core.refreshes for l in self.crossbar_layers)

    @property
    def convert_time(self):
        return sum(l.core.convert_time for l in self.crossbar_layers)
