"""Pure digital SGD for multilayer perceptrons, with no crossbar anywhere.

In fixed-point mode it reproduces the arithmetic the crossbar path performs
when every non-ideality is off: per-tensor dynamic quantization of inputs and
errors, weights rounded to a symmetric grid over ``[-scale, scale]``, integer
matrix products, and SGD on a clipped full-precision master. With
``bits=None`` it is ordinary float backpropagation.
"""

from __future__ import annotations

import numpy as np

from .data import batch_order


def _fixed(x, bits):
    levels = 2**bits - 1
    top = np.max(np.abs(x)) if x.size else 0.0
    step = top / levels if top > 0 else 1.0
    return np.clip(np.rint(x / step), -levels, levels).astype(np.int64), step


def softmax_xent(logits, y):
    """Mean cross-entropy and its gradient with respect to the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = len(y)
    loss = float(np.mean(np.log(e.sum(axis=1)) - z[np.arange(n), y]))
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


class DigitalMLP:
    """Alternating linear and ReLU layers; ReLU follows every layer but the last."""

    def __init__(self, weights, biases=None, scales=None, weight_bits=8, input_bits=8, error_bits=8, lr=0.1):
        self.W = [np.array(w, dtype=float) for w in weights]
        self.b = [np.zeros(w.shape[1]) if biases is None else np.array(b, dtype=float)
                  for w, b in zip(self.W, biases or [None] * len(self.W))]
        self.scales = list(scales) if scales is not None else [float(np.max(np.abs(w))) or 1.0 for w in self.W]
        self.weight_bits = weight_bits
        self.input_bits = input_bits
        self.error_bits = error_bits
        self.lr = lr
        # master weights are held clipped to the representable range
        self.W = [np.clip(w, -s, s) for w, s in zip(self.W, self.scales)]

    @property
    def quantized(self):
        return self.weight_bits is not None

    def _levels(self, i):
        n = 2**self.weight_bits - 1
        w, s = self.W[i], self.scales[i]
        return np.sign(w).astype(np.int64) * np.rint(np.abs(w) / s * n).astype(np.int64), s / n

    def _dense(self, i, x, transpose=False, bits=None):
        if not self.quantized:
            return x @ (self.W[i].T if transpose else self.W[i])
        q, sx = _fixed(x, bits)
        wl, sw = self._levels(i)
        acc = q @ (wl.T if transpose else wl)
        return acc * (sx * sw)

    def forward(self, x, cache=None):
        h = np.asarray(x, dtype=float)
        last = len(self.W) - 1
        for i in range(len(self.W)):
            if cache is not None:
                cache.append(h)
            h = self._dense(i, h, bits=self.input_bits) + self.b[i]
            if i < last:
                h = np.maximum(h, 0.0) if not self.quantized else np.where(h > 0, h, 0.0)
        return h

    def gradients(self, x, y):
        """Loss plus per-layer (dW, db)."""
        cache = []
        pre = []
        h = np.asarray(x, dtype=float)
        last = len(self.W) - 1
        for i in range(len(self.W)):
            cache.append(h)
            h = self._dense(i, h, bits=self.input_bits) + self.b[i]
            pre.append(h)
            if i < last:
                h = np.where(h > 0, h, 0.0)
        loss, d = softmax_xent(h, y)
        grads = [None] * len(self.W)
        for i in range(last, -1, -1):
            if i < last:
                d = np.where(pre[i] > 0, d, 0.0)
            a = cache[i]
            if self.quantized:
                qa, sa = _fixed(a, self.input_bits)
                qd, sd = _fixed(d, self.error_bits)
                dW = (qa.T @ qd) * (sa * sd)
            else:
                dW = a.T @ d
            db = d.sum(axis=0)
            grads[i] = (dW, db)
            d = self._dense(i, d, transpose=True, bits=self.error_bits)
        return loss, grads

    def loss(self, x, y):
        return softmax_xent(self.forward(x), y)[0]

    def sgd_step(self, grads):
        for i, (dW, db) in enumerate(grads):
            w = self.W[i] - self.lr * dW
            self.W[i] = np.clip(w, -self.scales[i], self.scales[i]) if self.quantized else w
            self.b[i] = self.b[i] - self.lr * db

    def train_epoch(self, data, batch_size, seed, epoch):
        losses = []
        for idx in batch_order(len(data), batch_size, seed, epoch):
            loss, grads = self.gradients(data.x[idx], data.y[idx])
            losses.append(loss)
            self.sgd_step(grads)
        return float(np.mean(losses))

    def accuracy(self, data):
        return float(np.mean(self.forward(data.x).argmax(axis=1) == data.y))
