"""Model construction, training loop and evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import batch_order
from .layers import CrossbarConv2d, CrossbarLinear, Flatten, MaxPool2d, ReLU, Sequential
from .reference import softmax_xent


def he_uniform(n_in, n_out, rng):
    bound = np.sqrt(6.0 / n_in)
    return rng.uniform(-bound, bound, size=(n_in, n_out))


def init_weights(topology, input_shape, n_classes, seed):
    """Initial weight matrices for every crossbar layer of ``topology``, in order."""
    weights = []
    shape = tuple(input_shape)
    for spec in _expand(topology, n_classes):
        kind = spec["type"]
        rng = np.random.default_rng([seed, len(weights)])
        if kind == "linear":
            n_in = int(np.prod(shape))
            weights.append(he_uniform(n_in, spec["out"], rng))
            shape = (spec["out"],)
        elif kind == "conv":
            c, h, w = shape
            k, s, p = spec["kernel"], spec.get("stride", 1), spec.get("padding", 0)
            weights.append(he_uniform(c * k * k, spec["out"], rng))
            shape = (spec["out"], (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
        elif kind == "maxpool":
            c, h, w = shape
            shape = (c, h // spec.get("size", 2), w // spec.get("size", 2))
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
    return weights


def _expand(topology, n_classes):
    """Topology with ``out: classes`` resolved."""
    out = []
    for spec in topology:
        spec = dict(spec)
        if spec.get("out") == "classes":
            spec["out"] = n_classes
        out.append(spec)
    return out


def build_model(topology, hw, input_shape, n_classes, seed=0, layer_scales=None, scale_headroom=1.0):
    """Sequential model whose linear/conv layers run on crossbars configured by ``hw``.

    Each crossbar layer's scale is ``layer_scales[k]`` when given, otherwise
    ``scale_headroom * max|W0|``.
    """
    weights = init_weights(topology, input_shape, n_classes, seed)
    layers = []
    k = 0
    for spec in _expand(topology, n_classes):
        kind = spec["type"]
        if kind in ("linear", "conv"):
            W = weights[k]
            scale = layer_scales[k] if layer_scales is not None else scale_headroom * float(np.max(np.abs(W)))
            if kind == "linear":
                layers.append(CrossbarLinear(W, hw, layer_scale=scale, index=k))
            else:
                layers.append(CrossbarConv2d(W, hw, spec["kernel"], spec.get("stride", 1),
                                             spec.get("padding", 0), layer_scale=scale, index=k))
            k += 1
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "maxpool":
            layers.append(MaxPool2d(spec.get("size", 2)))
        elif kind == "flatten":
            layers.append(Flatten())
        else:
            raise ValueError(f"unknown layer type {kind!r}")
    return Sequential(layers)


@dataclass
class TrainState:
    model: Sequential
    batch_size: int = 32
    seed: int = 0
    epoch: int = 0
    iteration: int = 0
    calibration_batches: int = 4
    log: list = field(default_factory=list)

    @property
    def diverged(self):
        return any(not np.isfinite(m["train_loss"]) for m in self.log)


def _needs_calibration(model):
    return any(not l.core.calibrated for l in model.crossbar_layers)


def calibrate_adcs(state, data):
    """Warm-up pass: record column currents through ideal ADCs, then set full scales.

    Runs forward and backward on a few batches without updating any weight.
    """
    model = state.model
    order = batch_order(len(data), state.batch_size, state.seed + 1, 2**31)
    model.set_observe(True)
    for idx in order[: state.calibration_batches]:
        logits = model.forward(data.x[idx], train=True)
        _, grad = softmax_xent(logits, data.y[idx])
        model.backward(grad)
    model.set_observe(False)
    model.calibrate()
    for layer in model.crossbar_layers:
        layer.dW = layer.db = None


def train_epoch(state, data, test=None):
    """One pass over ``data``; returns and logs the epoch metrics."""
    if len(data) == 0:
        raise ValueError("training set is empty")
    model = state.model
    if _needs_calibration(model):
        calibrate_adcs(state, data)
    start = time.perf_counter()
    refreshes0 = model.refreshes
    losses, correct = [], 0
    collect = not all(l.hw.adc.ideal for l in model.crossbar_layers)
    model.set_observe(collect)
    for idx in batch_order(len(data), state.batch_size, state.seed, state.epoch):
        logits = model.forward(data.x[idx], train=True)
        loss, grad = softmax_xent(logits, data.y[idx])
        losses.append(loss)
        if not np.isfinite(loss):
            break
        correct += int(np.sum(logits.argmax(axis=1) == data.y[idx]))
        model.backward(grad)
        model.step(state.iteration)
        state.iteration += 1
    model.set_observe(False)
    if collect:
        model.calibrate()
    metrics = {
        "epoch": state.epoch,
        "train_loss": float(np.mean(losses)),
        "train_accuracy": correct / len(data),
        "wall_time": time.perf_counter() - start,
        "engine_refreshes": model.refreshes - refreshes0,
    }
    metrics["test_accuracy"] = evaluate(state, test) if test is not None else float("nan")
    state.epoch += 1
    state.log.append(metrics)
    return metrics


def predict(state, x, batch_size=256):
    model = state.model
    out = [model.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def evaluate(state, data):
    """Fraction of ``data`` classified correctly by a forward-only pass."""
    if len(data) == 0:
        raise ValueError("test set is empty")
    logits = predict(state, data.x)
    if not np.all(np.isfinite(logits)):
        return 0.0
    return float(np.mean(logits.argmax(axis=1) == data.y))
