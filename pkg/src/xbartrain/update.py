"""Non-ideal conductance update: gradient scaling, write non-linearity, write noise.

Device model (``u`` is the normalized state ``(g - g_min) / (g_max - g_min)``)::

    potentiation (dg >= 0):  dg_eff = dg * exp(-v * u)
    depression   (dg <  0):  dg_eff = dg * exp(-v * (1 - u))

so a step toward a rail shrinks as the device approaches that rail, and
``v = 0`` is a linear device. Write noise is zero-mean Gaussian with
standard deviation ``gamma * sqrt((g_max - g_min) * |dG_ideal|)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mapping import regenerate_tiles


@dataclass(frozen=True)
class UpdateSpec:
    v: float = 0.0
    gamma: float = 0.0
    lr: float = 0.1
    seed: int = 0
    layer_scale: float = 1.0

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"non-linearity factor v must be >= 0, got {self.v}")
        if self.gamma < 0:
            raise ValueError(f"write-noise factor gamma must be >= 0, got {self.gamma}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")


def scale_gradient(dW, spec, cfg):
    """Digital weight gradient to ideal conductance change (siemens)."""
    dW = np.asarray(dW, dtype=float)
    if not np.all(np.isfinite(dW)):
        raise ValueError("gradient contains non-finite values")
    if spec.layer_scale == 0 or not np.isfinite(spec.layer_scale):
        raise ConfigError(f"invalid layer_scale {spec.layer_scale}")
    return dW * (cfg.g_range / spec.layer_scale)


def nonlinear_update(g, dg_ideal, spec, cfg):
    """Conductance change actually written for a requested change ``dg_ideal``."""
    g = np.asarray(g, dtype=float)
    dg_ideal = np.asarray(dg_ideal, dtype=float)
    slack = 1e-9 * cfg.g_range
    if np.any(g < cfg.g_min - slack) or np.any(g > cfg.g_max + slack):
        raise ValueError("conductance state outside [g_min, g_max]")
    if spec.v == 0:
        return dg_ideal.copy() if dg_ideal.ndim else float(dg_ideal)
    u = np.clip((g - cfg.g_min) / cfg.g_range, 0.0, 1.0)
    atten = np.where(dg_ideal >= 0, np.exp(-spec.v * u), np.exp(-spec.v * (1.0 - u)))
    out = dg_ideal * atten
    return out if out.ndim else float(out)


def noise_sigma(dg_ideal, spec, cfg):
    return spec.gamma * np.sqrt(cfg.g_range * np.abs(dg_ideal))


def write_noise(dg_ideal, spec, cfg, rng):
    """One zero-mean Gaussian write-noise draw per device."""
    dg_ideal = np.asarray(dg_ideal, dtype=float)
    if spec.gamma == 0:
        return np.zeros(dg_ideal.shape) if dg_ideal.ndim else 0.0
    out = rng.normal(0.0, 1.0, dg_ideal.shape) * noise_sigma(dg_ideal, spec, cfg)
    return out if out.ndim else float(out)


def update_rng(seed, iteration, layer):
    """Generator keyed by (seed, iteration, layer); device order fixes the draw order."""
    return np.random.default_rng(np.random.SeedSequence([seed, iteration, layer]))


def apply_update(t, dW, spec, iteration=0, layer=0, rng=None):
    """SGD step on the master conductances of ``t`` (in place), then re-tile.

    The step is written to whichever device of the differential pair currently
    holds the weight. If it drives that device below ``g_min`` the weight has
    crossed zero: the device rests at ``g_min`` and the remainder is written to
    the opposite polarity.
    """
    dW = np.asarray(dW, dtype=float)
    if dW.shape != tuple(t.shape):
        raise ValueError(f"gradient shape {dW.shape} does not match layer {tuple(t.shape)}")
    cfg = t.config
    if rng is None:
        rng = update_rng(spec.seed, iteration, layer)

    dG = scale_gradient(dW, spec, cfg)
    g_pos, g_neg = t.g_pos, t.g_neg
    # zero weights go to whichever polarity the step points toward
    on_pos = (g_pos > cfg.g_min) | ((g_neg <= cfg.g_min) & (dG <= 0))
    g_act = np.where(on_pos, g_pos, g_neg)
    g_off = np.where(on_pos, g_neg, g_pos)
    request = np.where(on_pos, -dG, dG)

    step = nonlinear_update(g_act, request, spec, cfg) + write_noise(dG, spec, cfg, rng)
    new_act = g_act + spec.lr * step
    under = np.maximum(cfg.g_min - new_act, 0.0)
    new_off = np.where(under > 0, cfg.g_min + under, g_off)
    new_act = np.clip(new_act, cfg.g_min, cfg.g_max)
    new_off = np.clip(new_off, cfg.g_min, cfg.g_max)

    t.g_pos = np.where(on_pos, new_act, new_off)
    t.g_neg = np.where(on_pos, new_off, new_act)
    regenerate_tiles(t)
    return t
