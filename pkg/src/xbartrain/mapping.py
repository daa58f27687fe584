"""Weight-to-conductance mapping: differential pairs, bit slices and tiles.

A layer weight matrix ``W`` (``n_in x n_out``; rows are driven inputs, columns
are sensed outputs) is held as two full-precision master conductance matrices,
one per polarity, with exactly one polarity above ``g_min`` per weight. The
device tiles used for computation are regenerated from the master: quantize
the magnitude to ``weight_bits``, split it LSB-first into ``device_bits``
slices, map each slice level linearly onto ``[g_min, g_max]``, and cut the
result into ``tile_rows x tile_cols`` blocks padded with ``g_min`` devices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import ConductanceTile, CrossbarConfig


@dataclass(frozen=True)
class MappingSpec:
    weight_bits: int = 8
    device_bits: int = 2
    tile_rows: int = 64
    tile_cols: int = 64
    variation_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.device_bits < 1 or self.weight_bits < 1:
            raise ValueError("weight_bits and device_bits must be >= 1")
        if self.weight_bits % self.device_bits:
            raise ValueError(
                f"weight_bits={self.weight_bits} is not divisible by device_bits={self.device_bits}"
            )
        if self.tile_rows < 1 or self.tile_cols < 1:
            raise ValueError("tile dimensions must be positive")
        if self.variation_sigma < 0:
            raise ValueError(f"variation_sigma must be >= 0, got {self.variation_sigma}")

    @property
    def n_slices(self):
        return self.weight_bits // self.device_bits

    @property
    def weight_levels(self):
        return 2**self.weight_bits - 1

    @property
    def device_levels(self):
        return 2**self.device_bits - 1

    def check_against(self, cfg):
        if self.tile_rows > cfg.rows or self.tile_cols > cfg.cols:
            raise ValueError(
                f"mapping tile {self.tile_rows}x{self.tile_cols} does not fit "
                f"crossbar {cfg.rows}x{cfg.cols}"
            )


@dataclass
class TiledLayerWeights:
    spec: MappingSpec
    config: CrossbarConfig
    shape: tuple
    layer_scale: float
    g_pos: np.ndarray = field(repr=False)
    g_neg: np.ndarray = field(repr=False)
    # (n_slices, 2, n_tile_rows, n_tile_cols, cfg.rows, cfg.cols); polarity 0 is positive
    tiles: np.ndarray = field(default=None, repr=False)

    @property
    def grid(self):
        return self.tiles.shape[2:4]

    @property
    def g_ideal_master(self):
        return self.g_pos, self.g_neg

    def _tile_grid(self, pol):
        cfg = self.config
        return [
            [[ConductanceTile(cfg, self.tiles[s, pol, r, c]) for c in range(self.grid[1])]
             for r in range(self.grid[0])]
            for s in range(self.spec.n_slices)
        ]

    @property
    def tiles_pos(self):
        return self._tile_grid(0)

    @property
    def tiles_neg(self):
        return self._tile_grid(1)

    def copy(self):
        return replace(self, g_pos=self.g_pos.copy(), g_neg=self.g_neg.copy(),
                       tiles=None if self.tiles is None else self.tiles.copy())


def quantize_magnitude(w, layer_scale, weight_bits):
    """Unsigned integer magnitude of ``w`` on a ``weight_bits`` grid over ``[0, layer_scale]``."""
    levels = 2**weight_bits - 1
    return np.rint(np.minimum(np.abs(w) / layer_scale, 1.0) * levels).astype(np.int64)


def master_levels(t):
    """Integer magnitude levels held by the positive and negative masters."""
    cfg, levels = t.config, t.spec.weight_levels
    q_pos = np.rint((t.g_pos - cfg.g_min) / cfg.g_range * levels).astype(np.int64)
    q_neg = np.rint((t.g_neg - cfg.g_min) / cfg.g_range * levels).astype(np.int64)
    return q_pos, q_neg


def signed_levels(t):
    q_pos, q_neg = master_levels(t)
    return q_pos - q_neg


def weight_step(t):
    """Real weight represented by one integer level."""
    return t.layer_scale / t.spec.weight_levels


def map_weights(W, spec, cfg, layer_scale=None):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError(f"weights must be a matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("weights contain non-finite values")
    spec.check_against(cfg)
    if layer_scale is None:
        layer_scale = float(np.max(np.abs(W))) or 1.0
    if not layer_scale > 0:
        raise ValueError(f"layer_scale must be > 0, got {layer_scale}")
    mag = np.minimum(np.abs(W) / layer_scale, 1.0) * cfg.g_range
    g_pos = cfg.g_min + np.where(W > 0, mag, 0.0)
    g_neg = cfg.g_min + np.where(W < 0, mag, 0.0)
    t = TiledLayerWeights(spec, cfg, W.shape, float(layer_scale), g_pos, g_neg)
    regenerate_tiles(t)
    return t


def regenerate_tiles(t):
    """Rebuild the device tiles from the master conductances (in place)."""
    spec, cfg = t.spec, t.config
    n_in, n_out = t.shape
    n_tr = -(-n_in // spec.tile_rows)
    n_tc = -(-n_out // spec.tile_cols)
    q_pos, q_neg = master_levels(t)

    shifts = np.arange(spec.n_slices) * spec.device_bits
    mask = spec.device_levels
    step = cfg.g_range / spec.device_levels
    tiles = np.full((spec.n_slices, 2, n_tr, n_tc, cfg.rows, cfg.cols), cfg.g_min)
    for pol, q in enumerate((q_pos, q_neg)):
        s = (q[None] >> shifts[:, None, None]) & mask
        padded = np.zeros((spec.n_slices, n_tr * spec.tile_rows, n_tc * spec.tile_cols), dtype=np.int64)
        padded[:, :n_in, :n_out] = s
        blocks = padded.reshape(spec.n_slices, n_tr, spec.tile_rows, n_tc, spec.tile_cols)
        blocks = blocks.transpose(0, 1, 3, 2, 4)
        tiles[:, pol, :, :, : spec.tile_rows, : spec.tile_cols] = cfg.g_min + blocks * step
    t.tiles = tiles
    if spec.variation_sigma > 0:
        _vary_in_place(t, spec.variation_sigma, spec.seed)
    return t


def unmap_levels(t):
    """Signed integer weight levels read back from the device tiles."""
    spec, cfg = t.spec, t.config
    step = cfg.g_range / spec.device_levels
    s = np.rint((t.tiles[:, :, :, :, : spec.tile_rows, : spec.tile_cols] - cfg.g_min) / step)
    s = s.astype(np.int64)
    w = (s << (np.arange(spec.n_slices) * spec.device_bits)[:, None, None, None, None, None]).sum(axis=0)
    signed = w[0] - w[1]
    n_tr, n_tc = t.grid
    full = signed.transpose(0, 2, 1, 3).reshape(n_tr * spec.tile_rows, n_tc * spec.tile_cols)
    return full[: t.shape[0], : t.shape[1]]


def unmap_weights(t):
    """Quantized real weights represented by the device tiles."""
    return unmap_levels(t) * weight_step(t)


def _variation_factors(shape, sigma, seed):
    return np.random.default_rng(seed).normal(1.0, sigma, shape)


def _vary_in_place(t, sigma, seed):
    cfg = t.config
    f = _variation_factors(t.tiles.shape, sigma, seed)
    t.tiles = np.clip(t.tiles * f, cfg.g_min * 1e-3, cfg.g_max)


def apply_variation(t, sigma, seed):
    """Copy of ``t`` whose device tiles carry static multiplicative Gaussian variation.

    The same seed always yields the same per-device factors. The master
    conductances are never modified.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    out = replace(t, tiles=t.tiles.copy())
    if sigma > 0:
        _vary_in_place(out, sigma, seed)
    return out


def reconstruct_output(codes_pos, codes_neg, spec, scale, offset_pos=0, offset_neg=0):
    """Digital recombination of per-slice, per-polarity column results.

    ``codes_pos``/``codes_neg`` carry the weight-slice axis first. Slice ``k``
    is weighted by ``2**(k * device_bits)``; known offsets (e.g. the current of
    padding devices) are removed before the polarities are subtracted.
    """
    codes_pos = np.asarray(codes_pos)
    codes_neg = np.asarray(codes_neg)
    if codes_pos.shape != codes_neg.shape:
        raise ValueError(f"polarity shapes differ: {codes_pos.shape} vs {codes_neg.shape}")
    if codes_pos.ndim == 0 or codes_pos.shape[0] != spec.n_slices:
        raise ValueError(f"expected {spec.n_slices} weight slices on the leading axis")
    diff = (codes_pos - offset_pos) - (codes_neg - offset_neg)
    w = (2.0 ** (np.arange(spec.n_slices) * spec.device_bits)).reshape((-1,) + (1,) * (diff.ndim - 1))
    return scale * np.sum(w * diff, axis=0)
