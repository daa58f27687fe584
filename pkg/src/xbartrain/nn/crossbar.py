"""Three-stage crossbar model for one layer: DAC -> non-ideal conductances -> ADC.

Signed inputs are split into a positive and a negative magnitude stream.
Each magnitude is streamed LSB-first through the DAC, multiplied by every
weight slice and polarity of every tile, and each resulting column current
is digitized on its own. The digital back end removes the DAC/device gain,
subtracts the polarities, shift-adds slices and accumulates tiles, giving an
integer accumulator in units of (input LSB x weight LSB).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..circuit import (
    ConductanceTile,
    CrossbarConfig,
    DistortionCache,
    aam_convert,
    apply_distortion,
    fcm_convert,
    oracle_convert,
    refresh_distortion,
)
from ..converters import AdcCalibrator, AdcSpec, DacSpec, adc_convert, calibrate_adc, dac_encode, stream_array
from ..mapping import MappingSpec
from ..update import UpdateSpec

ENGINE_NAMES = ("ideal", "oracle", "fcm", "aam", "interp_fcm")

# upper bound on elements of one current block before the batch is chunked
_BLOCK = 1 << 22


@dataclass(frozen=True)
class HardwareSpec:
    crossbar: CrossbarConfig = field(default_factory=CrossbarConfig)
    mapping: MappingSpec = field(default_factory=MappingSpec)
    dac: DacSpec = field(default_factory=DacSpec)
    adc: AdcSpec = field(default_factory=lambda: AdcSpec(bits=None))
    update: UpdateSpec = field(default_factory=UpdateSpec)
    engine: str = "fcm"
    interval: int = 1
    input_bits: int = 8
    error_bits: int = 8
    fcm_tol: float = 1e-6
    aam_mode: str = "shared"

    def __post_init__(self):
        if self.engine not in ENGINE_NAMES:
            raise ValueError(f"unknown engine {self.engine!r}; expected one of {ENGINE_NAMES}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        for name in ("input_bits", "error_bits"):
            bits = getattr(self, name)
            if bits < 1 or bits % self.dac.stream_bits:
                raise ValueError(f"{name}={bits} must be a positive multiple of stream_bits={self.dac.stream_bits}")
        if self.dac.v_fs > self.crossbar.v_fs:
            raise ValueError(f"DAC full scale {self.dac.v_fs} V exceeds crossbar v_fs {self.crossbar.v_fs} V")
        self.mapping.check_against(self.crossbar)

    @property
    def ideal(self):
        """No circuit, converter, variation or update non-ideality at all."""
        return (
            (self.engine == "ideal" or not self.crossbar.has_parasitics)
            and self.adc.ideal
            and self.dac.transfer is None
            and self.mapping.variation_sigma == 0
            and self.update.v == 0
            and self.update.gamma == 0
        )


class CrossbarCore:
    """Evaluates ``x @ W`` and ``dy @ W.T`` for one mapped layer through the crossbar model."""

    def __init__(self, weights, hw):
        self.t = weights
        self.hw = hw
        self.cache = DistortionCache(hw.interval) if hw.engine == "interp_fcm" else None
        self.adc = {"fwd": hw.adc if hw.adc.ideal else None, "bwd": hw.adc if hw.adc.ideal else None}
        self.calibrators = {"fwd": AdcCalibrator(seed=1), "bwd": AdcCalibrator(seed=2)}
        self.refreshes = 0
        self.convert_time = 0.0
        self.g_eff = None
        self._g_cache = {}
        self.refresh()

    # -- conductance generation -------------------------------------------------

    def _engine(self, tile):
        hw = self.hw
        if hw.engine in ("fcm", "interp_fcm"):
            return fcm_convert(tile, tol=hw.fcm_tol)
        if hw.engine == "aam":
            return aam_convert(tile, mode=hw.aam_mode)
        if hw.engine == "oracle":
            return oracle_convert(tile)
        return ConductanceTile(tile.config, tile.g)

    def refresh(self):
        """Regenerate the non-ideal conductances from the current device tiles."""
        start = time.perf_counter()
        self._g_cache = {}
        tile = ConductanceTile(self.t.config, self.t.tiles)
        if self.hw.engine == "ideal":
            self.g_eff = self.t.tiles
        elif self.cache is not None:
            if self.cache.stale:
                refresh_distortion(self.cache, tile, self._engine)
                self.refreshes += 1
            self.g_eff = apply_distortion(self.cache, tile).g
        else:
            self.g_eff = self._engine(tile).g
            self.refreshes += 1
        self.convert_time += time.perf_counter() - start

    # -- ADC full scale -----------------------------------------------------------

    @property
    def calibrated(self):
        return self.adc["fwd"] is not None and self.adc["bwd"] is not None

    def calibrate(self, reset=True):
        """Set each direction's ADC full scale from the currents observed so far."""
        if self.hw.adc.ideal:
            return
        for key, cal in self.calibrators.items():
            if cal.sample_count:
                i_fs = calibrate_adc(cal, self.hw.adc.clip_percentile)
                if i_fs > 0:
                    self.adc[key] = self.hw.adc.with_full_scale(i_fs)
            if reset:
                cal.reset()

    # -- evaluation -----------------------------------------------------------------

    def _blocks(self, direction):
        """Conductances as (drive tiles, driven lines, slices*2*sensed lines).

        Columns past the layer's output width are never read and rows past its
        input width are never driven, so both are dropped; their devices still
        shape the non-ideal conductances through the circuit conversion.
        """
        if direction not in self._g_cache:
            spec = self.t.spec
            n_tr, n_tc = self.t.grid
            n_in, n_out = self.t.shape
            g = self.g_eff[..., : spec.tile_rows, : spec.tile_cols]
            if direction == "fwd":
                # (n_tr, rows, S, 2, n_tc * cols)
                g = g.transpose(2, 4, 0, 1, 3, 5).reshape(n_tr, spec.tile_rows, spec.n_slices, 2, -1)
                g = g[:, : n_in if n_tr == 1 else None, ..., :n_out]
            else:
                # (n_tc, cols, S, 2, n_tr * rows)
                g = g.transpose(3, 5, 0, 1, 2, 4).reshape(n_tc, spec.tile_cols, spec.n_slices, 2, -1)
                g = g[:, : n_out if n_tc == 1 else None, ..., :n_in]
            self._g_cache[direction] = np.ascontiguousarray(g.reshape(g.shape[0], g.shape[1], -1))
        return self._g_cache[direction]

    def vmm(self, q, bits, direction="fwd", observe=False):
        """Integer accumulator for ``q @ W`` (fwd) or ``q @ W.T`` (bwd); ``q`` is (batch, n)."""
        if direction not in ("fwd", "bwd"):
            raise ValueError(f"direction must be 'fwd' or 'bwd', got {direction!r}")
        q = np.asarray(q, dtype=np.int64)
        n_in, n_out = self.t.shape
        n_drive = n_in if direction == "fwd" else n_out
        if q.ndim != 2 or q.shape[1] != n_drive:
            raise ValueError(f"{direction} input must be (batch, {n_drive}), got {q.shape}")
        if np.any(np.abs(q) >= 2**bits):
            raise ValueError(f"input magnitudes exceed {bits} bits")
        spec = self.t.spec
        n_tr, n_tc = self.t.grid
        per_row = 2 * (bits // self.hw.dac.stream_bits) * spec.n_slices * 2 * n_tr * n_tc * max(
            spec.tile_rows, spec.tile_cols)
        step = max(1, _BLOCK // per_row)
        if q.shape[0] <= step:
            return self._vmm(q, bits, direction, observe)
        return np.concatenate(
            [self._vmm(q[i:i + step], bits, direction, observe) for i in range(0, q.shape[0], step)]
        )

    def _vmm(self, q, bits, direction, observe):
        t, hw = self.t, self.hw
        spec, cfg = t.spec, t.config
        n_tr, n_tc = t.grid
        S = spec.n_slices
        B, n_drive = q.shape
        if direction == "fwd":
            n_td, n_sense = n_tr, t.shape[1]
        else:
            n_td, n_sense = n_tc, t.shape[0]
        G = self._blocks(direction)
        used_d = G.shape[1]

        sb = hw.dac.stream_bits
        K = bits // sb
        # both sign streams are driven in one batch: rows [0, B) positive, [B, 2B) negative
        mag = np.concatenate([np.maximum(q, 0), np.maximum(-q, 0)])
        slices, _ = stream_array(mag, bits, sb)
        drive = np.zeros((K, 2 * B, n_td * used_d))
        drive[:, :, :n_drive] = dac_encode(slices, hw.dac)
        drive = drive.reshape(K * 2 * B, n_td, used_d).transpose(1, 0, 2)

        cur = np.matmul(drive, G)  # (n_td, K*2B, S*2*n_sense)
        if observe:
            self.calibrators[direction].observe(cur)
        adc = self.adc[direction]
        if adc is not None:
            cur = adc_convert(cur, adc)

        # digital recombination: input-slice shift, sign stream, weight-slice shift,
        # polarity, all divided by the gain of one input LSB on one device level
        unit = hw.dac.v_lsb * cfg.g_range / spec.device_levels
        coef = (
            (2.0 ** (np.arange(K) * sb))[:, None, None, None]
            * np.array([1.0, -1.0])[None, :, None, None]
            * (2.0 ** (np.arange(S) * spec.device_bits))[None, None, :, None]
            * np.array([1.0, -1.0])[None, None, None, :]
        ) / unit
        cur = cur.sum(axis=0).reshape(K, 2, B, S, 2, n_sense)
        acc = np.tensordot(coef, cur, axes=([0, 1, 2, 3], [0, 1, 3, 4]))
        return np.rint(acc).astype(np.int64)
