"""DAC/ADC models and bit-serial input streaming.

Codes are unsigned integers. Transfer tables describe converter
non-linearity: a DAC table lists the output voltage for every code, an
ADC table lists the lower edge of every code bin as a fraction of full scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError


@dataclass(frozen=True)
class DacSpec:
    bits: int = 1
    v_fs: float = 1.0
    transfer: tuple | None = None
    stream_bits: int = 1

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"DAC bits must be >= 1, got {self.bits}")
        if not 1 <= self.stream_bits <= self.bits:
            raise ValueError(f"stream_bits must be in [1, bits={self.bits}], got {self.stream_bits}")
        if not self.v_fs > 0:
            raise ValueError(f"v_fs must be > 0, got {self.v_fs}")
        if self.transfer is not None:
            t = np.asarray(self.transfer, dtype=float)
            object.__setattr__(self, "transfer", tuple(t.tolist()))
            if t.shape != (2**self.bits,):
                raise ValueError(f"DAC transfer table needs {2**self.bits} entries, got {t.size}")
            if t[0] != 0 or t[-1] > self.v_fs or np.any(np.diff(t) < 0):
                raise ValueError("DAC transfer table must start at 0, be non-decreasing and stay <= v_fs")

    @property
    def levels(self):
        return 2**self.bits - 1

    @property
    def v_lsb(self):
        """Ideal voltage per code step (the digital side's assumed gain)."""
        return self.v_fs / self.levels


@dataclass(frozen=True)
class AdcSpec:
    """ADC precision and full scale; ``bits=None`` is an ideal pass-through converter."""

    bits: int | None = 8
    i_fs: float = 1e-4
    transfer: tuple | None = None
    clip_percentile: float = 0.999

    def __post_init__(self):
        if self.bits is not None and self.bits < 1:
            raise ValueError(f"ADC bits must be >= 1 or None, got {self.bits}")
        if not self.i_fs > 0:
            raise ValueError(f"i_fs must be > 0, got {self.i_fs}")
        if not 0 < self.clip_percentile <= 1:
            raise ValueError(f"clip_percentile must be in (0, 1], got {self.clip_percentile}")
        if self.transfer is not None:
            if self.bits is None:
                raise ValueError("an ideal ADC cannot carry a transfer table")
            t = np.asarray(self.transfer, dtype=float)
            object.__setattr__(self, "transfer", tuple(t.tolist()))
            if t.shape != (2**self.bits,):
                raise ValueError(f"ADC transfer table needs {2**self.bits} entries, got {t.size}")
            if t[0] != 0 or np.any(np.diff(t) <= 0):
                raise ValueError("ADC thresholds must start at 0 and be strictly increasing")

    @property
    def ideal(self):
        return self.bits is None

    @property
    def levels(self):
        return 2**self.bits - 1

    @property
    def lsb(self):
        return self.i_fs / self.levels

    def with_full_scale(self, i_fs):
        from dataclasses import replace

        return replace(self, i_fs=float(i_fs))


def dac_encode(x, spec):
    """Voltage for DAC code(s) ``x``."""
    xa = np.asarray(x)
    if not np.issubdtype(xa.dtype, np.integer):
        if np.any(xa != np.floor(xa)):
            raise ValueError("DAC codes must be integers")
        xa = xa.astype(np.int64)
    if np.any(xa < 0) or np.any(xa > spec.levels):
        raise ValueError(f"DAC code out of range [0, {spec.levels}]")
    if spec.transfer is not None:
        v = np.asarray(spec.transfer)[xa]
    else:
        v = xa * spec.v_lsb
    return float(v) if np.ndim(v) == 0 else v


def stream_slices(x, total_bits, stream_bits):
    """LSB-first ``(slice_value, weight)`` pairs whose weighted sum is ``x``."""
    if total_bits % stream_bits:
        raise ValueError(f"total_bits={total_bits} is not divisible by stream_bits={stream_bits}")
    x = int(x)
    if not 0 <= x < 2**total_bits:
        raise ValueError(f"{x} does not fit in {total_bits} unsigned bits")
    mask = 2**stream_bits - 1
    return [((x >> s) & mask, 1 << s) for s in range(0, total_bits, stream_bits)]


def stream_array(x, total_bits, stream_bits):
    """Vectorized stream_slices: returns ``(slices, weights)``, slices on a new leading axis."""
    if total_bits % stream_bits:
        raise ValueError(f"total_bits={total_bits} is not divisible by stream_bits={stream_bits}")
    x = np.asarray(x, dtype=np.int64)
    if np.any(x < 0) or np.any(x >= 2**total_bits):
        raise ValueError(f"values do not fit in {total_bits} unsigned bits")
    shifts = np.arange(0, total_bits, stream_bits, dtype=np.int64)
    mask = 2**stream_bits - 1
    slices = (x[None, ...] >> shifts.reshape((-1,) + (1,) * x.ndim)) & mask
    return slices, np.left_shift(1, shifts)


def adc_quantize(i, spec):
    """ADC code(s) for column current(s) ``i`` (saturating at both rails)."""
    if spec.ideal:
        raise ValueError("an ideal ADC has no codes; use adc_convert")
    i = np.asarray(i, dtype=float)
    x = i / spec.i_fs
    if spec.transfer is not None:
        code = np.searchsorted(np.asarray(spec.transfer), x, side="right") - 1
    else:
        code = np.rint(x * spec.levels)
    code = np.clip(code, 0, spec.levels).astype(np.int64)
    return int(code) if code.ndim == 0 else code


def adc_dequantize(code, spec):
    """Current represented by a code, as the digital back end interprets it."""
    return np.asarray(code) * spec.lsb


def adc_convert(i, spec):
    """Current as seen after the ADC: quantized/saturated, or unchanged when ideal."""
    if spec.ideal:
        return np.asarray(i, dtype=float)
    if spec.transfer is not None:
        return adc_dequantize(adc_quantize(i, spec), spec)
    # linear ADC: same arithmetic as quantize/dequantize, done in place on floats
    out = np.multiply(i, spec.levels / spec.i_fs, dtype=float)
    np.rint(out, out=out)
    np.clip(out, 0, spec.levels, out=out)
    out *= spec.lsb
    return out


@dataclass
class AdcCalibrator:
    """Collects column-current statistics to choose the ADC full scale.

    Keeps a bounded uniform reservoir of observations; each ``observe`` call
    contributes at most ``chunk`` values drawn with replacement, so memory and
    time stay bounded for large batches.
    """

    capacity: int = 65536
    chunk: int = 1024
    seed: int = 0
    sample_count: int = 0
    _samples: np.ndarray = field(default=None, repr=False)
    _rng: np.random.Generator = field(default=None, repr=False)
    _stream_len: int = 0

    def __post_init__(self):
        self._samples = np.empty(self.capacity)
        self._rng = np.random.default_rng(self.seed)

    def observe(self, currents):
        x = np.asarray(currents, dtype=float).ravel()
        if x.size == 0:
            return
        self.sample_count += x.size
        if x.size > self.chunk:
            x = x[self._rng.integers(0, x.size, self.chunk)]
        x = np.abs(x)
        filled = min(self._stream_len, self.capacity)
        room = self.capacity - filled
        head, tail = x[:room], x[room:]
        self._samples[filled:filled + head.size] = head
        self._stream_len += head.size
        if tail.size:
            pos = self._stream_len + np.arange(tail.size)
            j = self._rng.integers(0, pos + 1)
            keep = j < self.capacity
            self._samples[j[keep]] = tail[keep]
            self._stream_len += tail.size

    def samples(self):
        return self._samples[: min(self._stream_len, self.capacity)]

    def reset(self):
        self.sample_count = 0
        self._stream_len = 0


def calibrate_adc(cal, clip_percentile=0.999):
    """Full-scale current: the ``clip_percentile`` quantile of observed currents."""
    if cal.sample_count < 1:
        raise CalibrationError("ADC calibrator has no observations")
    if not 0 < clip_percentile <= 1:
        raise ValueError(f"clip_percentile must be in (0, 1], got {clip_percentile}")
    return float(np.quantile(cal.samples(), clip_percentile))
