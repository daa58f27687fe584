"""Sign-magnitude fixed-point tensors."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QTensor:
    """``value = q * scale`` with integer ``q`` in ``[-(2**bits - 1), 2**bits - 1]``.

    ``bits`` counts magnitude bits; the sign is carried separately (and is
    routed through the crossbar as a second, negated input stream).
    """

    q: np.ndarray
    scale: float
    bits: int

    @property
    def shape(self):
        return self.q.shape

    @property
    def value(self):
        return self.q * self.scale

    def on_grid(self):
        lim = 2**self.bits - 1
        return bool(np.all(np.abs(self.q) <= lim)) and self.q.dtype.kind == "i"


def quantize(x, bits):
    """Per-tensor dynamic-range quantization of ``x`` to ``bits`` magnitude bits."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    top = float(np.max(np.abs(x))) if x.size else 0.0
    levels = 2**bits - 1
    scale = top / levels if top > 0 else 1.0
    q = np.clip(np.rint(x / scale), -levels, levels).astype(np.int64)
    return QTensor(q, scale, bits)
