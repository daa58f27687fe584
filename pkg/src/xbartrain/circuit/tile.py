"""Crossbar geometry, conductance tiles and nodal solutions.

Geometry convention used throughout the circuit package: row ``i`` is
driven from the left edge through ``r_source``; cell ``(i, j)`` has one
``r_row`` segment on its source side and one ``r_col`` segment on its
sense side; columns are sensed at the foot (below the last row) through
``r_sense`` into a virtual ground.  Row 0 is the top row (farthest from
the sense amplifiers), column 0 is nearest the drivers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 64
    cols: int = 64
    r_row: float = 1.0
    r_col: float = 4.6
    r_source: float = 0.0
    r_sense: float = 0.0
    g_min: float = 1e-6
    g_max: float = 1e-5
    v_fs: float = 1.0

    def __post_init__(self):
        if int(self.rows) != self.rows or self.rows < 1:
            raise ValueError(f"rows must be a positive integer, got {self.rows}")
        if int(self.cols) != self.cols or self.cols < 1:
            raise ValueError(f"cols must be a positive integer, got {self.cols}")
        for name in ("r_row", "r_col", "r_source", "r_sense"):
            r = getattr(self, name)
            if not np.isfinite(r) or r < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {r}")
        if not (0 < self.g_min < self.g_max) or not np.isfinite(self.g_max):
            raise ValueError(
                f"need 0 < g_min < g_max, got g_min={self.g_min}, g_max={self.g_max}"
            )
        if not self.v_fs > 0:
            raise ValueError(f"v_fs must be > 0, got {self.v_fs}")

    @classmethod
    def from_resistance(cls, r_min, r_max, **kwargs):
        """Build a config from device resistance bounds in ohms."""
        return cls(g_min=1.0 / r_max, g_max=1.0 / r_min, **kwargs)

    def on_off_ratio(self):
        return self.g_max / self.g_min

    @property
    def g_range(self):
        return self.g_max - self.g_min

    @property
    def has_parasitics(self):
        return any(r > 0 for r in (self.r_row, self.r_col, self.r_source, self.r_sense))

    def with_(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ConductanceTile:
    """A ``rows x cols`` matrix of device conductances bound to a crossbar config.

    ``g`` may carry leading batch axes (a stack of tiles sharing one config);
    the last two axes are always ``(rows, cols)``.
    """

    config: CrossbarConfig
    g: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "g", g)
        if g.ndim < 2 or g.shape[-2:] != (self.config.rows, self.config.cols):
            raise ValueError(
                f"tile shape {g.shape} does not end in ({self.config.rows}, {self.config.cols})"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError("tile contains non-finite conductances")

    @property
    def shape(self):
        return self.g.shape

    def is_ideal_valid(self):
        c = self.config
        return bool(np.all((self.g >= c.g_min) & (self.g <= c.g_max)))

    def is_nonideal_valid(self):
        return bool(np.all((self.g > 0) & (self.g <= self.config.g_max)))


@dataclass(frozen=True)
class NodalSolution:
    v_top: np.ndarray
    v_bot: np.ndarray
    i_col: np.ndarray


def check_tile(tile):
    if not isinstance(tile, ConductanceTile):
        raise TypeError(f"expected ConductanceTile, got {type(tile).__name__}")
    if np.any(tile.g < 0):
        raise ValueError("negative conductance in tile")
