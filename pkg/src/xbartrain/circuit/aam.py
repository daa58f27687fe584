"""Approximate analytical model: closed-form effective conductance per device.

Two path models are available:

``"direct"``
    Each device sees only the wire segments on its own shortest
    driver-to-sense path, carrying only its own current::

        g_eff = 1 / (1/g + r_source + (j+1) r_row + (rows-i) r_col + r_sense)

``"shared"`` (default)
    Same shortest path, but every segment on it is charged with the ideal
    current of all devices that share that segment (the currents of the
    other cells in the same row upstream and the same column downstream).
    With ``D`` the resulting voltage drop and ``v`` the full-scale input::

        g_eff = g * v / (v + D)

    which reduces to the direct form when the other cells carry no current.

Both are input-independent and cost O(rows * cols).
"""

import numpy as np

from .tile import ConductanceTile, check_tile

MODES = ("shared", "direct")


def path_resistance(cfg):
    """Wire/driver/sense resistance on the direct path to each cell, ``(rows, cols)``."""
    i = np.arange(cfg.rows)[:, None]
    j = np.arange(cfg.cols)[None, :]
    return cfg.r_source + (j + 1) * cfg.r_row + (cfg.rows - i) * cfg.r_col + cfg.r_sense


def shared_path_drop(cfg, g, v):
    """Ideal-current voltage drop along each device's direct path, shape of ``g``."""
    cur = g * v
    # row segment k carries every cell at column >= k, so the drop to column j
    # weighs cell m by the min(m, j) + 1 segments it shares with the path
    j = np.arange(cfg.cols)
    top = cfg.r_source * cur.sum(-1, keepdims=True) + cfg.r_row * (cur @ (np.minimum.outer(j, j) + 1.0))
    # column segment below row k carries rows <= k: rows - max(m, i) shared segments
    i = np.arange(cfg.rows)
    bot = cfg.r_sense * cur.sum(-2, keepdims=True) + cfg.r_col * ((cfg.rows - np.maximum.outer(i, i) * 1.0) @ cur)
    return top + bot


def aam_convert(tile, mode="shared"):
    check_tile(tile)
    if mode not in MODES:
        raise ValueError(f"unknown AAM mode {mode!r}; expected one of {MODES}")
    cfg = tile.config
    if not cfg.has_parasitics:
        return ConductanceTile(cfg, tile.g.copy())
    g = tile.g
    if mode == "direct":
        r_path = path_resistance(cfg)
        safe = np.where(g > 0, g, 1.0)
        return ConductanceTile(cfg, np.where(g > 0, 1.0 / (1.0 / safe + r_path), 0.0))
    v = cfg.v_fs
    return ConductanceTile(cfg, g * v / (v + shared_path_drop(cfg, g, v)))
