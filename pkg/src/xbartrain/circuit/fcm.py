"""Fast crossbar model: row-ladder / column-ladder relaxation.

Given the column-wire voltages, every row wire is an independent tridiagonal
ladder; given the row-wire voltages, every column wire is one too.  The two
families are solved alternately (block Gauss-Seidel on the two wire planes)
until the node voltages stop moving.  All tiles in a stack and all ladders
of one family are solved together, so the Python-level loop length is the
ladder length, not the number of ladders.
"""

import numpy as np

from ..errors import ConvergenceError
from .tile import ConductanceTile, check_tile


class _Ladder:
    """Pre-factored batch of tridiagonal systems along the last axis.

    ``off`` holds the (negative) coupling conductance between neighbours and
    is shared by every system in the batch; ``diag`` varies per system.
    """

    def __init__(self, diag, off):
        n = diag.shape[-1]
        self.n = n
        self.off = off
        self.w = np.empty_like(diag)
        self.m = np.empty_like(diag)
        self.w[..., 0] = diag[..., 0]
        for k in range(1, n):
            self.m[..., k] = off / self.w[..., k - 1]
            self.w[..., k] = diag[..., k] - self.m[..., k] * off

    def solve(self, rhs):
        y = np.empty_like(rhs)
        y[..., 0] = rhs[..., 0]
        for k in range(1, self.n):
            y[..., k] = rhs[..., k] - self.m[..., k] * y[..., k - 1]
        x = np.empty_like(rhs)
        x[..., -1] = y[..., -1] / self.w[..., -1]
        for k in range(self.n - 2, -1, -1):
            x[..., k] = (y[..., k] - self.off * x[..., k + 1]) / self.w[..., k]
        return x


class _RowSolver:
    """Top-plane voltages for fixed bottom-plane voltages."""

    def __init__(self, cfg, g):
        self.cfg = cfg
        self.g = g
        rs, rr = cfg.r_source, cfg.r_row
        if rr == 0:
            self.ladder = None
            self.gsum = g.sum(axis=-1)
            return
        a_in = 1.0 / (rs + rr)
        diag = g + 2.0 / rr
        diag[..., 0] += a_in - 1.0 / rr
        diag[..., -1] -= 1.0 / rr
        if cfg.cols == 1:
            diag[..., 0] = g[..., 0] + a_in
        self.a_in = a_in
        self.ladder = _Ladder(diag, -1.0 / rr)

    def __call__(self, v_in, v_bot):
        cfg, g = self.cfg, self.g
        if self.ladder is None:
            if cfg.r_source == 0:
                return np.broadcast_to(v_in[:, None], g.shape).copy()
            num = v_in / cfg.r_source + np.sum(g * v_bot, axis=-1)
            v = num / (1.0 / cfg.r_source + self.gsum)
            return np.broadcast_to(v[..., None], g.shape).copy()
        rhs = g * v_bot
        rhs[..., 0] += self.a_in * v_in
        return self.ladder.solve(rhs)


class _ColSolver:
    """Bottom-plane voltages for fixed top-plane voltages."""

    def __init__(self, cfg, g):
        self.cfg = cfg
        # ladders run down each column: put rows on the last axis
        gt = np.swapaxes(g, -1, -2)
        self.gt = gt
        rc, rsn = cfg.r_col, cfg.r_sense
        if rc == 0:
            self.ladder = None
            self.gsum = gt.sum(axis=-1)
            return
        diag = gt + 2.0 / rc
        diag[..., 0] -= 1.0 / rc
        diag[..., -1] += 1.0 / (rc + rsn) - 1.0 / rc
        if cfg.rows == 1:
            diag[..., 0] = gt[..., 0] + 1.0 / (rc + rsn)
        self.ladder = _Ladder(diag, -1.0 / rc)

    def __call__(self, v_top):
        cfg, gt = self.cfg, self.gt
        vt = np.swapaxes(v_top, -1, -2)
        if self.ladder is None:
            if cfg.r_sense == 0:
                return np.zeros(v_top.shape)
            v = np.sum(gt * vt, axis=-1) / (1.0 / cfg.r_sense + self.gsum)
            return np.swapaxes(np.broadcast_to(v[..., None], gt.shape), -1, -2).copy()
        return np.swapaxes(self.ladder.solve(gt * vt), -1, -2)


def fcm_nodes(tile, v_in, tol=1e-6, max_iter=1000, omega=1.0):
    """Node voltages of ``tile`` (or a stack of tiles) driven by ``v_in``.

    Relaxation stops when the estimated remaining error in every node
    voltage, extrapolated from the observed contraction rate, drops below
    ``tol * max(v_in)``.  Returns ``(v_top, v_bot, iterations)``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    cfg = tile.config
    g = tile.g
    v_in = np.asarray(v_in, dtype=float)
    if v_in.shape != (cfg.rows,):
        raise ValueError(f"v_in must have shape ({cfg.rows},), got {v_in.shape}")
    v_scale = float(np.max(np.abs(v_in)))
    if v_scale == 0:
        return np.zeros(g.shape), np.zeros(g.shape), 0

    rows = _RowSolver(cfg, g)
    cols = _ColSolver(cfg, g)
    v_bot = np.zeros(g.shape)
    v_top = rows(v_in, v_bot)
    v_bot = cols(v_top)
    if cfg.r_row == 0 and cfg.r_source == 0 or cfg.r_col == 0 and cfg.r_sense == 0:
        # one plane is pinned, so a single pass is exact
        return v_top, v_bot, 1

    prev_delta = None
    delta = np.inf
    for it in range(2, max_iter + 1):
        new_top = rows(v_in, v_bot)
        if omega != 1.0:
            new_top = v_top + omega * (new_top - v_top)
        new_bot = cols(new_top)
        delta = max(np.max(np.abs(new_top - v_top)), np.max(np.abs(new_bot - v_bot))) / v_scale
        v_top, v_bot = new_top, new_bot
        if delta == 0:
            return v_top, v_bot, it
        if prev_delta is not None:
            rate = min(delta / prev_delta, 0.999)
            if delta * rate / (1.0 - rate) <= tol and delta <= tol:
                return v_top, v_bot, it
        prev_delta = delta
    raise ConvergenceError(f"FCM relaxation did not converge in {max_iter} iterations", delta)


def _calibrated_conductance(tile, v_cal, nodes):
    """Effective conductances ``g * (v_top - v_bot) / v_cal`` from a node solver.

    Rows calibrated at zero volts take their distortion from a second solve
    in which those rows are driven at full scale.
    """
    check_tile(tile)
    cfg = tile.config
    if v_cal is None:
        v_cal = np.full(cfg.rows, cfg.v_fs)
    v_cal = np.asarray(v_cal, dtype=float)
    if v_cal.shape != (cfg.rows,):
        raise ValueError(f"v_cal must have shape ({cfg.rows},), got {v_cal.shape}")
    if np.any(v_cal < 0):
        raise ValueError("calibration voltages must be non-negative")

    zero = v_cal == 0
    g_out = np.empty(tile.g.shape)
    if not np.all(zero):
        vt, vb = nodes(tile, v_cal)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_out[...] = tile.g * (vt - vb) / v_cal[:, None]
    if np.any(zero):
        v_alt = np.where(zero, cfg.v_fs, v_cal)
        vt, vb = nodes(tile, v_alt)
        g_alt = tile.g * (vt - vb) / v_alt[:, None]
        g_out[..., zero, :] = g_alt[..., zero, :]
    return ConductanceTile(cfg, g_out)


def fcm_convert(tile, v_cal=None, tol=1e-6, max_iter=1000):
    """Convert ideal conductances to parasitic-aware effective conductances.

    ``tile`` may be a stack of tiles (leading batch axes). ``v_cal`` defaults
    to every row at ``v_fs``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if not tile.config.has_parasitics:
        check_tile(tile)
        return ConductanceTile(tile.config, tile.g.copy())

    def nodes(t, v):
        vt, vb, _ = fcm_nodes(t, v, tol=tol, max_iter=max_iter)
        return vt, vb

    return _calibrated_conductance(tile, v_cal, nodes)
