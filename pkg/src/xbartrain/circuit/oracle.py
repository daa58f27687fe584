"""Exact nodal analysis of a single crossbar tile.

The full network has ``2 * rows * cols`` internal nodes (a row-wire node and
a column-wire node at every cross-point), one source node per row and a
ground node.  Zero-ohm wire segments are contracted before assembly so the
zero-parasitic case is represented exactly instead of with huge conductances.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from ..errors import DegenerateCircuitError
from .tile import NodalSolution, check_tile


def _edges(cfg, g):
    """Resistor and device edge lists as (a, b, r) and (a, b, conductance)."""
    R, C = cfg.rows, cfg.cols
    top = np.arange(R * C).reshape(R, C)
    bot = top + R * C
    src = 2 * R * C + np.arange(R)
    gnd = 2 * R * C + R

    ra, rb, rr = [], [], []
    # driver into the first row segment
    ra.append(src)
    rb.append(top[:, 0])
    rr.append(np.full(R, cfg.r_source + cfg.r_row))
    ra.append(top[:, :-1].ravel())
    rb.append(top[:, 1:].ravel())
    rr.append(np.full(R * (C - 1), cfg.r_row))
    ra.append(bot[:-1, :].ravel())
    rb.append(bot[1:, :].ravel())
    rr.append(np.full((R - 1) * C, cfg.r_col))
    # column foot into the sense node
    ra.append(bot[-1, :])
    rb.append(np.full(C, gnd))
    rr.append(np.full(C, cfg.r_col + cfg.r_sense))

    ra, rb, rr = (np.concatenate(x) for x in (ra, rb, rr))
    dev = g.ravel() > 0
    return (ra, rb, rr), (top.ravel()[dev], bot.ravel()[dev], g.ravel()[dev]), src, gnd


def solve_nodal_oracle(tile, v_in):
    """Solve the complete resistive network of ``tile`` driven by ``v_in``.

    Returns node voltages on both wire planes and the column currents
    (current delivered into each sense node).
    """
    check_tile(tile)
    cfg = tile.config
    g = tile.g
    if g.ndim != 2:
        raise ValueError("solve_nodal_oracle takes a single tile, not a stack")
    v_in = np.asarray(v_in, dtype=float)
    if v_in.shape != (cfg.rows,):
        raise ValueError(f"v_in must have shape ({cfg.rows},), got {v_in.shape}")
    if np.any(v_in < 0) or np.any(v_in > cfg.v_fs * (1 + 1e-12)):
        raise ValueError(f"v_in entries must lie in [0, {cfg.v_fs}]")

    if not np.any(g > 0):
        raise DegenerateCircuitError("tile has no conducting device")

    R, C = cfg.rows, cfg.cols
    n = 2 * R * C + R + 1
    (ra, rb, rr), (da, db, dg), src, gnd = _edges(cfg, g)

    short = rr == 0
    adj = sp.coo_matrix((np.ones(short.sum()), (ra[short], rb[short])), shape=(n, n))
    _, label = connected_components(adj, directed=False)

    fixed = {}
    for node, v in list(zip(src, v_in)) + [(gnd, 0.0)]:
        cls = label[node]
        if cls in fixed and fixed[cls] != v:
            raise DegenerateCircuitError("zero-resistance path between sources at different voltages")
        fixed[cls] = v

    # conductance edges between distinct classes
    wa = label[ra[~short]]
    wb = label[rb[~short]]
    wg = 1.0 / rr[~short]
    ea = np.concatenate([wa, label[da]])
    eb = np.concatenate([wb, label[db]])
    eg = np.concatenate([wg, dg])
    keep = ea != eb
    ea, eb, eg = ea[keep], eb[keep], eg[keep]

    n_cls = label.max() + 1
    is_fixed = np.zeros(n_cls, dtype=bool)
    v_cls = np.zeros(n_cls)
    for cls, v in fixed.items():
        is_fixed[cls] = True
        v_cls[cls] = v
    unknown = np.flatnonzero(~is_fixed)

    if unknown.size:
        # every unknown class needs a conductive path to some fixed node
        conn = sp.coo_matrix((eg, (ea, eb)), shape=(n_cls, n_cls))
        _, comp = connected_components(conn, directed=False)
        anchored = np.zeros(comp.max() + 1, dtype=bool)
        anchored[comp[is_fixed]] = True
        if not np.all(anchored[comp[unknown]]):
            raise DegenerateCircuitError("floating node: no conductive path to a source or ground")

        lap = sp.coo_matrix(
            (np.concatenate([eg, eg, -eg, -eg]),
             (np.concatenate([ea, eb, ea, eb]), np.concatenate([ea, eb, eb, ea]))),
            shape=(n_cls, n_cls),
        ).tocsr()
        pos = np.full(n_cls, -1)
        pos[unknown] = np.arange(unknown.size)
        fixed_idx = np.flatnonzero(is_fixed)
        A = lap[unknown][:, unknown].tocsc()
        b = -(lap[unknown][:, fixed_idx] @ v_cls[fixed_idx])
        try:
            v_cls[unknown] = splu(A).solve(b)
        except RuntimeError as exc:
            raise DegenerateCircuitError(f"singular nodal system: {exc}") from exc

    v = v_cls[label]
    v_top = v[: R * C].reshape(R, C)
    v_bot = v[R * C: 2 * R * C].reshape(R, C)
    i_col = np.sum(g * (v_top - v_bot), axis=0)
    return NodalSolution(v_top=v_top, v_bot=v_bot, i_col=i_col)


def oracle_convert(tile, v_cal=None):
    """Non-ideal conductances from an exact solve at the calibration input."""
    from .fcm import _calibrated_conductance

    return _calibrated_conductance(tile, v_cal, lambda t, v: _oracle_nodes(t, v))


def _oracle_nodes(tile, v_cal):
    g = tile.g
    if g.ndim == 2:
        sol = solve_nodal_oracle(tile, v_cal)
        return sol.v_top, sol.v_bot
    from .tile import ConductanceTile

    flat = g.reshape(-1, *g.shape[-2:])
    vt = np.empty_like(flat)
    vb = np.empty_like(flat)
    for k, gk in enumerate(flat):
        sol = solve_nodal_oracle(ConductanceTile(tile.config, gk), v_cal)
        vt[k], vb[k] = sol.v_top, sol.v_bot
    return vt.reshape(g.shape), vb.reshape(g.shape)
