"""Interpolated conversion: reuse a stored distortion profile between refreshes."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import StaleCacheError
from .tile import ConductanceTile, check_tile


@dataclass
class DistortionCache:
    """Relative conductance loss per device, ``(g_ideal - g_nonideal) / g_ideal``.

    ``age`` counts applications since the last refresh. The cache also keeps
    the tile pair it was refreshed from so that applying it to the very same
    ideal tile returns the engine output bit-for-bit.
    """

    refresh_interval: int
    d: np.ndarray = None
    age: int = 0
    refreshes: int = 0
    _ideal: np.ndarray = field(default=None, repr=False)
    _nonideal: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.refresh_interval) != self.refresh_interval or self.refresh_interval < 1:
            raise ValueError(f"refresh_interval must be a positive integer, got {self.refresh_interval}")

    @property
    def stale(self):
        return self.d is None or self.age >= self.refresh_interval


def refresh_distortion(cache, tile, engine):
    """Recompute the distortion profile of ``tile`` with ``engine`` and reset the age.

    ``engine`` is a callable mapping an ideal ConductanceTile to a non-ideal one
    (e.g. ``fcm_convert`` or ``aam_convert``) or one of the names ``"fcm"``/``"aam"``.
    """
    check_tile(tile)
    if isinstance(engine, str):
        from . import ENGINES

        engine = ENGINES[engine]
    nonideal = engine(tile).g
    g = tile.g
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(g > 0, (g - nonideal) / np.where(g > 0, g, 1.0), 0.0)
    cache.d = d
    cache.age = 0
    cache.refreshes += 1
    cache._ideal = g.copy()
    cache._nonideal = nonideal.copy()
    return cache


def apply_distortion(cache, tile):
    """Non-ideal tile from the stored profile; ages the cache by one use."""
    if cache.d is None:
        raise StaleCacheError("distortion cache has never been refreshed")
    if cache.age >= cache.refresh_interval:
        raise StaleCacheError(
            f"distortion cache is stale (age {cache.age} >= interval {cache.refresh_interval})"
        )
    if tile.g.shape != cache.d.shape:
        raise ValueError(f"tile shape {tile.g.shape} does not match cache {cache.d.shape}")
    if np.array_equal(tile.g, cache._ideal):
        g_out = cache._nonideal.copy()
    else:
        g_out = tile.g * (1.0 - cache.d)
    cache.age += 1
    return ConductanceTile(tile.config, g_out)
