"""Crossbar circuit models: exact nodal oracle, FCM, AAM and the interpolated cache."""

from .aam import aam_convert, path_resistance
from .fcm import fcm_convert, fcm_nodes
from .interp import DistortionCache, apply_distortion, refresh_distortion
from .oracle import oracle_convert, solve_nodal_oracle
from .tile import ConductanceTile, CrossbarConfig, NodalSolution


def ideal_convert(tile):
    return ConductanceTile(tile.config, tile.g.copy())


ENGINES = {
    "ideal": ideal_convert,
    "oracle": oracle_convert,
    "fcm": fcm_convert,
    "aam": aam_convert,
}

__all__ = [
    "ConductanceTile",
    "CrossbarConfig",
    "DistortionCache",
    "ENGINES",
    "NodalSolution",
    "aam_convert",
    "apply_distortion",
    "fcm_convert",
    "fcm_nodes",
    "ideal_convert",
    "oracle_convert",
    "path_resistance",
    "refresh_distortion",
    "solve_nodal_oracle",
]
