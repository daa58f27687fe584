"""Convert a random weight matrix with FCM and AAM and summarise the AAM error map."""

from pathlib import Path

import numpy as np

from xbartrain.config import from_dict
from xbartrain.experiments import run_convert

out = Path("runs/error_map")
out.mkdir(parents=True, exist_ok=True)
weights = out / "weights.csv"
np.savetxt(weights, np.random.default_rng(0).normal(size=(64, 64)), delimiter=",")
for r_min, r_max in ((1e5, 1e6), (1e3, 1e4)):
    cfg = from_dict({"crossbar": {"r_min": r_min, "r_max": r_max}}).validate()
    summary = run_convert(cfg, weights, out / f"r{r_min:g}")
    err = np.loadtxt(out / f"r{r_min:g}" / "error_aam_vs_fcm_s0_pos.csv", delimiter=",")
    corner = err[-8:, :8].mean()
    print(f"R in [{r_min:g}, {r_max:g}]: max AAM error {summary['max_error']:.2%}, "
          f"far-corner mean {corner:.2%} (grids in {out / f'r{r_min:g}'})")
