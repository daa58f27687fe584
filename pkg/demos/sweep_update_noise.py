"""Sweep the write-noise factor and print the combined summary table."""

import sys
from pathlib import Path

from xbartrain.config import SweepSpec, load_config
from xbartrain.experiments import run_sweep

cfg = load_config(Path(__file__).with_name("toy.yaml"))
values = [float(v) for v in sys.argv[1:]] or [1.0, 5.0, 10.0]
rows = run_sweep(cfg, SweepSpec("update.gamma", values), Path("runs/gamma_sweep"))
print("gamma  accuracy  std    converged")
for r in rows:
    print(f"{r['param_value']:<6g} {r['final_accuracy']:.3f}     {r['accuracy_std']:.3f}  {r['converged']}")
