"""Train the toy MLP on non-ideal crossbars and on the ideal digital twin, then compare."""

from pathlib import Path

from xbartrain.config import load_config
from xbartrain.experiments import train_run

cfg = load_config(Path(__file__).with_name("toy.yaml"))
for label, c in (("Cross-NI", cfg), ("Cross-Ideal", cfg.ideal_twin())):
    run = train_run(c, seed=0)
    curve = " ".join(f"{m['test_accuracy']:.3f}" for m in run.metrics)
    print(f"{label:12s} final {run.final_accuracy:.3f}  per-epoch: {curve}")
