"""Check FCM and AAM against the exact nodal solve on random tiles."""

from xbartrain.config import from_dict
from xbartrain.experiments import run_oracle_check

report = run_oracle_check(from_dict({}).validate(), trials=10, dims=[(8, 8), (16, 16), (64, 64)])
for key in ("fcm_max_error", "aam_max_error", "aam_speedup_vs_fcm", "passed"):
    print(f"{key:20s} {report[key]}")
