"""Command line front end.

    xbartrain train <config>
    xbartrain sweep <config> --param update.v --values 0.01,0.1,0.5,1
    xbartrain convert <config> --weights W.csv
    xbartrain oracle-check <config> --trials 100

``XBARTRAIN_OUT`` overrides the output directory of every command.
Exit status: 0 on success (a diverged run is a result, not a failure),
1 when oracle-check finds FCM outside its tolerance, 2 for invalid
configuration or arguments, 3 for missing or unreadable input files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .config import SweepSpec, load_config, parse_value
from .errors import ConfigError
from .experiments import run_convert, run_oracle_check, run_sweep, run_train

OUT_ENV = "XBARTRAIN_OUT"
EXIT_OK, EXIT_BREACH, EXIT_CONFIG, EXIT_INPUT = 0, 1, 2, 3


def _values(items):
    out = []
    for item in items:
        out.extend(parse_value(v) for v in item.split(",") if v.strip())
    return out


def _plain(obj):
    """JSON-safe copy: NaN and infinities become null."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def build_parser():
    p = argparse.ArgumentParser(prog="xbartrain", description="Train DNNs on simulated resistive crossbars.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model and write per-epoch metrics")
    t.add_argument("config")

    s = sub.add_parser("sweep", help="train once per value of one config field")
    s.add_argument("config")
    s.add_argument("--param", required=True, help="dotted config field, e.g. update.v")
    s.add_argument("--values", required=True, nargs="+", help="values, comma or space separated")
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    c = sub.add_parser("convert", help="dump ideal and non-ideal conductances of a weight matrix")
    c.add_argument("config")
    c.add_argument("--weights", required=True, help=".csv, .txt or .npy weight matrix")

    o = sub.add_parser("oracle-check", help="validate the fast engines against the exact nodal solve")
    o.add_argument("config")
    o.add_argument("--trials", type=int, default=100)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = os.environ.get(OUT_ENV) or None
    try:
        cfg = load_config(args.config)
        if args.command == "train":
            result = run_train(cfg, out)
        elif args.command == "sweep":
            result = run_sweep(cfg, SweepSpec(args.param, _values(args.values)), out, jobs=args.jobs)
            for row in result:
                row.pop("accuracies", None)
        elif args.command == "convert":
            result = run_convert(cfg, args.weights, out)
        else:
            if args.trials < 1:
                raise ValueError(f"--trials must be >= 1, got {args.trials}")
            result = run_oracle_check(cfg, args.trials, out if out is not None else cfg.resolve(cfg.output_dir))
    except ConfigError as exc:
        code = EXIT_INPUT if "not found" in str(exc) or "cannot parse" in str(exc) else EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(_plain(result), indent=2, default=str))
    if args.command == "oracle-check" and not result["passed"]:
        print(f"error: FCM error {result['fcm_max_error']:.3e} exceeds {result['tolerance']:.0e}; "
              f"worst tile saved to {result['worst_tile']}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
