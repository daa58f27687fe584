"""Experiment runners behind the command line: train, sweep, convert and oracle-check.

Every runner takes a validated ExperimentConfig, writes its artifacts into an
output directory and returns an in-memory summary.
"""

from __future__ import annotations

import csv
import json
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import ConductanceTile, aam_convert, fcm_convert, fcm_nodes, solve_nodal_oracle
from .config import dump_config, with_value
from .errors import ConfigError
from .mapping import map_weights
from .nn import Dataset, TrainState, build_model, load_csv, load_idx, make_blobs, split, train_epoch

METRIC_FIELDS = ("epoch", "train_loss", "test_accuracy", "wall_time", "engine_refreshes")
SWEEP_FIELDS = ("param_value", "final_accuracy", "accuracy_std", "n_seeds", "ideal_accuracy", "converged")
RUN_FIELDS = ("param_value", "seed", "final_accuracy", "final_loss", "diverged", "ideal_accuracy")

# relative column-current tolerance FCM must meet against the nodal oracle
FCM_TOLERANCE = 1e-3


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in fields])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def output_dir(cfg, override=None):
    out = Path(override) if override is not None else cfg.resolve(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- data -------------------------------------------------------------------------------


def load_data(cfg, seed=None):
    """(train, test) datasets named by the config; blob data is seeded per run."""
    d = cfg.data
    seed = cfg.seed if seed is None else seed
    if d.kind == "blobs":
        data_seed = seed if d.seed is None else d.seed
        data = make_blobs(d.n_samples, d.n_features, d.n_classes, d.spread, d.separation,
                          seed=data_seed, n_informative=d.n_informative)
        return split(data, d.test_fraction, seed=data_seed)
    shape = tuple(d.image_shape) if d.image_shape is not None else None
    try:
        if d.kind == "csv":
            return (load_csv(cfg.resolve(d.train_path), shape, d.scale),
                    load_csv(cfg.resolve(d.test_path), shape, d.scale))
        train = load_idx(cfg.resolve(d.train_images), cfg.resolve(d.train_labels), d.scale)
        test = load_idx(cfg.resolve(d.test_images), cfg.resolve(d.test_labels), d.scale)
        return train, test
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset file not found: {exc}") from exc


def _layer_scales(cfg):
    if cfg.model.stats_file is None:
        return None
    path = cfg.resolve(cfg.model.stats_file)
    if not path.exists():
        raise ConfigError(f"model.stats_file not found: {path}")
    return json.loads(path.read_text())["layer_scales"]


# -- training ---------------------------------------------------------------------------


@dataclass
class RunResult:
    seed: int
    metrics: list
    final_accuracy: float
    final_loss: float
    diverged: bool
    layer_scales: list
    max_update: list
    # seconds spent regenerating non-ideal conductances
    convert_time: float = 0.0


def train_run(cfg, seed=None):
    """Train one model for ``train.epochs`` epochs; divergence ends the run early."""
    seed = cfg.seed if seed is None else seed
    train, test = load_data(cfg, seed)
    n_classes = max(train.n_classes, test.n_classes)
    model = build_model(cfg.model.layers, cfg.hardware(), train.sample_shape, n_classes, seed=seed,
                        layer_scales=_layer_scales(cfg), scale_headroom=cfg.model.scale_headroom)
    state = TrainState(model, batch_size=cfg.train.batch_size, seed=seed,
                       calibration_batches=cfg.train.calibration_batches)
    max_update = [0.0] * len(model.crossbar_layers)
    for _ in range(cfg.train.epochs):
        m = train_epoch(state, train, test)
        for k, layer in enumerate(model.crossbar_layers):
            if layer.dW is not None:
                max_update[k] = max(max_update[k], float(np.max(np.abs(layer.dW))) * layer.update_spec.lr)
        if not cfg.train.record_wall_time:
            m["wall_time"] = 0.0
        if state.diverged:
            break
    last = state.log[-1]
    return RunResult(
        seed=seed, metrics=state.log, final_accuracy=last["test_accuracy"],
        final_loss=last["train_loss"], diverged=state.diverged,
        layer_scales=[l.weights.layer_scale for l in model.crossbar_layers], max_update=max_update,
        convert_time=model.convert_time,
    )


def _converged(cfg, accuracy, ideal, diverged):
    if diverged or not np.isfinite(accuracy):
        return False
    floor = cfg.train.converge_accuracy
    if ideal is not None and cfg.train.envelope_gap is not None:
        floor = max(floor, ideal - cfg.train.envelope_gap)
    return bool(accuracy >= floor)


def run_train(cfg, out=None):
    """Train with ``cfg.seed``; writes metrics.csv, summary.json, stats.json and config.yaml."""
    out = output_dir(cfg, out)
    res = train_run(cfg)
    write_csv(out / "metrics.csv", METRIC_FIELDS, res.metrics)
    (out / "config.yaml").write_text(dump_config(cfg))
    write_json(out / "stats.json", {"layer_scales": res.layer_scales, "max_update": res.max_update})
    summary = {
        "name": cfg.name, "seed": res.seed, "epochs_run": len(res.metrics),
        "final_accuracy": res.final_accuracy, "final_loss": res.final_loss if np.isfinite(res.final_loss) else None,
        "diverged": res.diverged, "converged": _converged(cfg, res.final_accuracy, None, res.diverged),
    }
    write_json(out / "summary.json", summary)
    return summary


# -- sweeps -------------------------------------------------------------------------------


def _sweep_job(args):
    cfg, seed = args
    return train_run(cfg, seed)


def run_sweep(cfg, sweep, out=None, jobs=1):
    """One training run per (value, seed); combined results in sweep.csv and runs.csv.

    Every value is validated before anything runs. With ``train.envelope_gap``
    set, each run's Cross-Ideal twin is trained too and convergence means
    staying within the gap of it.
    """
    configs = []
    for value in sweep.values:
        try:
            configs.append(with_value(cfg, sweep.param, value).validate())
        except ConfigError as exc:
            raise ConfigError(f"sweep value {sweep.param}={value!r} is invalid: {exc}") from exc
    out = output_dir(cfg, out)
    seeds = cfg.run_seeds
    jobs_list = [(c, s) for c in configs for s in seeds]
    twins = {}
    if cfg.train.envelope_gap is not None:
        for c in configs:
            key = dump_config(c.ideal_twin())
            if key not in twins:
                twins[key] = c.ideal_twin()
        twin_keys = list(twins)
        jobs_list += [(twins[k], s) for k in twin_keys for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_job, jobs_list))
    else:
        results = [_sweep_job(j) for j in jobs_list]

    n_main = len(configs) * len(seeds)
    ideal = {}
    if twins:
        for i, key in enumerate(twin_keys):
            ideal[key] = results[n_main + i * len(seeds): n_main + (i + 1) * len(seeds)]

    rows, run_rows = [], []
    for i, (value, c) in enumerate(zip(sweep.values, configs)):
        runs = results[i * len(seeds):(i + 1) * len(seeds)]
        twin_runs = ideal.get(dump_config(c.ideal_twin())) if twins else None
        run_dir = out / sweep.run_name(value)
        run_dir.mkdir(exist_ok=True)
        for j, r in enumerate(runs):
            write_csv(run_dir / f"metrics_seed{r.seed}.csv", METRIC_FIELDS, r.metrics)
            run_rows.append({
                "param_value": value, "seed": r.seed, "final_accuracy": r.final_accuracy,
                "final_loss": r.final_loss, "diverged": r.diverged,
                "ideal_accuracy": twin_runs[j].final_accuracy if twin_runs else float("nan"),
            })
        acc = np.array([0.0 if r.diverged else r.final_accuracy for r in runs])
        ideal_acc = float(np.mean([r.final_accuracy for r in twin_runs])) if twin_runs else None
        diverged = sum(r.diverged for r in runs) * 2 > len(runs)
        rows.append({
            "param_value": value, "final_accuracy": float(acc.mean()),
            "accuracy_std": float(acc.std(ddof=1)) if len(acc) > 1 else 0.0,
            "n_seeds": len(runs), "ideal_accuracy": float("nan") if ideal_acc is None else ideal_acc,
            "converged": _converged(cfg, float(acc.mean()), ideal_acc, diverged),
            "accuracies": acc.tolist(),
        })
    write_csv(out / "sweep.csv", SWEEP_FIELDS, rows)
    write_csv(out / "runs.csv", RUN_FIELDS, run_rows)
    (out / "config.yaml").write_text(dump_config(cfg))
    return rows


# -- conductance conversion ------------------------------------------------------------------


def load_matrix(path):
    """A 2-D weight matrix from .npy or comma/whitespace separated text."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"weights file not found: {path}")
    try:
        if path.suffix == ".npy":
            W = np.load(path)
        else:
            text = path.read_text()
            W = np.loadtxt(path, delimiter="," if "," in text else None, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse weights: {exc}") from exc
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.size == 0 or not np.all(np.isfinite(W)):
        raise ConfigError(f"{path}: weights must be a non-empty finite 2-D matrix, got shape {W.shape}")
    return W


def _stitch(g, n_tr, n_tc):
    """(n_tr, n_tc, R, C) tiles laid out as one (n_tr*R, n_tc*C) grid."""
    R, C = g.shape[-2:]
    return g.transpose(0, 2, 1, 3).reshape(n_tr * R, n_tc * C)


def relative_error(approx, exact):
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(approx - exact) / np.abs(exact)
    return np.where(exact == 0, np.where(approx == 0, 0.0, np.inf), err)


def run_convert(cfg, weights_file, out=None):
    """Dump ideal and per-engine non-ideal conductances plus the AAM-vs-FCM error map.

    One CSV grid per (weight slice, polarity); tiles are stitched in place.
    """
    W = load_matrix(weights_file)
    out = output_dir(cfg, out)
    hw = cfg.hardware()
    t = map_weights(W, hw.mapping, hw.crossbar)
    tile = ConductanceTile(t.config, t.tiles)
    engines = {
        "fcm": fcm_convert(tile, tol=hw.fcm_tol).g,
        "aam": aam_convert(tile, mode=hw.aam_mode).g,
    }
    err = relative_error(engines["aam"], engines["fcm"])
    n_tr, n_tc = t.grid
    for s in range(t.tiles.shape[0]):
        for p, pol in enumerate(("pos", "neg")):
            tag = f"s{s}_{pol}"
            np.savetxt(out / f"g_ideal_{tag}.csv", _stitch(t.tiles[s, p], n_tr, n_tc), delimiter=",", fmt="%.9e")
            for name, g in engines.items():
                np.savetxt(out / f"g_{name}_{tag}.csv", _stitch(g[s, p], n_tr, n_tc), delimiter=",", fmt="%.9e")
            np.savetxt(out / f"error_aam_vs_fcm_{tag}.csv", _stitch(err[s, p], n_tr, n_tc), delimiter=",",
                       fmt="%.9e")
    summary = {
        "shape": list(W.shape), "tiles": int(np.prod(t.tiles.shape[:-2])),
        "max_error": float(err.max()), "mean_error": float(err.mean()),
    }
    write_json(out / "convert_summary.json", summary)
    return summary


# -- oracle check ---------------------------------------------------------------------------------


def _timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def run_oracle_check(cfg, trials, out=None, seed=None, dims=None):
    """Compare FCM and AAM column currents against the exact nodal solve on random tiles.

    Conductances are uniform in [g_min, g_max] and inputs uniform in
    [0, v_fs]. ``dims`` (default: the crossbar's) may list several tile
    shapes, visited in turn. Returns the report; ``report["passed"]`` is False
    when FCM misses its tolerance, in which case the worst tile is saved.
    """
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    base = cfg.crossbar_config()
    dims = [tuple(base_dims) for base_dims in (dims or [(base.rows, base.cols)])]
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    stats = {k: [] for k in ("fcm", "aam")}
    times = {k: 0.0 for k in ("oracle", "fcm", "aam", "fcm_convert", "aam_convert")}
    worst = (-1.0, None)
    for k in range(trials):
        rows, cols = dims[k % len(dims)]
        xcfg = base.with_(rows=rows, cols=cols)
        tile = ConductanceTile(xcfg, rng.uniform(xcfg.g_min, xcfg.g_max, size=(rows, cols)))
        v_in = rng.uniform(0.0, xcfg.v_fs, size=rows)
        sol, dt = _timed(solve_nodal_oracle, tile, v_in)
        times["oracle"] += dt
        (vt, vb, _), dt = _timed(fcm_nodes, tile, v_in, tol=cfg.engine.fcm_tol)
        times["fcm"] += dt
        i_fcm = np.sum(tile.g * (vt - vb), axis=0)
        g_aam, dt = _timed(aam_convert, tile, mode=cfg.engine.aam_mode)
        times["aam_convert"] += dt
        i_aam = v_in @ g_aam.g
        _, dt = _timed(fcm_convert, tile, tol=cfg.engine.fcm_tol)
        times["fcm_convert"] += dt
        for name, cur in (("fcm", i_fcm), ("aam", i_aam)):
            e = float(np.max(relative_error(cur, sol.i_col)))
            stats[name].append(e)
            if name == "fcm" and e > worst[0]:
                worst = (e, (tile, v_in))
    report = {
        "trials": trials,
        "fcm_max_error": max(stats["fcm"]), "fcm_mean_error": float(np.mean(stats["fcm"])),
        "aam_max_error": max(stats["aam"]), "aam_mean_error": float(np.mean(stats["aam"])),
        "fcm_speedup_vs_oracle": times["oracle"] / times["fcm"] if times["fcm"] else float("inf"),
        "aam_speedup_vs_fcm": times["fcm_convert"] / times["aam_convert"] if times["aam_convert"] else float("inf"),
        "tolerance": FCM_TOLERANCE,
    }
    report["passed"] = bool(report["fcm_max_error"] <= FCM_TOLERANCE)
    if out is not None or not report["passed"]:
        out = output_dir(cfg, out)
        if not report["passed"]:
            tile, v_in = worst[1]
            np.savez(out / "worst_tile.npz", g=tile.g, v_in=v_in,
                     config=json.dumps(dataclasses.asdict(tile.config)), error=worst[0])
            report["worst_tile"] = str(out / "worst_tile.npz")
        write_json(out / "oracle_check.json", report)
    return report
