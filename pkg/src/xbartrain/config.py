"""Experiment configuration: a YAML file with one section per part of the stack.

Every section is a plain dataclass. Parsing rejects unknown keys and
reports problems by dotted field path (``mapping.tile_rows``). Sweeps address
fields by the same dotted paths.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .circuit import CrossbarConfig
from .converters import AdcSpec, DacSpec
from .errors import ConfigError
from .mapping import MappingSpec
from .nn.crossbar import ENGINE_NAMES, HardwareSpec
from .update import UpdateSpec
from .circuit.aam import MODES as AAM_MODES

DATA_KINDS = ("blobs", "csv", "idx")
LAYER_KINDS = ("linear", "conv", "relu", "maxpool", "flatten")


@dataclass
class CrossbarSection:
    rows: int = 64
    cols: int = 64
    # sets rows and cols together when given
    size: int | None = None
    r_row: float = 1.0
    r_col: float = 4.6
    r_source: float = 0.0
    r_sense: float = 0.0
    r_min: float = 1e5
    r_max: float = 1e6
    v_fs: float = 1.0

    @property
    def dims(self):
        return (self.size, self.size) if self.size is not None else (self.rows, self.cols)


@dataclass
class MappingSection:
    weight_bits: int = 8
    device_bits: int = 2
    # None: use the full crossbar
    tile_rows: int | None = None
    tile_cols: int | None = None
    variation_sigma: float = 0.0
    seed: int = 0


@dataclass
class DacSection:
    bits: int = 1
    stream_bits: int = 1
    v_fs: float = 1.0
    transfer: list | None = None


@dataclass
class AdcSection:
    # None: ideal pass-through converter
    bits: int | None = 8
    clip_percentile: float = 0.999
    transfer: list | None = None


@dataclass
class UpdateSection:
    v: float = 0.0
    gamma: float = 0.0
    lr: float = 0.01
    seed: int = 0


@dataclass
class EngineSection:
    name: str = "fcm"
    interval: int = 1
    fcm_tol: float = 1e-6
    aam_mode: str = "shared"


@dataclass
class PrecisionSection:
    input_bits: int = 8
    error_bits: int = 8


@dataclass
class ModelSection:
    layers: list = field(default_factory=lambda: [
        {"type": "linear", "out": 8}, {"type": "relu"}, {"type": "linear", "out": "classes"},
    ])
    # layer scale = headroom * max|W0| unless a stats file supplies Wmax per layer
    scale_headroom: float = 1.0
    stats_file: str | None = None


@dataclass
class DataSection:
    kind: str = "blobs"
    n_samples: int = 800
    n_features: int = 16
    n_informative: int | None = None
    n_classes: int = 4
    spread: float = 1.0
    separation: float = 6.0
    test_fraction: float = 0.5
    seed: int | None = None
    train_path: str | None = None
    test_path: str | None = None
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    image_shape: list | None = None
    scale: float = 1.0


@dataclass
class TrainSection:
    epochs: int = 10
    batch_size: int = 8
    calibration_batches: int = 4
    # converged = finite loss and final accuracy >= converge_accuracy
    converge_accuracy: float = 0.0
    # when set, sweeps also train the Cross-Ideal twin of each run and require
    # final accuracy >= ideal accuracy - envelope_gap
    envelope_gap: float | None = None
    record_wall_time: bool = True


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    seeds: list | None = None
    output_dir: str = "runs"
    crossbar: CrossbarSection = field(default_factory=CrossbarSection)
    mapping: MappingSection = field(default_factory=MappingSection)
    dac: DacSection = field(default_factory=DacSection)
    adc: AdcSection = field(default_factory=AdcSection)
    update: UpdateSection = field(default_factory=UpdateSection)
    engine: EngineSection = field(default_factory=EngineSection)
    precision: PrecisionSection = field(default_factory=PrecisionSection)
    model: ModelSection = field(default_factory=ModelSection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainSection = field(default_factory=TrainSection)
    # directory relative paths are resolved against (the config file's directory)
    base_dir: str = field(default=".", metadata={"serialize": False})

    # -- derived hardware --------------------------------------------------------

    def crossbar_config(self):
        c = self.crossbar
        rows, cols = c.dims
        return CrossbarConfig.from_resistance(
            c.r_min, c.r_max, rows=rows, cols=cols, r_row=c.r_row, r_col=c.r_col,
            r_source=c.r_source, r_sense=c.r_sense, v_fs=c.v_fs,
        )

    def mapping_spec(self):
        m = self.mapping
        rows, cols = self.crossbar.dims
        return MappingSpec(
            weight_bits=m.weight_bits, device_bits=m.device_bits,
            tile_rows=rows if m.tile_rows is None else m.tile_rows,
            tile_cols=cols if m.tile_cols is None else m.tile_cols,
            variation_sigma=m.variation_sigma, seed=m.seed,
        )

    def hardware(self):
        d, a, u, e, p = self.dac, self.adc, self.update, self.engine, self.precision
        return HardwareSpec(
            crossbar=self.crossbar_config(),
            mapping=self.mapping_spec(),
            dac=DacSpec(bits=d.bits, v_fs=d.v_fs, stream_bits=d.stream_bits,
                        transfer=None if d.transfer is None else tuple(d.transfer)),
            adc=AdcSpec(bits=a.bits, clip_percentile=a.clip_percentile,
                        transfer=None if a.transfer is None else tuple(a.transfer)),
            update=UpdateSpec(v=u.v, gamma=u.gamma, lr=u.lr, seed=u.seed),
            engine=e.name, interval=e.interval, input_bits=p.input_bits, error_bits=p.error_bits,
            fcm_tol=e.fcm_tol, aam_mode=e.aam_mode,
        )

    def ideal_twin(self):
        """Same run on a Cross-Ideal system: no parasitics, ideal ADC, linear noiseless devices."""
        twin = copy.deepcopy(self)
        twin.crossbar.r_row = twin.crossbar.r_col = 0.0
        twin.crossbar.r_source = twin.crossbar.r_sense = 0.0
        twin.adc.bits = None
        twin.adc.transfer = None
        twin.dac.transfer = None
        twin.mapping.variation_sigma = 0.0
        twin.update.v = twin.update.gamma = 0.0
        twin.engine.name = "ideal"
        twin.engine.interval = 1
        return twin

    def resolve(self, path):
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def run_seeds(self):
        return list(self.seeds) if self.seeds else [self.seed]

    # -- validation ------------------------------------------------------------------

    def validate(self):
        """Raise ConfigError naming the offending field(s); returns self."""
        errs = []
        c = self.crossbar
        rows, cols = c.dims
        for name, val in (("crossbar.rows", rows), ("crossbar.cols", cols)):
            if not isinstance(val, int) or val < 1:
                errs.append(f"{name}: must be a positive integer, got {val!r}")
        for name in ("r_row", "r_col", "r_source", "r_sense"):
            if getattr(c, name) < 0:
                errs.append(f"crossbar.{name}: must be >= 0, got {getattr(c, name)}")
        if not 0 < c.r_min < c.r_max:
            errs.append(f"crossbar.r_min/crossbar.r_max: need 0 < r_min < r_max, got {c.r_min}, {c.r_max}")

        m = self.mapping
        if m.weight_bits < 1 or m.device_bits < 1 or m.weight_bits % m.device_bits:
            errs.append(f"mapping.weight_bits={m.weight_bits}: must be a positive multiple of "
                        f"mapping.device_bits={m.device_bits}")
        for tname, cname, limit in (("tile_rows", "rows", rows), ("tile_cols", "cols", cols)):
            tv = getattr(m, tname)
            if tv is not None and not (isinstance(tv, int) and 1 <= tv <= (limit or 0)):
                errs.append(f"mapping.{tname}={tv} exceeds crossbar.{cname}={limit}")
        if m.variation_sigma < 0:
            errs.append(f"mapping.variation_sigma: must be >= 0, got {m.variation_sigma}")

        d = self.dac
        if d.stream_bits < 1 or d.stream_bits > d.bits:
            errs.append(f"dac.stream_bits={d.stream_bits}: must be in [1, dac.bits={d.bits}]")
        if d.v_fs > c.v_fs:
            errs.append(f"dac.v_fs={d.v_fs} exceeds crossbar.v_fs={c.v_fs}")
        p = self.precision
        for name in ("input_bits", "error_bits"):
            bits = getattr(p, name)
            if bits < 1 or (d.stream_bits >= 1 and bits % d.stream_bits):
                errs.append(f"precision.{name}={bits}: must be a positive multiple of dac.stream_bits={d.stream_bits}")
        a = self.adc
        if a.bits is not None and a.bits < 1:
            errs.append(f"adc.bits: must be >= 1 or null, got {a.bits}")
        if not 0 < a.clip_percentile <= 1:
            errs.append(f"adc.clip_percentile: must be in (0, 1], got {a.clip_percentile}")

        u = self.update
        if u.v < 0:
            errs.append(f"update.v: must be >= 0, got {u.v}")
        if u.gamma < 0:
            errs.append(f"update.gamma: must be >= 0, got {u.gamma}")
        if not u.lr > 0:
            errs.append(f"update.lr: must be > 0, got {u.lr}")

        e = self.engine
        if e.name not in ENGINE_NAMES:
            errs.append(f"engine.name: unknown engine {e.name!r}, expected one of {', '.join(ENGINE_NAMES)}")
        if e.interval < 1:
            errs.append(f"engine.interval: must be >= 1, got {e.interval}")
        if e.aam_mode not in AAM_MODES:
            errs.append(f"engine.aam_mode: expected one of {', '.join(AAM_MODES)}, got {e.aam_mode!r}")

        for i, layer in enumerate(self.model.layers):
            kind = layer.get("type") if isinstance(layer, dict) else None
            if kind not in LAYER_KINDS:
                errs.append(f"model.layers[{i}].type: expected one of {', '.join(LAYER_KINDS)}, got {kind!r}")
            elif kind in ("linear", "conv") and "out" not in layer:
                errs.append(f"model.layers[{i}].out: required for {kind} layers")
            elif kind == "conv" and "kernel" not in layer:
                errs.append(f"model.layers[{i}].kernel: required for conv layers")
        if self.model.scale_headroom <= 0:
            errs.append(f"model.scale_headroom: must be > 0, got {self.model.scale_headroom}")

        dd = self.data
        if dd.kind not in DATA_KINDS:
            errs.append(f"data.kind: expected one of {', '.join(DATA_KINDS)}, got {dd.kind!r}")
        elif dd.kind == "csv" and (dd.train_path is None or dd.test_path is None):
            errs.append("data.train_path/data.test_path: both required for csv data")
        elif dd.kind == "idx" and None in (dd.train_images, dd.train_labels, dd.test_images, dd.test_labels):
            errs.append("data.train_images/train_labels/test_images/test_labels: all required for idx data")
        if not 0 < dd.test_fraction < 1:
            errs.append(f"data.test_fraction: must be in (0, 1), got {dd.test_fraction}")

        t = self.train
        if t.epochs < 1:
            errs.append(f"train.epochs: must be >= 1, got {t.epochs}")
        if t.batch_size < 1:
            errs.append(f"train.batch_size: must be >= 1, got {t.batch_size}")
        if errs:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
        # the component constructors carry their own checks; surface them by section
        for section, build in (("crossbar", self.crossbar_config), ("mapping", self.mapping_spec),
                               ("hardware", self.hardware)):
            try:
                build()
            except ValueError as exc:
                raise ConfigError(f"invalid configuration:\n  {section}: {exc}") from exc
        return self


# -- dict / YAML conversion ---------------------------------------------------------


def _from_dict(cls, data, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.metadata.get("serialize", True)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{prefix}." if prefix else ""
        raise ConfigError("unknown configuration field(s): " + ", ".join(where + k for k in unknown))
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _from_dict(sub, value, f"{prefix}.{name}" if prefix else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def from_dict(data, base_dir="."):
    cfg = _from_dict(ExperimentConfig, data, "")
    cfg.base_dir = str(base_dir)
    return cfg


def to_dict(cfg):
    out = {}
    for f in dataclasses.fields(cfg):
        if not f.metadata.get("serialize", True):
            continue
        v = getattr(cfg, f.name)
        out[f.name] = to_dict(v) if dataclasses.is_dataclass(v) else copy.deepcopy(v)
    return out


def load_config(path, validate=True):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    cfg = from_dict(data or {}, base_dir=path.parent)
    return cfg.validate() if validate else cfg


def dump_config(cfg):
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def save_config(cfg, path):
    Path(path).write_text(dump_config(cfg))


# -- sweeps -----------------------------------------------------------------------------


@dataclass
class SweepSpec:
    param: str
    values: list

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep needs at least one value")

    def run_name(self, value):
        return f"{self.param.replace('.', '_')}={value}"


def get_path(cfg, path):
    obj = cfg
    for part in path.split("."):
        if not dataclasses.is_dataclass(obj) or part not in {f.name for f in dataclasses.fields(obj)}:
            raise ConfigError(f"sweep parameter {path!r} does not resolve (at {part!r})")
        obj = getattr(obj, part)
    return obj


def with_value(cfg, path, value):
    """Deep copy of ``cfg`` with the dotted field ``path`` set to ``value``."""
    get_path(cfg, path)
    out = copy.deepcopy(cfg)
    *parents, leaf = path.split(".")
    obj = out
    for part in parents:
        obj = getattr(obj, part)
    setattr(obj, leaf, value)
    return out


def parse_value(text):
    """A sweep value from the command line, typed the way YAML would type it."""
    return yaml.safe_load(text)
