"""
config.py

Run configuration for the command-line front end.

A run is described by one JSON file. Sections map onto the frozen config
dataclasses of the modules that own them:

  {
    "format_version": 1,              # required
    "seed": 0,                        # data generation and splits
    "out": "runs/synthetic",
    "checkpoint": null,               # default: <out>/edict.json
    "classifier_checkpoint": null,    # default: <out>/classifier.json
    "dataset":    {...DatasetConfig},
    "train":      {...TrainConfig},
    "classifier": {...ClassifierConfig},
    "holdout":    {...HoldoutConfig},
    "sweep":      {...SweepConfig},
    "infer":      {...InferConfig}
  }

Every key is optional except format_version. Unknown keys, wrong types and
constraint violations raise ConfigError naming the dotted key.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from edict.errors import ConfigError
from edict.ingest.normalize import DEFAULT_RATIOS, HoldoutConfig
from edict.ingest.synthetic import KEEP_FRACTION, MAX_NOISE_LEVEL
from edict.robust.edgr import DEFAULT_ETA, POLICY_KINDS
from edict.robust.sweep import SweepConfig
from edict.training.trainer import ClassifierConfig, TrainConfig

PathLike = Union[str, Path]
FORMAT_VERSION = 1
DATASET_SOURCES = ("synthetic", "demo2d", "csv")


@dataclass(frozen=True)
class DatasetConfig:
    """
    source:
      "synthetic" and "demo2d" are regenerated from the run seed; "csv" reads
      a directory written by `edict generate` (or any long-format dataset).
    """

    source: str = "synthetic"
    n_series: int = 2000
    path: Optional[str] = None
    keep_fraction: float = KEEP_FRACTION
    split: Tuple[float, float, float] = DEFAULT_RATIOS

    def __post_init__(self) -> None:
        if self.source not in DATASET_SOURCES:
            raise ConfigError("source", f"must be one of {DATASET_SOURCES}, got {self.source!r}")
        if self.n_series < 1:
            raise ConfigError("n_series", f"must be >= 1, got {self.n_series}")
        if self.source == "csv" and not self.path:
            raise ConfigError("path", "is required when source is 'csv'")
        if not 0.0 < self.keep_fraction <= KEEP_FRACTION:
            raise ConfigError("keep_fraction", f"must lie in (0, {KEEP_FRACTION}], got {self.keep_fraction}")
        split = tuple(float(r) for r in self.split)
        if len(split) != 3 or any(r <= 0 for r in split) or abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError("split", f"must be three positive ratios summing to 1, got {list(split)}")
        object.__setattr__(self, "split", split)


@dataclass(frozen=True)
class InferConfig:
    series_id: Optional[str] = None
    policy: str = "edgr"
    eta: float = DEFAULT_ETA
    noise_level: int = 0
    noise_seed: int = 0

    def __post_init__(self) -> None:
        if self.policy not in POLICY_KINDS:
            raise ConfigError("policy", f"must be one of {POLICY_KINDS}, got {self.policy!r}")
        if not self.eta > 0:
            raise ConfigError("eta", f"must be positive, got {self.eta}")
        if not 0 <= self.noise_level <= MAX_NOISE_LEVEL:
            raise ConfigError("noise_level", f"must lie in [0, {MAX_NOISE_LEVEL}], got {self.noise_level}")
        if self.noise_seed < 0:
            raise ConfigError("noise_seed", f"must be >= 0, got {self.noise_seed}")


@dataclass(frozen=True)
class RunConfig:
    format_version: int = FORMAT_VERSION
    seed: int = 0
    out: str = "runs/default"
    checkpoint: Optional[str] = None
    classifier_checkpoint: Optional[str] = None
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    holdout: HoldoutConfig = field(default_factory=HoldoutConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    infer: InferConfig = field(default_factory=InferConfig)

    def __post_init__(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise ConfigError("format_version", f"unsupported version {self.format_version}; expected {FORMAT_VERSION}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else self.out_dir / "edict.json"

    @property
    def classifier_path(self) -> Path:
        return Path(self.classifier_checkpoint) if self.classifier_checkpoint else self.out_dir / "classifier.json"

    def to_dict(self) -> Dict[str, Any]:
        return _plain(dataclasses.asdict(self))

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None) -> "RunConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if out is not None:
            changes["out"] = str(out)
        return dataclasses.replace(self, **changes) if changes else self


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# --- strict parsing -------------------------------------------------------------

def _type_name(tp: Any) -> str:
    return getattr(tp, "__name__", str(tp))


def _coerce(value: Any, tp: Any, key: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], key)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, Mapping):
            raise ConfigError(key, f"expected an object, got {type(value).__name__}")
        return _build(tp, value, key)
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {type(value).__name__}")
        item_type = args[0] if args else Any
        items = [_coerce(v, item_type, f"{key}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if tp is Any:
        return value
    raise ConfigError(key, f"unsupported field type {_type_name(tp)}")


def _build(cls: Any, raw: Mapping[str, Any], prefix: str = "") -> Any:
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    dotted = (lambda k: f"{prefix}.{k}") if prefix else (lambda k: k)
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(dotted(unknown[0]), "unknown key")
    kwargs = {k: _coerce(v, hints[k], dotted(k)) for k, v in raw.items()}
    try:
        return cls(**kwargs)
    except ConfigError as e:
        if prefix and not e.key.startswith(prefix + "."):
            raise ConfigError(dotted(e.key), str(e).split(": ", 1)[-1]) from None
        raise


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "configuration must be a JSON object")
    if "format_version" not in raw:
        raise ConfigError("format_version", "is required")
    return _build(RunConfig, raw)


def parse_config(path: PathLike) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Missing required file: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"{p} is not valid JSON: {e}") from e
    return config_from_dict(raw)


def write_config(config: RunConfig, path: PathLike) -> Path:
    p = Path(path)
    p.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p
