"""
sweep.py

Noise-robustness sweep: for every noise level, seed and reweighting policy,
corrupt the test observations with time-compounding Gaussian noise, classify
them, and record accuracy and AUROC.

Output table columns: level, policy, seed, accuracy, auroc. Rows are produced
in (level, seed, policy) order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import pandas as pd

from edict.errors import ConfigError
from edict.evals.classification import accuracy, macro_auroc
from edict.ingest.normalize import feature_stats
from edict.ingest.series import Dataset
from edict.ingest.synthetic import MAX_NOISE_LEVEL, inject_noise
from edict.model.classifier import ClassifierHead
from edict.model.dynamics import EdictModel
from edict.robust.edgr import DEFAULT_ETA, POLICY_KINDS, ReweightPolicy, edgr_infer_batch

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SWEEP_COLUMNS = ["level", "policy", "seed", "accuracy", "auroc"]


@dataclass(frozen=True)
class SweepConfig:
    levels: Tuple[int, ...] = tuple(range(MAX_NOISE_LEVEL + 1))
    policies: Tuple[str, ...] = POLICY_KINDS
    seeds: Tuple[int, ...] = (0, 1, 2)
    eta: float = DEFAULT_ETA

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.levels or any(not 0 <= v <= MAX_NOISE_LEVEL for v in self.levels):
            raise ConfigError("levels", f"must be a non-empty list of integers in [0, {MAX_NOISE_LEVEL}]")
        unknown = [p for p in self.policies if p not in POLICY_KINDS]
        if not self.policies or unknown:
            raise ConfigError("policies", f"must be a non-empty subset of {POLICY_KINDS}, got {list(self.policies)}")
        if not self.seeds:
            raise ConfigError("seeds", "needs at least one seed")
        if min(self.seeds) < 0:
            raise ConfigError("seeds", f"must all be >= 0, got {list(self.seeds)}")
        if not self.eta > 0:
            raise ConfigError("eta", f"must be positive, got {self.eta}")

    def to_dict(self) -> Dict[str, Any]:
        return {"levels": list(self.levels), "policies": list(self.policies), "seeds": list(self.seeds), "eta": self.eta}


@dataclass
class SweepResult:
    table: pd.DataFrame
    config: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> pd.DataFrame:
        """Mean and (population) std over seeds per (level, policy)."""
        grouped = self.table.groupby(["level", "policy"], sort=True)[["accuracy", "auroc"]]
        out = grouped.agg(["mean", lambda s: s.std(ddof=0)])
        out.columns = ["accuracy_mean", "accuracy_std", "auroc_mean", "auroc_std"]
        return out.reset_index()

    def mean_accuracy(self, level: int, policy: str) -> float:
        rows = self.table[(self.table["level"] == level) & (self.table["policy"] == policy)]
        if rows.empty:
            raise KeyError(f"no sweep rows for level {level}, policy {policy!r}")
        return float(rows["accuracy"].mean())


def build_policies(names: Sequence[str], eta: float, population: Dataset) -> Dict[str, ReweightPolicy]:
    """Instantiate named policies; population_mean uses statistics of `population`."""
    policies: Dict[str, ReweightPolicy] = {}
    for name in names:
        stats = feature_stats(population) if name == "population_mean" else None
        policies[name] = ReweightPolicy(kind=name, eta=eta, stats=stats)
    return policies


def noise_sweep(
    model: EdictModel,
    classifier: ClassifierHead,
    test: Dataset,
    policies: Dict[str, ReweightPolicy],
    config: SweepConfig = SweepConfig(),
) -> SweepResult:
    if not test.is_labeled:
        raise ValueError("noise_sweep needs a labeled test set")
    labels = test.labels
    rows = []
    for level in config.levels:
        for seed in config.seeds:
            noisy = inject_noise(test, level, seed=seed)
            for name in config.policies:
                result = edgr_infer_batch(model, classifier, noisy.series, policies[name])
                rows.append(
                    {
                        "level": level,
                        "policy": name,
                        "seed": seed,
                        "accuracy": accuracy(result.predictions, labels),
                        "auroc": macro_auroc(result.probabilities, labels),
                    }
                )
            logger.info(
                "level %d seed %d: %s",
                level, seed, ", ".join(f"{r['policy']}={r['accuracy']:.3f}" for r in rows[-len(config.policies):]),
            )
    return SweepResult(table=pd.DataFrame(rows, columns=SWEEP_COLUMNS), config=config.to_dict())


def write_sweep(result: SweepResult, directory: PathLike) -> Dict[str, Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    csv_path = root / "noise_sweep.csv"
    json_path = root / "noise_sweep.json"
    result.table.to_csv(csv_path, index=False, float_format="%.17g")
    payload = {"config": result.config, "summary": result.summary().to_dict(orient="records")}
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"sweep_csv": csv_path, "sweep_json": json_path}
