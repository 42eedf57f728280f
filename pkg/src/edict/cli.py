"""
cli.py

Command-line front end.

Usage:
  edict generate            --config run.json [--seed N] [--out DIR] [--overwrite]
  edict train               --config run.json
  edict eval-calibration    --config run.json
  edict train-classifier    --config run.json
  edict noise-sweep         --config run.json
  edict infer               --config run.json
  edict reproduce-synthetic --config run.json

Every command stages its outputs in a temporary directory inside the output
directory and promotes them with os.replace once the command succeeded. Each
command also writes <command>.config.json (the effective configuration) and
<command>.manifest.json (command, seed, config and sha256 of every artifact).

Datasets and splits are rederived from the run seed on every command, so
train / eval / sweep runs over the same config see the same partitions.

Exit status: 0 on success, 1 on a declared error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from edict.config import RunConfig, parse_config, write_config
from edict.errors import ConfigError, DataFormatError, PredictiveDegeneracyError
from edict.evals.calibration import contraction_diagnostic, eval_protocol, write_report
from edict.evals.classification import accuracy
from edict.ingest.csv_io import load_dataset_dir, save_csv
from edict.ingest.normalize import apply_stats, split_random, split_stratified, znormalize
from edict.ingest.series import Dataset, IrregularSeries, NormStats
from edict.ingest.synthetic import generate_demo2d, generate_synthetic, inject_noise
from edict.model.classifier import ClassifierHead
from edict.model.dynamics import EdictModel
from edict.robust.edgr import edgr_infer
from edict.robust.sweep import build_policies, noise_sweep, write_sweep
from edict.training.checkpoint import load_classifier, load_model, save_classifier, save_model
from edict.training.trainer import predict_proba, train_classifier, train_edict

logger = logging.getLogger(__name__)

DECLARED_ERRORS = (
    ConfigError,
    DataFormatError,
    PredictiveDegeneracyError,
    FileNotFoundError,
    FileExistsError,
    ValueError,
    KeyError,
    OSError,
)


# --- staging -----------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class Staging:
    """
    Collects a command's artifacts in a temp directory and promotes them
    together. `declare(name, dest)` must be called for every artifact before
    any work is done so that overwrite refusals happen up front. Artifacts are
    moved beside their targets before any target is replaced, so a target
    outside the run directory or on another filesystem is promoted the same way.
    """

    def __init__(self, command: str, config: RunConfig, overwrite: bool):
        self.command = command
        self.config = config
        self.overwrite = overwrite
        self.out = config.out_dir
        self.targets: Dict[str, Path] = {}
        self.root: Optional[Path] = None
        self.declare(f"{command}.config.json")
        self.declare(f"{command}.manifest.json")

    def declare(self, name: str, dest: Optional[Path] = None) -> Path:
        target = dest if dest is not None else self.out / name
        if target.exists() and not self.overwrite:
            raise FileExistsError(f"Refusing to overwrite {target}; pass --overwrite")
        self.targets[name] = target
        return target

    def path(self, name: str) -> Path:
        if self.root is None:
            raise RuntimeError("staging directory is not open")
        if name not in self.targets:
            raise KeyError(f"artifact {name!r} was not declared")
        return self.root / name

    def __enter__(self) -> "Staging":
        self.out.mkdir(parents=True, exist_ok=True)
        self.root = Path(tempfile.mkdtemp(prefix=f".{self.command}-", dir=self.out))
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        try:
            if exc_type is None:
                self._promote()
        finally:
            if self.root is not None:
                shutil.rmtree(self.root, ignore_errors=True)
                self.root = None

    def _hashes(self) -> Dict[str, str]:
        out: Dict[str, str] = {}
        for name in sorted(self.targets):
            staged = self.root / name
            if staged.is_dir():
                for f in sorted(p for p in staged.rglob("*") if p.is_file()):
                    out[f"{name}/{f.relative_to(staged).as_posix()}"] = sha256_file(f)
            elif staged.exists():
                out[name] = sha256_file(staged)
        return out

    def _promote(self) -> None:
        write_config(self.config, self.root / f"{self.command}.config.json")
        manifest = {
            "command": self.command,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "artifacts": self._hashes(),
        }
        (self.root / f"{self.command}.manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        # first move every artifact next to its target (possibly across filesystems),
        # then rename in place; a failed move leaves every target untouched
        moved: List[Tuple[Path, Path]] = []
        try:
            for name, target in self.targets.items():
                staged = self.root / name
                if not staged.exists():
                    continue
                target.parent.mkdir(parents=True, exist_ok=True)
                sibling = target.with_name(f".{target.name}.{self.root.name}")
                shutil.move(str(staged), str(sibling))
                moved.append((sibling, target))
        except OSError:
            for sibling, _ in moved:
                if sibling.is_dir():
                    shutil.rmtree(sibling, ignore_errors=True)
                else:
                    sibling.unlink(missing_ok=True)
            raise
        for sibling, target in moved:
            if target.is_dir():
                shutil.rmtree(target)
            os.replace(sibling, target)
            logger.info("promoted %s", target)


# --- data ---------------------------------------------------------------------------

@dataclass
class Prepared:
    train: Dataset
    val: Dataset
    test: Dataset
    stats: NormStats


def load_source(config: RunConfig) -> Dataset:
    ds = config.dataset
    if ds.source == "synthetic":
        return generate_synthetic(ds.n_series, seed=config.seed, keep_fraction=ds.keep_fraction)
    if ds.source == "demo2d":
        return generate_demo2d(ds.n_series, seed=config.seed, keep_fraction=ds.keep_fraction)
    return load_dataset_dir(ds.path)


def prepare(config: RunConfig, stats: Optional[NormStats] = None) -> Prepared:
    """Seeded split plus z-normalization (with `stats` when given, else fitted on train)."""
    dataset = load_source(config)
    if stats is not None and stats.mean.shape[0] != dataset.n_features:
        raise ValueError(f"checkpoint expects D={stats.mean.shape[0]}, dataset has D={dataset.n_features}")
    splitter = split_stratified if dataset.is_labeled else split_random
    train, val, test = splitter(dataset, config.dataset.split, seed=config.seed)
    if stats is None:
        (train, val, test), stats = znormalize(train, val, test)
    else:
        train, val, test = (apply_stats(d, stats) for d in (train, val, test))
    return Prepared(train=train, val=val, test=test, stats=stats)


def _load_model(config: RunConfig) -> tuple:
    ckpt = load_model(config.checkpoint_path)
    model: EdictModel = ckpt.params  # type: ignore[assignment]
    prepared = prepare(config, stats=ckpt.stats)
    if model.dims.n_features != prepared.train.n_features:
        raise ValueError(
            f"checkpoint expects D={model.dims.n_features}, dataset has D={prepared.train.n_features}"
        )
    return model, prepared


def _load_head(config: RunConfig, model: EdictModel) -> ClassifierHead:
    head: ClassifierHead = load_classifier(config.classifier_path).params  # type: ignore[assignment]
    if head.hidden != model.dims.hidden:
        raise ValueError(f"classifier expects hidden width {head.hidden}, model has {model.dims.hidden}")
    return head


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _banner(title: str, lines: Sequence[str]) -> None:
    print(f"\n=== {title} ===")
    for line in lines:
        print(line)


# --- command bodies -----------------------------------------------------------------

def _do_train(config: RunConfig, stage: Staging, prepared: Prepared) -> EdictModel:
    result = train_edict(prepared.train, prepared.val, config.train)
    save_model(stage.path("edict.json"), result.model, config=config.train.to_dict(), stats=prepared.stats)
    result.history.to_csv(stage.path("loss_log.csv"), index=False, float_format="%.17g")
    last = result.history.iloc[-1]
    _banner("Training", [
        f"epochs: {len(result.history)}  best epoch: {result.best_epoch}",
        f"final total loss: {last['total']:.5f}",
        f"best validation MSE: {result.best_val_mse:.5f}" if np.isfinite(result.best_val_mse) else "no validation MSE",
    ])
    return result.model


def _do_eval(config: RunConfig, stage: Staging, model: EdictModel, test: Dataset) -> Dict[str, Any]:
    interp, extrap = eval_protocol(model, test, config.holdout, seed=config.seed)
    reports = [r for r in (interp, extrap) if r is not None]
    for report in reports:
        write_report(report, stage.root)
    contraction = contraction_diagnostic(model, test)
    _write_json(stage.path("contraction.json"), {**dataclasses.asdict(contraction), "contracts": contraction.contracts})
    _banner("Calibration", [
        f"{r.mode}: ECE {r.ece:.4f} +- {r.ece_std:.4f}, MSE {r.mse:.5f} +- {r.mse_std:.5f} ({r.n_targets} cells)"
        for r in reports
    ] + [f"predictive variance before/after update: {contraction.before:.4f} / {contraction.after:.4f}"])
    return {
        "interpolation": interp.summary(),
        "extrapolation": extrap.summary() if extrap is not None else None,
        "contraction": dataclasses.asdict(contraction),
    }


def _do_classifier(config: RunConfig, stage: Staging, model: EdictModel, prepared: Prepared) -> ClassifierHead:
    result = train_classifier(model, prepared.train, prepared.val, config.classifier)
    labels = prepared.test.labels
    per_seed = []
    for row in result.per_seed.itertuples(index=False):
        probs = predict_proba(model, result.heads[int(row.seed)], prepared.test)
        per_seed.append(
            {"seed": int(row.seed), "val_accuracy": float(row.val_accuracy), "test_accuracy": accuracy(probs.argmax(axis=1), labels)}
        )
    test_acc = np.array([r["test_accuracy"] for r in per_seed])
    save_classifier(stage.path("classifier.json"), result.head, config=config.classifier.to_dict())
    result.history.to_csv(stage.path("classifier_log.csv"), index=False, float_format="%.17g")
    report = {
        "best_seed": result.seed,
        "per_seed": per_seed,
        "test_accuracy_mean": float(test_acc.mean()),
        "test_accuracy_std": float(test_acc.std()),
    }
    _write_json(stage.path("classifier_report.json"), report)
    _banner("Classifier", [
        f"best seed: {result.seed}",
        f"test accuracy: {report['test_accuracy_mean']:.4f} +- {report['test_accuracy_std']:.4f}",
    ])
    return result.head


def _do_sweep(config: RunConfig, stage: Staging, model: EdictModel, head: ClassifierHead, prepared: Prepared):
    policies = build_policies(config.sweep.policies, config.sweep.eta, prepared.train)
    result = noise_sweep(model, head, prepared.test, policies, config.sweep)
    write_sweep(result, stage.root)
    summary = result.summary()
    top = max(config.sweep.levels)
    _banner("Noise sweep", [
        f"level {top} {row.policy}: accuracy {row.accuracy_mean:.4f} +- {row.accuracy_std:.4f}"
        for row in summary[summary["level"] == top].itertuples(index=False)
    ])
    return result


# --- commands -----------------------------------------------------------------------

def cmd_generate(config: RunConfig, overwrite: bool) -> None:
    if config.dataset.source == "csv":
        raise ConfigError("dataset.source", "generate needs 'synthetic' or 'demo2d'")
    stage = Staging("generate", config, overwrite)
    stage.declare("data")
    with stage:
        dataset = load_source(config)
        save_csv(dataset, stage.path("data"))
        _banner("Generate", [f"{len(dataset)} {config.dataset.source} series written to {config.out_dir / 'data'}"])


def cmd_train(config: RunConfig, overwrite: bool) -> None:
    stage = Staging("train", config, overwrite)
    stage.declare("edict.json", config.checkpoint_path)
    stage.declare("loss_log.csv")
    with stage:
        _do_train(config, stage, prepare(config))


def cmd_eval_calibration(config: RunConfig, overwrite: bool) -> None:
    stage = Staging("eval-calibration", config, overwrite)
    for mode in ("interpolation", "extrapolation"):
        stage.declare(f"calibration_{mode}.csv")
        stage.declare(f"calibration_{mode}.json")
    stage.declare("contraction.json")
    model, prepared = _load_model(config)
    with stage:
        _do_eval(config, stage, model, prepared.test)


def cmd_train_classifier(config: RunConfig, overwrite: bool) -> None:
    stage = Staging("train-classifier", config, overwrite)
    stage.declare("classifier.json", config.classifier_path)
    stage.declare("classifier_log.csv")
    stage.declare("classifier_report.json")
    model, prepared = _load_model(config)
    with stage:
        _do_classifier(config, stage, model, prepared)


def cmd_noise_sweep(config: RunConfig, overwrite: bool) -> None:
    stage = Staging("noise-sweep", config, overwrite)
    stage.declare("noise_sweep.csv")
    stage.declare("noise_sweep.json")
    model, prepared = _load_model(config)
    head = _load_head(config, model)
    with stage:
        _do_sweep(config, stage, model, head, prepared)


def _find_series(prepared: Prepared, series_id: Optional[str]) -> IrregularSeries:
    if series_id is None:
        return prepared.test[0]
    for ds in (prepared.test, prepared.val, prepared.train):
        try:
            return ds.by_id(series_id)
        except KeyError:
            continue
    raise KeyError(f"no series with id {series_id!r}")


def cmd_infer(config: RunConfig, overwrite: bool) -> None:
    stage = Staging("infer", config, overwrite)
    stage.declare("inference.json")
    model, prepared = _load_model(config)
    head = _load_head(config, model)
    inf = config.infer
    with stage:
        series = _find_series(prepared, inf.series_id)
        noisy = inject_noise(prepared.test.with_series([series]), inf.noise_level, seed=inf.noise_seed)[0]
        policy = build_policies([inf.policy], inf.eta, prepared.train)[inf.policy]
        probs, corrected = edgr_infer(model, head, noisy, policy)
        n_clipped = int(np.sum(corrected.values != noisy.values))
        payload = {
            "series_id": series.id,
            "label": series.label,
            "policy": inf.policy,
            "eta": inf.eta,
            "noise_level": inf.noise_level,
            "probabilities": probs.tolist(),
            "predicted_class": int(np.argmax(probs)),
            "n_clipped": n_clipped,
        }
        _write_json(stage.path("inference.json"), payload)
        _banner("Inference", [
            f"series {series.id}: class {payload['predicted_class']} (p={probs.max():.4f})",
            f"clipped cells: {n_clipped}",
        ])


def cmd_reproduce_synthetic(config: RunConfig, overwrite: bool) -> None:
    """generate -> train -> eval-calibration -> train-classifier -> noise-sweep in one run."""
    if config.dataset.source != "synthetic":
        config = dataclasses.replace(config, dataset=dataclasses.replace(config.dataset, source="synthetic"))
    stage = Staging("reproduce-synthetic", config, overwrite)
    stage.declare("edict.json", config.checkpoint_path)
    stage.declare("classifier.json", config.classifier_path)
    for name in ("loss_log.csv", "contraction.json", "classifier_log.csv",
                 "classifier_report.json", "noise_sweep.csv", "noise_sweep.json", "reproduce_summary.json"):
        stage.declare(name)
    for mode in ("interpolation", "extrapolation"):
        stage.declare(f"calibration_{mode}.csv")
        stage.declare(f"calibration_{mode}.json")
    with stage:
        prepared = prepare(config)
        model = _do_train(config, stage, prepared)
        calibration = _do_eval(config, stage, model, prepared.test)
        head = _do_classifier(config, stage, model, prepared)
        sweep = _do_sweep(config, stage, model, head, prepared)

        high = [lvl for lvl in config.sweep.levels if lvl >= 6]
        gaps = {
            lvl: sweep.mean_accuracy(lvl, "edgr") - sweep.mean_accuracy(lvl, "none")
            for lvl in high
            if {"edgr", "none"} <= set(config.sweep.policies)
        }
        clean = sweep.mean_accuracy(0, "none") if 0 in config.sweep.levels and "none" in config.sweep.policies else None
        extrap = calibration["extrapolation"] or {"mse": None, "ece": None}
        summary = {
            "extrapolation_mse": extrap["mse"],
            "extrapolation_ece": extrap["ece"],
            "interpolation_mse": calibration["interpolation"]["mse"],
            "interpolation_ece": calibration["interpolation"]["ece"],
            "clean_accuracy": clean,
            "edgr_gain_by_level": {str(k): v for k, v in gaps.items()},
            "checks": {
                "extrapolation_mse_le_0.1": extrap["mse"] is not None and extrap["mse"] <= 0.1,
                "extrapolation_ece_le_0.2": extrap["ece"] is not None and extrap["ece"] <= 0.2,
                "clean_accuracy_ge_0.97": clean is not None and clean >= 0.97,
                "edgr_gain_ge_0.1": bool(gaps) and all(v >= 0.1 for v in gaps.values()),
            },
        }
        _write_json(stage.path("reproduce_summary.json"), summary)
        _banner("Reproduction checks", [f"{k}: {'PASS' if v else 'FAIL'}" for k, v in summary["checks"].items()])


COMMANDS: Dict[str, Callable[[RunConfig, bool], None]] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval-calibration": cmd_eval_calibration,
    "train-classifier": cmd_train_classifier,
    "noise-sweep": cmd_noise_sweep,
    "infer": cmd_infer,
    "reproduce-synthetic": cmd_reproduce_synthetic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edict", description="Evidential continuous-time models for irregular time series.")
    parser.add_argument("command", choices=sorted(COMMANDS), help="Pipeline step to run.")
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration (defaults apply when omitted).")
    parser.add_argument("--seed", type=int, default=None, help="Override the run seed.")
    parser.add_argument("--out", type=str, default=None, help="Override the output directory.")
    parser.add_argument("--overwrite", action="store_true", help="Replace existing artifacts.")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity.",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config) if args.config is not None else RunConfig()
        config = config.with_overrides(seed=args.seed, out=args.out)
        COMMANDS[args.command](config, args.overwrite)
    except DECLARED_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
