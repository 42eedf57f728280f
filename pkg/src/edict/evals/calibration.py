"""
calibration.py

Calibration and forecasting metrics for a trained model.

For every held-out target cell (series, time, feature d, value v) the model is
unrolled on the conditioning observations only, queried at the target time,
and the marginal predictive Student-t of dimension d is used for:
- coverage: is v inside the central 1 - 2*alpha interval, over a 20-level grid
- width: upper - lower of that interval
- squared error of the predictive mean mu0_d

Metrics are computed per time series and pooled; the +- band reported next to
ECE and MSE is one standard deviation over series.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from edict.ingest.normalize import HoldoutConfig, HoldoutSplit, holdout_observations
from edict.ingest.series import Dataset
from edict.model.dynamics import EdictModel, ObservationEvent, walk
from edict.model.evidential import (
    NIWParams,
    PredictiveT,
    conjugate_update,
    predictive_t,
    predictive_variance,
    t_interval,
)
from edict.numerics.autograd import Array

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MODES = ("interpolation", "extrapolation")
# 0.05, 0.10, ..., 0.95 and 0.9875 in place of 1.0
COVERAGE_LEVELS = np.append(np.round(np.arange(1, 20) * 0.05, 10), 0.9875)
PREDICTION_COLUMNS = ["loc", "scale", "dof"]
EVAL_BATCH = 256


@dataclass(frozen=True)
class CoverageCurve:
    levels: np.ndarray
    coverage: np.ndarray
    width: np.ndarray

    def __post_init__(self) -> None:
        levels = np.asarray(self.levels, dtype=np.float64)
        coverage = np.asarray(self.coverage, dtype=np.float64)
        width = np.asarray(self.width, dtype=np.float64)
        if not (levels.shape == coverage.shape == width.shape) or levels.ndim != 1:
            raise ValueError("levels, coverage and width must be 1-D arrays of equal length")
        if np.any((levels <= 0) | (levels >= 1)):
            raise ValueError("confidence levels must lie in (0, 1)")
        if np.any((coverage < 0) | (coverage > 1)):
            raise ValueError("coverage must lie in [0, 1]")
        if np.any(width < 0):
            raise ValueError("interval widths must be >= 0")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "coverage", coverage)
        object.__setattr__(self, "width", width)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"level": self.levels, "coverage": self.coverage, "width": self.width})

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "CoverageCurve":
        return cls(df["level"].to_numpy(), df["coverage"].to_numpy(), df["width"].to_numpy())


@dataclass(frozen=True)
class CalibrationReport:
    mode: str
    curve: CoverageCurve
    ece: float
    ece_std: float
    mse: float
    mse_std: float
    n_targets: int
    n_series: int
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.ece <= 1.0:
            raise ValueError(f"ece must lie in [0, 1], got {self.ece}")
        if self.mse < 0:
            raise ValueError(f"mse must be >= 0, got {self.mse}")

    def summary(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "ece": self.ece,
            "ece_std": self.ece_std,
            "mse": self.mse,
            "mse_std": self.mse_std,
            "n_targets": self.n_targets,
            "n_series": self.n_series,
            "config": self.config,
        }


@dataclass(frozen=True)
class ContractionSummary:
    """Mean predictive variance before each update and after its conjugate target."""

    before: float
    after: float
    n_events: int

    @property
    def contracts(self) -> bool:
        return self.after < self.before


# --- prediction -------------------------------------------------------------

def predict_targets(model: EdictModel, conditioning: Dataset, targets: pd.DataFrame) -> pd.DataFrame:
    """
    Attach the marginal predictive t of every target cell.

    `targets` indexes series of `conditioning` by series_index. Returns a copy of
    targets with columns loc, scale (squared scale) and dof.
    """
    out = targets.reset_index(drop=True).copy()
    if out.empty:
        for col in PREDICTION_COLUMNS:
            out[col] = np.empty(0)
        return out

    frozen = model.frozen() if model.requires_grad else model
    answers: Dict[Tuple[int, float], Tuple[np.ndarray, np.ndarray, float]] = {}
    times_by_series = out.groupby("series_index")["time"]
    indices = np.sort(out["series_index"].unique())
    for start in range(0, indices.size, EVAL_BATCH):
        chunk = indices[start:start + EVAL_BATCH].tolist()
        queries = [np.unique(times_by_series.get_group(i).to_numpy()) for i in chunk]

        def _on_query(t: float, rows: np.ndarray, niw: NIWParams, chunk=chunk) -> None:
            pred = predictive_t(niw)
            for j, row in enumerate(rows.tolist()):
                answers[(chunk[row], t)] = (pred.loc.data[j], pred.scale_diag.data[j], float(pred.dof.data[j, 0]))

        walk(frozen, [conditioning[i] for i in chunk], query_times=queries, on_query=_on_query)

    loc = np.empty(len(out))
    scale = np.empty(len(out))
    dof = np.empty(len(out))
    for n, (i, t, d) in enumerate(zip(out["series_index"], out["time"], out["feature_index"])):
        mu, s, v = answers[(int(i), float(t))]
        loc[n], scale[n], dof[n] = mu[d], s[d], v
    out["loc"], out["scale"], out["dof"] = loc, scale, dof
    return out


def _covered(predictions: pd.DataFrame, levels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(n_cells, n_levels) membership and interval width matrices."""
    pred = PredictiveT(
        loc=Array(predictions["loc"].to_numpy()[:, None]),
        scale_diag=Array(predictions["scale"].to_numpy()[:, None]),
        dof=Array(predictions["dof"].to_numpy()[:, None]),
    )
    v = predictions["value"].to_numpy()
    inside = np.empty((len(predictions), levels.size), dtype=bool)
    width = np.empty((len(predictions), levels.size))
    for j, level in enumerate(levels):
        lower, upper = t_interval(pred, (1.0 - level) / 2.0)
        inside[:, j] = (v >= lower[:, 0]) & (v <= upper[:, 0])
        width[:, j] = upper[:, 0] - lower[:, 0]
    return inside, width


def coverage_from_predictions(predictions: pd.DataFrame, levels: np.ndarray = COVERAGE_LEVELS) -> CoverageCurve:
    if predictions.empty:
        raise ValueError("coverage needs at least one target cell")
    inside, width = _covered(predictions, np.asarray(levels, dtype=np.float64))
    return CoverageCurve(levels, inside.mean(axis=0), width.mean(axis=0))


def ece(curve: CoverageCurve) -> float:
    """Unweighted mean of |coverage - nominal level| over the grid."""
    return float(np.mean(np.abs(curve.coverage - curve.levels)))


def per_series_ece(predictions: pd.DataFrame, levels: np.ndarray = COVERAGE_LEVELS) -> pd.Series:
    inside, _ = _covered(predictions, np.asarray(levels, dtype=np.float64))
    frame = pd.DataFrame(inside, columns=range(len(levels)))
    frame["series_index"] = predictions["series_index"].to_numpy()
    coverage = frame.groupby("series_index").mean()
    return (coverage - np.asarray(levels)).abs().mean(axis=1)


def mse_from_predictions(predictions: pd.DataFrame) -> Tuple[float, float, pd.Series]:
    """(mean, std) over series of the per-series mean squared error, plus the per-series values."""
    if predictions.empty:
        raise ValueError("mse needs at least one target cell")
    sq = (predictions["loc"] - predictions["value"]) ** 2
    per_series = sq.groupby(predictions["series_index"]).mean()
    return float(per_series.mean()), float(per_series.std(ddof=0)), per_series


def _predictions(model: EdictModel, split: HoldoutSplit, mode: str) -> pd.DataFrame:
    targets = split.targets(mode)
    if targets.empty:
        raise ValueError(f"no {mode} targets in the holdout split")
    return predict_targets(model, split.train, targets)


def coverage_curve(model: EdictModel, split: HoldoutSplit, mode: str) -> CoverageCurve:
    return coverage_from_predictions(_predictions(model, split, mode))


def forecast_mse(model: EdictModel, split: HoldoutSplit, mode: str) -> Tuple[float, float]:
    mean, std, _ = mse_from_predictions(_predictions(model, split, mode))
    return mean, std


def report_from_predictions(
    predictions: pd.DataFrame, mode: str, config: Optional[Dict[str, Any]] = None
) -> CalibrationReport:
    curve = coverage_from_predictions(predictions)
    mse, mse_std, per_series = mse_from_predictions(predictions)
    return CalibrationReport(
        mode=mode,
        curve=curve,
        ece=ece(curve),
        ece_std=float(per_series_ece(predictions).std(ddof=0)),
        mse=mse,
        mse_std=mse_std,
        n_targets=int(len(predictions)),
        n_series=int(per_series.size),
        config=dict(config or {}),
    )


def eval_protocol(
    model: EdictModel,
    dataset: Dataset,
    holdout: HoldoutConfig = HoldoutConfig(),
    seed: int = 0,
) -> Tuple[CalibrationReport, Optional[CalibrationReport]]:
    """
    Interpolation and extrapolation reports on one seeded holdout split of `dataset`.

    The extrapolation report is None when t_cut = 1 leaves no forecasting window.
    """
    split = holdout_observations(dataset, fraction=holdout.fraction, t_cut=holdout.t_cut, seed=seed)
    config = {"fraction": holdout.fraction, "t_cut": holdout.t_cut, "seed": seed}
    reports: List[Optional[CalibrationReport]] = []
    for mode in MODES:
        if mode == "extrapolation" and holdout.t_cut >= 1.0:
            reports.append(None)
            continue
        report = report_from_predictions(_predictions(model, split, mode), mode, config)
        logger.info(
            "%s: ece=%.4f (+-%.4f) mse=%.4f (+-%.4f) over %d cells",
            mode, report.ece, report.ece_std, report.mse, report.mse_std, report.n_targets,
        )
        reports.append(report)
    return reports[0], reports[1]


def contraction_diagnostic(model: EdictModel, dataset: Dataset) -> ContractionSummary:
    """
    Compare the predictive variance right before every update with the one
    implied by the conjugate posterior of that observation, averaged over the
    observed dimensions of every update event.
    """
    frozen = model.frozen() if model.requires_grad else model
    before: List[float] = []
    after: List[float] = []

    def _on_obs(event: ObservationEvent) -> None:
        w = event.mask.astype(np.float64)
        target = conjugate_update(event.niw_before, event.values, event.mask)
        v_before = predictive_variance(predictive_t(event.niw_before))
        v_after = predictive_variance(predictive_t(target))
        counts = w.sum(axis=1)
        before.extend(((v_before * w).sum(axis=1) / counts).tolist())
        after.extend(((v_after * w).sum(axis=1) / counts).tolist())

    series = [s for s in dataset.series if s.n_times]
    for start in range(0, len(series), EVAL_BATCH):
        walk(frozen, series[start:start + EVAL_BATCH], on_observation=_on_obs)
    if not before:
        raise ValueError("contraction diagnostic needs at least one observation")
    return ContractionSummary(before=float(np.mean(before)), after=float(np.mean(after)), n_events=len(before))


# --- report files -------------------------------------------------------------

def write_report(report: CalibrationReport, directory: PathLike) -> Dict[str, Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    csv_path = root / f"calibration_{report.mode}.csv"
    json_path = root / f"calibration_{report.mode}.json"
    report.curve.to_frame().to_csv(csv_path, index=False, float_format="%.17g")
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {f"{report.mode}_csv": csv_path, f"{report.mode}_json": json_path}


def read_report(directory: PathLike, mode: str) -> CalibrationReport:
    root = Path(directory)
    csv_path = root / f"calibration_{mode}.csv"
    json_path = root / f"calibration_{mode}.json"
    for path in (csv_path, json_path):
        if not path.exists():
            raise FileNotFoundError(f"Missing required file: {path}")
    summary = json.loads(json_path.read_text(encoding="utf-8"))
    return CalibrationReport(curve=CoverageCurve.from_frame(pd.read_csv(csv_path)), **summary)
