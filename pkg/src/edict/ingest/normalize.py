"""
normalize.py

Prepares datasets for training and evaluation.

- feature_stats / znormalize: per-feature mean and std over observed training
  cells, applied to every subset
- split_stratified / split_random: seeded 70/10/20 partitions
- holdout_observations: the interpolation / extrapolation protocol. A random
  fraction of the cells before t_cut is held out for interpolation, every
  cell at or after t_cut is held out for extrapolation, and the rest is the
  conditioning data the model is allowed to see.

Nothing here fabricates values at masked-out cells.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from edict.errors import ConfigError
from edict.ingest.series import Dataset, IrregularSeries, NormStats

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
DEFAULT_T_CUT = 0.8
DEFAULT_HOLDOUT_FRACTION = 0.1
TARGET_COLUMNS = ["series_index", "series_id", "time", "feature_index", "value"]


def feature_stats(dataset: Dataset, min_count: int = 2) -> NormStats:
    """Mean and (population) std of every feature over its observed cells."""
    D = dataset.n_features
    counts = np.zeros(D)
    sums = np.zeros(D)
    for s in dataset.series:
        counts += s.masks.sum(axis=0)
        sums += s.values.sum(axis=0)
    short = np.flatnonzero(counts < min_count)
    if short.size:
        raise ValueError(f"features {short.tolist()} are observed fewer than {min_count} times in the training set")
    mean = sums / counts
    sq = np.zeros(D)
    for s in dataset.series:
        sq += (np.where(s.masks, s.values - mean, 0.0) ** 2).sum(axis=0)
    std = np.sqrt(sq / counts)
    floored = std < STD_FLOOR
    if floored.any():
        logger.warning("features %s have std below %g; flooring", np.flatnonzero(floored).tolist(), STD_FLOOR)
    return NormStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def apply_stats(dataset: Dataset, stats: NormStats) -> Dataset:
    return replace(dataset, series=[stats.apply(s) for s in dataset.series], stats=stats)


def invert_stats(dataset: Dataset) -> Dataset:
    if dataset.stats is None:
        raise ValueError("dataset carries no normalization statistics")
    return replace(dataset, series=[dataset.stats.invert(s) for s in dataset.series], stats=None)


def znormalize(train: Dataset, *others: Dataset) -> Tuple[List[Dataset], NormStats]:
    """Normalize train and every other dataset with statistics of the training set."""
    stats = feature_stats(train)
    return [apply_stats(d, stats) for d in (train, *others)], stats


def _check_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {tuple(ratios)}")
    return tuple(float(r) for r in ratios)  # type: ignore[return-value]


def _partition(indices: np.ndarray, ratios: Tuple[float, float, float], rng: np.random.Generator):
    perm = rng.permutation(indices)
    n_train = int(round(ratios[0] * perm.size))
    n_val = int(round(ratios[1] * perm.size))
    n_val = min(n_val, perm.size - n_train)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def split_stratified(
    dataset: Dataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0
) -> Tuple[Dataset, Dataset, Dataset]:
    """Seeded (train, val, test) split keeping class proportions in every subset."""
    r = _check_ratios(ratios)
    if not dataset.is_labeled:
        raise ValueError("split_stratified needs a labeled dataset")
    labels = dataset.labels
    rng = np.random.default_rng(seed)
    parts: List[List[int]] = [[], [], []]
    for c in np.unique(labels):
        for bucket, idx in zip(parts, _partition(np.flatnonzero(labels == c), r, rng)):
            bucket.extend(idx.tolist())
    return tuple(dataset.subset(sorted(p)) for p in parts)  # type: ignore[return-value]


def split_random(
    dataset: Dataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0
) -> Tuple[Dataset, Dataset, Dataset]:
    """Seeded (train, val, test) split ignoring labels."""
    r = _check_ratios(ratios)
    parts = _partition(np.arange(len(dataset)), r, np.random.default_rng(seed))
    return tuple(dataset.subset(sorted(p.tolist())) for p in parts)  # type: ignore[return-value]


@dataclass(frozen=True)
class HoldoutConfig:
    """
    fraction:
      Share of the cells before t_cut held out per series for interpolation.
    t_cut:
      Start of the forecasting window; cells at or after it are forecast
      targets. 1.0 disables extrapolation and keeps cells at t = 1.0.
    """

    fraction: float = DEFAULT_HOLDOUT_FRACTION
    t_cut: float = DEFAULT_T_CUT

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError("fraction", f"must lie in (0, 1), got {self.fraction}")
        if not 0.0 < self.t_cut <= 1.0:
            raise ConfigError("t_cut", f"must lie in (0, 1], got {self.t_cut}")


@dataclass
class HoldoutSplit:
    """Conditioning data plus the interpolation and extrapolation target cells."""

    train: Dataset
    interpolation: pd.DataFrame
    extrapolation: pd.DataFrame
    t_cut: float

    def targets(self, mode: str) -> pd.DataFrame:
        if mode == "interpolation":
            return self.interpolation
        if mode == "extrapolation":
            return self.extrapolation
        raise ValueError(f"mode must be 'interpolation' or 'extrapolation', got {mode!r}")


def _target_frame(rows: Dict[str, list]) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=TARGET_COLUMNS)
    return df.astype({"series_index": np.int64, "feature_index": np.int64, "time": np.float64, "value": np.float64})


def conditioning_window(times: np.ndarray, t_cut: float) -> np.ndarray:
    """
    Cells usable for conditioning: times strictly before t_cut.

    t_cut = 1 is the exception and keeps the closed horizon [0, 1], so a cell
    at t = 1.0 stays a conditioning cell and the forecasting window is empty.
    """
    times = np.asarray(times, dtype=np.float64)
    if t_cut >= 1.0:
        return np.ones(times.shape, dtype=bool)
    return times < t_cut


def holdout_observations(
    dataset: Dataset,
    fraction: float = DEFAULT_HOLDOUT_FRACTION,
    t_cut: float = DEFAULT_T_CUT,
    seed: int = 0,
) -> HoldoutSplit:
    """
    Partition every series' observed cells into conditioning, interpolation
    and extrapolation sets.

    Per series, floor(fraction * n_before_cut) cells before t_cut are chosen
    uniformly for interpolation. Cells at or after t_cut are extrapolation
    targets; with t_cut = 1 the forecasting window is empty and cells at
    t = 1.0 stay in conditioning (see conditioning_window).
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if not 0.0 < t_cut <= 1.0:
        raise ValueError(f"t_cut must lie in (0, 1], got {t_cut}")
    rng = np.random.default_rng(seed)
    interp: Dict[str, list] = {c: [] for c in TARGET_COLUMNS}
    extrap: Dict[str, list] = {c: [] for c in TARGET_COLUMNS}
    kept: List[IrregularSeries] = []

    def _add(rows: Dict[str, list], i: int, s: IrregularSeries, ks: np.ndarray, ds: np.ndarray) -> None:
        rows["series_index"].extend([i] * ks.size)
        rows["series_id"].extend([s.id] * ks.size)
        rows["time"].extend(s.times[ks].tolist())
        rows["feature_index"].extend(ds.tolist())
        rows["value"].extend(s.values[ks, ds].tolist())

    for i, s in enumerate(dataset.series):
        before = conditioning_window(s.times, t_cut)
        ks, ds = np.nonzero(s.masks & before[:, None])
        n_hold = int(math.floor(fraction * ks.size))
        held = np.sort(rng.choice(ks.size, size=n_hold, replace=False)) if n_hold else np.empty(0, dtype=np.int64)
        _add(interp, i, s, ks[held], ds[held])

        ke, de = np.nonzero(s.masks & ~before[:, None])
        _add(extrap, i, s, ke, de)

        train_mask = s.masks & before[:, None]
        train_mask[ks[held], ds[held]] = False
        rows = train_mask.any(axis=1)
        kept.append(replace(s, times=s.times[rows], values=s.values[rows], masks=train_mask[rows]))

    return HoldoutSplit(
        train=dataset.with_series(kept),
        interpolation=_target_frame(interp),
        extrapolation=_target_frame(extrap),
        t_cut=t_cut,
    )
