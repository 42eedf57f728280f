"""
series.py

In-memory representation of irregular multivariate time series.

An IrregularSeries holds K observation times normalized to [0, 1], a (K, D)
value matrix and a (K, D) boolean presence mask. Masked-out cells hold 0.0
and are never read. A Dataset groups series that share the feature count and
carries the normalization statistics and the original time range.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class IrregularSeries:
    id: str
    times: np.ndarray
    values: np.ndarray
    masks: np.ndarray
    static: Optional[np.ndarray] = None
    label: Optional[int] = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        masks = np.asarray(self.masks, dtype=bool)
        values = np.asarray(self.values, dtype=np.float64)
        if masks.ndim != 2 or values.shape != masks.shape or masks.shape[0] != times.shape[0]:
            raise ValueError(
                f"series {self.id}: times {times.shape}, values {values.shape}, masks {masks.shape} disagree"
            )
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise ValueError(f"series {self.id}: times must be strictly increasing")
            if times[0] < 0.0 or times[-1] > 1.0:
                raise ValueError(f"series {self.id}: times must lie in [0, 1]")
            if not np.all(masks.any(axis=1)):
                raise ValueError(f"series {self.id}: every time needs at least one observed feature")
            if not np.all(np.isfinite(values[masks])):
                raise ValueError(f"series {self.id}: observed values must be finite")
        values = np.where(masks, values, 0.0)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masks", masks)
        if self.static is not None:
            object.__setattr__(self, "static", np.asarray(self.static, dtype=np.float64).reshape(-1))

    @property
    def n_features(self) -> int:
        return self.masks.shape[1]

    @property
    def n_times(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.masks.sum())

    def truncate(self, t_max: float) -> "IrregularSeries":
        """Keep observations at times <= t_max."""
        keep = self.times <= t_max
        return replace(self, times=self.times[keep], values=self.values[keep], masks=self.masks[keep])

    def with_values(self, values: np.ndarray) -> "IrregularSeries":
        return replace(self, values=values)

    def cells(self) -> Iterator[Tuple[int, int]]:
        """(time index, feature index) of every observed cell, row-major."""
        ks, ds = np.nonzero(self.masks)
        return zip(ks.tolist(), ds.tolist())


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, series: IrregularSeries) -> IrregularSeries:
        return series.with_values((series.values - self.mean) / self.std)

    def invert(self, series: IrregularSeries) -> IrregularSeries:
        return series.with_values(series.values * self.std + self.mean)

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "NormStats":
        return cls(mean=np.asarray(d["mean"], dtype=np.float64), std=np.asarray(d["std"], dtype=np.float64))


@dataclass
class Dataset:
    series: List[IrregularSeries]
    n_features: int
    n_classes: int = 0
    stats: Optional[NormStats] = None
    time_range: Tuple[float, float] = (0.0, 1.0)
    n_static: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for s in self.series:
            if s.n_features != self.n_features:
                raise ValueError(f"series {s.id} has {s.n_features} features, dataset has {self.n_features}")
            if s.label is not None and not 0 <= s.label < max(self.n_classes, 1):
                raise ValueError(f"series {s.id} label {s.label} outside [0, {self.n_classes})")
            width = 0 if s.static is None else s.static.shape[0]
            if width != self.n_static:
                raise ValueError(f"series {s.id} has {width} static covariates, dataset has {self.n_static}")

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self) -> Iterator[IrregularSeries]:
        return iter(self.series)

    def __getitem__(self, i: int) -> IrregularSeries:
        return self.series[i]

    @property
    def ids(self) -> List[str]:
        return [s.id for s in self.series]

    @property
    def is_labeled(self) -> bool:
        return bool(self.series) and all(s.label is not None for s in self.series)

    @property
    def labels(self) -> np.ndarray:
        if not self.is_labeled:
            raise ValueError("dataset has no labels")
        return np.array([s.label for s in self.series], dtype=np.int64)

    def with_series(self, series: Sequence[IrregularSeries]) -> "Dataset":
        return replace(self, series=list(series))

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return self.with_series([self.series[i] for i in indices])

    def by_id(self, series_id: str) -> IrregularSeries:
        for s in self.series:
            if s.id == series_id:
                return s
        raise KeyError(f"no series with id {series_id!r}")
