"""
csv_io.py

Reads and writes irregular time series in a long CSV format.

Files in a dataset directory:
- observations.csv: series_id,time,feature_index,value  (one row per observed cell)
- labels.csv:       series_id,label                     (optional)
- static.csv:       series_id,c0,c1,...                 (optional)
- meta.json:        feature count, class count, original time range, series
                    order and normalization statistics

Times are stored in original units and min-max normalized to [0, 1] on load
(the recorded range in meta.json wins when present, so save -> load is an
identity). Rows sharing a (series, time) merge by mask union; two different
values for the same (series, time, feature) are an error.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from edict.errors import DataFormatError
from edict.ingest.series import Dataset, IrregularSeries, NormStats

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

OBSERVATION_COLUMNS = ["series_id", "time", "feature_index", "value"]
LABEL_COLUMNS = ["series_id", "label"]
FORMAT_VERSION = 1

OBSERVATIONS_FILE = "observations.csv"
LABELS_FILE = "labels.csv"
STATIC_FILE = "static.csv"
META_FILE = "meta.json"


def _ensure_columns(df: pd.DataFrame, required: List[str], path: PathLike) -> None:
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise DataFormatError(f"{path}: missing required columns {missing}. Found: {list(df.columns)}")


def _first_bad_row(bad: pd.Series) -> int:
    # +2: one for the header, one for 1-based numbering
    return int(np.flatnonzero(bad.to_numpy())[0]) + 2


def _numeric(df: pd.DataFrame, col: str, path: PathLike) -> pd.Series:
    out = pd.to_numeric(df[col], errors="coerce")
    bad = out.isna() | ~np.isfinite(out.fillna(0.0))
    if bad.any():
        row = _first_bad_row(bad)
        raise DataFormatError(f"{path}: malformed {col} at line {row}: {df[col].iloc[row - 2]!r}")
    return out.astype(np.float64)


def read_meta(path: PathLike) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _merge_duplicate_cells(obs: pd.DataFrame, path: PathLike) -> pd.DataFrame:
    """
    Collapse cells that land on the same (series, normalized time, feature).

    Distinct raw times can meet after clipping to a narrower meta time_range;
    repeated cells must agree on their value.
    """
    keys = ["series_id", "t_norm", "feature_index"]
    dup = obs.duplicated(keys, keep=False)
    if not dup.any():
        return obs
    conflicts = obs[dup].groupby(keys)["value"].nunique()
    conflicts = conflicts[conflicts > 1]
    if not conflicts.empty:
        sid, t, d = conflicts.index[0]
        same = dup & (obs["series_id"] == sid) & (obs["t_norm"] == t) & (obs["feature_index"] == d)
        raw = sorted(obs.loc[same, "time"].unique().tolist())
        raise DataFormatError(
            f"{path}: conflicting values for series {sid} at normalized time {t} (raw times {raw}), feature {d}"
        )
    return obs.drop_duplicates(keys)


def load_csv(
    observations_path: PathLike,
    labels_path: Optional[PathLike] = None,
    *,
    static_path: Optional[PathLike] = None,
    meta_path: Optional[PathLike] = None,
    n_features: Optional[int] = None,
) -> Dataset:
    """Load a long-format dataset; see the module docstring for the layout."""
    df = pd.read_csv(observations_path, dtype={"series_id": str})
    _ensure_columns(df, OBSERVATION_COLUMNS, observations_path)
    meta = read_meta(meta_path) if meta_path is not None and Path(meta_path).exists() else {}

    times = _numeric(df, "time", observations_path)
    values = _numeric(df, "value", observations_path)
    features = _numeric(df, "feature_index", observations_path)
    bad = (features < 0) | (features != np.floor(features))
    if bad.any():
        raise DataFormatError(f"{observations_path}: feature_index must be a non-negative integer (line {_first_bad_row(bad)})")
    features = features.astype(np.int64)

    D = int(n_features or meta.get("n_features") or (int(features.max()) + 1 if len(features) else 0))
    if D < 1:
        raise DataFormatError(f"{observations_path}: cannot infer the feature count from an empty file")
    too_wide = features >= D
    if too_wide.any():
        raise DataFormatError(
            f"{observations_path}: feature_index >= D={D} at line {_first_bad_row(too_wide)}"
        )

    obs = pd.DataFrame({"series_id": df["series_id"].astype(str), "time": times, "feature_index": features, "value": values})

    if "time_range" in meta:
        t_min, t_max = (float(v) for v in meta["time_range"])
    elif len(obs):
        t_min, t_max = float(obs["time"].min()), float(obs["time"].max())
    else:
        t_min, t_max = 0.0, 1.0
    span = (t_max - t_min) or 1.0
    obs["t_norm"] = ((obs["time"] - t_min) / span).clip(0.0, 1.0)
    obs = _merge_duplicate_cells(obs, observations_path)

    labels: Dict[str, int] = {}
    if labels_path is not None:
        ldf = pd.read_csv(labels_path, dtype={"series_id": str})
        _ensure_columns(ldf, LABEL_COLUMNS, labels_path)
        label_values = _numeric(ldf, "label", labels_path)
        labels = dict(zip(ldf["series_id"].astype(str), label_values.astype(np.int64).tolist()))

    statics: Dict[str, np.ndarray] = {}
    n_static = 0
    if static_path is not None:
        sdf = pd.read_csv(static_path, dtype={"series_id": str})
        _ensure_columns(sdf, ["series_id"], static_path)
        cov_cols = [c for c in sdf.columns if c != "series_id"]
        n_static = len(cov_cols)
        cov = np.column_stack([_numeric(sdf, c, static_path).to_numpy() for c in cov_cols]) if cov_cols else np.empty((len(sdf), 0))
        statics = {sid: cov[i] for i, sid in enumerate(sdf["series_id"].astype(str))}

    grouped = {sid: g for sid, g in obs.groupby("series_id", sort=False)}
    order = list(meta.get("ids") or [])
    seen = set(order)
    for sid in list(grouped) + list(labels):
        if sid not in seen:
            order.append(sid)
            seen.add(sid)

    series: List[IrregularSeries] = []
    for sid in order:
        g = grouped.get(sid)
        if g is None:
            t_unique = np.empty(0)
            vals = np.empty((0, D))
            masks = np.empty((0, D), dtype=bool)
        else:
            t_unique = np.unique(g["t_norm"].to_numpy())
            k = np.searchsorted(t_unique, g["t_norm"].to_numpy())
            d = g["feature_index"].to_numpy()
            vals = np.zeros((t_unique.size, D))
            masks = np.zeros((t_unique.size, D), dtype=bool)
            vals[k, d] = g["value"].to_numpy()
            masks[k, d] = True
        series.append(
            IrregularSeries(
                sid, t_unique, vals, masks, static=statics.get(sid) if n_static else None, label=labels.get(sid)
            )
        )

    n_classes = int(meta.get("n_classes") or (max(labels.values()) + 1 if labels else 0))
    stats = NormStats.from_dict(meta["stats"]) if meta.get("stats") else None
    logger.info("loaded %d series (D=%d) from %s", len(series), D, observations_path)
    return Dataset(
        series=series,
        n_features=D,
        n_classes=n_classes,
        stats=stats,
        time_range=(t_min, t_max),
        n_static=n_static,
        meta=dict(meta.get("meta") or {}),
    )


def load_dataset_dir(directory: PathLike) -> Dataset:
    """Load a directory written by save_csv."""
    root = Path(directory)
    obs_path = root / OBSERVATIONS_FILE
    if not obs_path.exists():
        raise FileNotFoundError(f"Missing required file: {obs_path}")
    labels = root / LABELS_FILE
    static = root / STATIC_FILE
    return load_csv(
        obs_path,
        labels if labels.exists() else None,
        static_path=static if static.exists() else None,
        meta_path=root / META_FILE,
    )


def save_csv(dataset: Dataset, directory: PathLike) -> Dict[str, Path]:
    """Write the dataset as long CSV plus the meta.json sidecar. Returns the written paths."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    t_min, t_max = dataset.time_range
    span = (t_max - t_min) or 1.0

    rows: Dict[str, list] = {c: [] for c in OBSERVATION_COLUMNS}
    for s in dataset.series:
        ks, ds = np.nonzero(s.masks)
        rows["series_id"].extend([s.id] * ks.size)
        rows["time"].extend((s.times[ks] * span + t_min).tolist())
        rows["feature_index"].extend(ds.tolist())
        rows["value"].extend(s.values[ks, ds].tolist())

    written: Dict[str, Path] = {}
    obs_path = root / OBSERVATIONS_FILE
    pd.DataFrame(rows, columns=OBSERVATION_COLUMNS).to_csv(obs_path, index=False, float_format="%.17g")
    written["observations"] = obs_path

    if dataset.is_labeled:
        labels_path = root / LABELS_FILE
        pd.DataFrame({"series_id": dataset.ids, "label": dataset.labels}).to_csv(labels_path, index=False)
        written["labels"] = labels_path

    if dataset.n_static:
        static_path = root / STATIC_FILE
        cov = np.stack([s.static for s in dataset.series])
        sdf = pd.DataFrame(cov, columns=[f"c{i}" for i in range(dataset.n_static)])
        sdf.insert(0, "series_id", dataset.ids)
        sdf.to_csv(static_path, index=False, float_format="%.17g")
        written["static"] = static_path

    meta = {
        "format_version": FORMAT_VERSION,
        "n_features": dataset.n_features,
        "n_classes": dataset.n_classes,
        "n_static": dataset.n_static,
        "time_range": [t_min, t_max],
        "ids": dataset.ids,
        "stats": dataset.stats.to_dict() if dataset.stats is not None else None,
        "meta": dataset.meta,
    }
    meta_path = root / META_FILE
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["meta"] = meta_path
    return written
