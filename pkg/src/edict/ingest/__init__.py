from edict.ingest.csv_io import load_csv, load_dataset_dir, save_csv
from edict.ingest.normalize import (
    HoldoutConfig,
    HoldoutSplit,
    feature_stats,
    holdout_observations,
    split_random,
    split_stratified,
    znormalize,
)
from edict.ingest.series import Dataset, IrregularSeries, NormStats
from edict.ingest.synthetic import generate_demo2d, generate_synthetic, inject_noise

__all__ = [
    "Dataset",
    "HoldoutConfig",
    "HoldoutSplit",
    "IrregularSeries",
    "NormStats",
    "feature_stats",
    "generate_demo2d",
    "generate_synthetic",
    "holdout_observations",
    "inject_noise",
    "load_csv",
    "load_dataset_dir",
    "save_csv",
    "split_random",
    "split_stratified",
    "znormalize",
]
