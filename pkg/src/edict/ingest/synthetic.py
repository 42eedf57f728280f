"""
synthetic.py

Seeded generators for irregular time series, plus the heteroskedastic noise
injector used by the robustness experiments.

Generators:
- generate_synthetic: 3 periodic features, binary label. The informative
  feature is feature 1 (class 0) or feature 2 (class 1); feature 3 is a
  distractor copying the uninformative feature plus jitter.
- generate_demo2d: 2 anti-correlated periodic signals with decaying amplitude.

Both sample a dense 100-point grid on [0, 1] and then mask out at least 75%
of the (time, feature) cells, keeping at least one cell in the initial window.

Everything is deterministic given the seed: signals and masks are drawn from
separate streams so the dense latents can be regenerated on their own.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Tuple

import numpy as np

from edict.ingest.series import Dataset, IrregularSeries

logger = logging.getLogger(__name__)

N_GRID = 100
KEEP_FRACTION = 0.25
INITIAL_WINDOW = 0.1
AMPLITUDE = 0.5
MEAN_OFFSET = 1.0
DISTRACTOR_JITTER = 0.1
FREQ_RANGE = (1.0, 3.0)
MAX_NOISE_LEVEL = 9


def _check_count(n: int) -> None:
    if n < 1:
        raise ValueError(f"need at least one series, got n={n}")


def _sparsify(
    rng: np.random.Generator, grid: np.ndarray, dense: np.ndarray, keep_fraction: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Keep floor(keep_fraction * cells) random cells of a dense (T, D) signal.

    At least one kept cell lies in the initial window; rows with no kept cell
    are dropped. Returns (times, values, masks).
    """
    T, D = dense.shape
    n_keep = max(1, int(math.floor(keep_fraction * T * D)))
    flat = rng.choice(T * D, size=n_keep, replace=False)
    mask = np.zeros(T * D, dtype=bool)
    mask[flat] = True
    mask = mask.reshape(T, D)

    window = grid < INITIAL_WINDOW
    if not mask[window].any():
        kept = np.flatnonzero(mask)
        drop = kept[rng.integers(kept.size)]
        window_cells = np.flatnonzero(np.repeat(window, D))
        add = window_cells[rng.integers(window_cells.size)]
        mask.reshape(-1)[drop] = False
        mask.reshape(-1)[add] = True

    rows = mask.any(axis=1)
    return grid[rows], np.where(mask, dense, 0.0)[rows], mask[rows]


def synthetic_dense(n: int, seed: int, n_grid: int = N_GRID) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense latents of the 3-feature task: (grid, signals (n, n_grid, 3), labels)."""
    _check_count(n)
    rng = np.random.default_rng([seed, 0])
    grid = np.linspace(0.0, 1.0, n_grid)
    labels = rng.permutation(np.array([0] * math.ceil(n / 2) + [1] * (n // 2), dtype=np.int64))

    signals = np.empty((n, n_grid, 3))
    for i, y in enumerate(labels):
        omega = rng.uniform(*FREQ_RANGE, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
        means = (MEAN_OFFSET, -MEAN_OFFSET) if y == 0 else (-MEAN_OFFSET, MEAN_OFFSET)
        f1 = means[0] + AMPLITUDE * np.sin(2.0 * np.pi * omega[0] * grid + phase[0])
        f2 = means[1] + AMPLITUDE * np.sin(2.0 * np.pi * omega[1] * grid + phase[1])
        uninformative = f2 if y == 0 else f1
        f3 = uninformative + rng.normal(0.0, DISTRACTOR_JITTER, size=n_grid)
        signals[i] = np.stack([f1, f2, f3], axis=1)
    return grid, signals, labels


def generate_synthetic(n: int = 10_000, seed: int = 0, keep_fraction: float = KEEP_FRACTION) -> Dataset:
    """Sparse 3-feature binary classification dataset."""
    if not 0.0 < keep_fraction <= KEEP_FRACTION:
        raise ValueError(f"keep_fraction must lie in (0, {KEEP_FRACTION}], got {keep_fraction}")
    grid, signals, labels = synthetic_dense(n, seed)
    rng = np.random.default_rng([seed, 1])
    series = []
    for i in range(n):
        times, values, masks = _sparsify(rng, grid, signals[i], keep_fraction)
        series.append(IrregularSeries(f"syn-{i:05d}", times, values, masks, label=int(labels[i])))
    logger.info("generated %d synthetic series (seed=%d)", n, seed)
    return Dataset(series=series, n_features=3, n_classes=2, meta={"source": "synthetic", "seed": seed})


def generate_demo2d(n: int = 1_000, seed: int = 0, keep_fraction: float = KEEP_FRACTION) -> Dataset:
    """Unlabeled 2-feature dataset with x2(t) = -x1(t) and x1(t) = e^-t sin(2 pi w t + phi)."""
    _check_count(n)
    signal_rng = np.random.default_rng([seed, 0])
    mask_rng = np.random.default_rng([seed, 1])
    grid = np.linspace(0.0, 1.0, N_GRID)
    series = []
    for i in range(n):
        omega = signal_rng.uniform(*FREQ_RANGE)
        phase = signal_rng.uniform(0.0, 2.0 * np.pi)
        x1 = np.exp(-grid) * np.sin(2.0 * np.pi * omega * grid + phase)
        dense = np.stack([x1, -x1], axis=1)
        times, values, masks = _sparsify(mask_rng, grid, dense, keep_fraction)
        series.append(IrregularSeries(f"demo-{i:05d}", times, values, masks))
    logger.info("generated %d demo2d series (seed=%d)", n, seed)
    return Dataset(series=series, n_features=2, meta={"source": "demo2d", "seed": seed})


def noise_scale(level: int, times: np.ndarray) -> np.ndarray:
    """Standard deviation 0.1 * level ** t of the injected noise at normalized times t."""
    return 0.1 * float(level) ** np.asarray(times, dtype=np.float64)


def inject_noise(dataset: Dataset, level: int, seed: int = 0) -> Dataset:
    """
    Add zero-mean Gaussian noise with std 0.1 * level ** t to every observed cell.

    Level 0 is the clean baseline and returns the dataset unchanged. Masks are
    never touched.
    """
    if int(level) != level or not 0 <= level <= MAX_NOISE_LEVEL:
        raise ValueError(f"noise level must be an integer in [0, {MAX_NOISE_LEVEL}], got {level}")
    if level == 0:
        return dataset
    rng = np.random.default_rng([seed, int(level)])
    noisy = []
    for s in dataset.series:
        scale = noise_scale(level, s.times)[:, None]
        draws = rng.normal(0.0, 1.0, size=s.values.shape) * scale
        noisy.append(s.with_values(np.where(s.masks, s.values + draws, 0.0)))
    return replace(dataset, series=noisy)
