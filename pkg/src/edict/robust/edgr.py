"""
edgr.py

Uncertainty-guided reweighting of incoming observations at inference time.

Before each hidden-state update the observation is compared with the
prediction made just before it. Observed dimensions further than eta * sigma
from the predicted mean are clipped into [mu - eta * sigma, mu + eta * sigma];
everything else passes through untouched. The pass is strictly sequential:
each clipped value is what the model is updated with, and earlier corrections
are never revisited.

Policies:
- none: plain unroll + classify
- edgr: mu and sigma from the marginal predictive Student-t (sigma is the
  total predictive std, sqrt(scale * dof / (dof - 2)))
- population_mean: mu and sigma are the per-feature training-set statistics
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from edict.errors import ConfigError
from edict.ingest.series import IrregularSeries, NormStats
from edict.model.classifier import ClassifierHead
from edict.model.dynamics import EdictModel, walk
from edict.model.evidential import NIWParams, predictive_t, predictive_variance

logger = logging.getLogger(__name__)

POLICY_KINDS = ("none", "edgr", "population_mean")
DEFAULT_ETA = 1.96
INFER_BATCH = 256


@dataclass(frozen=True)
class ReweightPolicy:
    kind: str = "edgr"
    eta: float = DEFAULT_ETA
    stats: Optional[NormStats] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError("kind", f"must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not self.eta > 0:
            raise ConfigError("eta", f"must be positive, got {self.eta}")
        if (self.kind == "population_mean") != (self.stats is not None):
            raise ConfigError("stats", "population statistics are required exactly for kind='population_mean'")

    @property
    def name(self) -> str:
        return self.kind


@dataclass
class InferenceResult:
    probabilities: np.ndarray
    corrected: List[IrregularSeries]
    n_clipped: np.ndarray

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.probabilities, axis=1)


def clip_to_band(values: np.ndarray, mask: np.ndarray, center: np.ndarray, sigma: np.ndarray, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Clip observed cells outside center +- eta * sigma onto the band edge.

    Returns (values, fired) where fired marks the replaced cells; in-band and
    masked-out cells are returned unchanged.
    """
    half = eta * sigma
    fired = mask & (np.abs(values - center) > half)
    clipped = np.clip(values, center - half, center + half)
    return np.where(fired, clipped, values), fired


def _band(policy: ReweightPolicy, niw: NIWParams) -> Tuple[np.ndarray, np.ndarray]:
    if policy.kind == "population_mean":
        shape = niw.mu0.shape
        return np.broadcast_to(policy.stats.mean, shape), np.broadcast_to(policy.stats.std, shape)
    pred = predictive_t(niw)
    return pred.loc.data, np.sqrt(predictive_variance(pred))


def edgr_infer_batch(
    model: EdictModel,
    classifier: ClassifierHead,
    series: Sequence[IrregularSeries],
    policy: ReweightPolicy = ReweightPolicy(),
) -> InferenceResult:
    """Class probabilities for every series, with the policy's corrections applied on the way."""
    if classifier.hidden != model.dims.hidden:
        raise ValueError(f"classifier expects hidden width {classifier.hidden}, model has {model.dims.hidden}")
    if policy.kind == "population_mean" and policy.stats.mean.shape[0] != model.dims.n_features:
        raise ValueError("population statistics do not match the model's feature count")
    frozen = model.frozen() if model.requires_grad else model
    probabilities = np.empty((len(series), classifier.n_classes))
    corrected: List[IrregularSeries] = []
    n_clipped = np.zeros(len(series), dtype=np.int64)

    for start in range(0, len(series), INFER_BATCH):
        chunk = list(series[start:start + INFER_BATCH])
        replaced: Dict[int, List[Tuple[float, np.ndarray]]] = {}

        def _correct(t: float, rows: np.ndarray, values: np.ndarray, mask: np.ndarray, niw: NIWParams) -> np.ndarray:
            center, sigma = _band(policy, niw)
            out, fired = clip_to_band(values, mask, center, sigma, policy.eta)
            for j, row in enumerate(rows.tolist()):
                if fired[j].any():
                    replaced.setdefault(row, []).append((t, out[j]))
                    n_clipped[start + row] += int(fired[j].sum())
            return out

        correct = None if policy.kind == "none" else _correct
        h = walk(frozen, chunk, to_horizon=True, correct=correct).h.data
        probabilities[start:start + len(chunk)] = classifier.probabilities(h)

        for row, s in enumerate(chunk):
            hits = replaced.get(row)
            if not hits:
                corrected.append(s)
                continue
            values = s.values.copy()
            for t, v in hits:
                values[int(np.searchsorted(s.times, t))] = v
            corrected.append(s.with_values(values))

    if policy.kind != "none":
        logger.debug("%s clipped %d cells over %d series", policy.kind, int(n_clipped.sum()), len(series))
    return InferenceResult(probabilities=probabilities, corrected=corrected, n_clipped=n_clipped)


def edgr_infer(
    model: EdictModel,
    classifier: ClassifierHead,
    series: IrregularSeries,
    policy: ReweightPolicy = ReweightPolicy(),
) -> Tuple[np.ndarray, IrregularSeries]:
    """(class probabilities, corrected series) for a single series."""
    result = edgr_infer_batch(model, classifier, [series], policy)
    return result.probabilities[0], result.corrected[0]
