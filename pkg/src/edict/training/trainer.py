"""
trainer.py

Training loops.

train_edict fits the unsupervised model. For every observation of a
mini-batch of series it accumulates

    nll(pre-update NIW, x) + beta1 * KL(conjugate target || post-update NIW)
                           + beta2 * reg(pre-update NIW, x)

averages per series over its observations, then over series, and takes one
Adam step per batch. The parameters with the best validation interpolation
MSE are returned.

train_classifier fits one classifier head per seed on frozen final hidden
states h(T) and keeps the head with the best validation accuracy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from edict.errors import ConfigError
from edict.evals.calibration import mse_from_predictions, predict_targets
from edict.evals.classification import accuracy
from edict.ingest.normalize import holdout_observations
from edict.ingest.series import Dataset, IrregularSeries
from edict.model.classifier import ClassifierHead, cross_entropy
from edict.model.dynamics import EdictModel, ModelDims, ObservationEvent, predict_niw, walk
from edict.model.evidential import (
    NLL_FORMS,
    LossBreakdown,
    conjugate_update,
    evidential_reg,
    niw_kl,
    nll,
    total_loss,
)
from edict.numerics import autograd as ag
from edict.numerics.autograd import Array, Tape
from edict.training.optim import AdamConfig, OptimizerState, step_parameters

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "nll", "kl", "reg", "total", "val_mse"]
FEATURE_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of train_edict.

    beta1 / beta2:
      Weights of the KL and evidential-regularizer terms.
    nll_form:
      "boxed" or "exact_t" (see edict.model.evidential.nll).
    holdout_fraction / t_cut:
      Validation holdout used for checkpoint selection, and the conditioning
      window when train_before_cut is set.
    """

    beta1: float = 1.0
    beta2: float = 0.01
    learning_rate: float = 1e-3
    batch_size: int = 100
    epochs: int = 40
    seed: int = 0
    clip_norm: float = 10.0
    ode_step: float = 0.01
    hidden: int = 50
    encoder: int = 25
    head: int = 25
    nll_form: str = "boxed"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    holdout_fraction: float = 0.1
    t_cut: float = 0.8
    train_before_cut: bool = False

    def __post_init__(self) -> None:
        for name in ("beta1", "beta2"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")
        for name in ("batch_size", "epochs", "hidden", "encoder", "head"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if not self.ode_step > 0:
            raise ConfigError("ode_step", f"must be positive, got {self.ode_step}")
        if self.nll_form not in NLL_FORMS:
            raise ConfigError("nll_form", f"must be one of {NLL_FORMS}, got {self.nll_form!r}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction", f"must lie in (0, 1), got {self.holdout_fraction}")
        if not 0.0 < self.t_cut <= 1.0:
            raise ConfigError("t_cut", f"must lie in (0, 1], got {self.t_cut}")
        self.adam()

    def adam(self) -> AdamConfig:
        return AdamConfig(
            learning_rate=self.learning_rate,
            beta1=self.adam_beta1,
            beta2=self.adam_beta2,
            eps=self.adam_eps,
            clip_norm=self.clip_norm,
        )

    def dims(self, n_features: int, n_static: int = 0) -> ModelDims:
        return ModelDims(
            n_features=n_features,
            hidden=self.hidden,
            encoder=self.encoder,
            head=self.head,
            n_static=n_static,
            ode_step=self.ode_step,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ClassifierConfig:
    learning_rate: float = 1e-3
    batch_size: int = 100
    epochs: int = 200
    seeds: Tuple[int, ...] = (0, 1, 2)
    clip_norm: float = 10.0
    width: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("seeds", "needs at least one seed")
        if min(self.seeds) < 0:
            raise ConfigError("seeds", f"must all be >= 0, got {list(self.seeds)}")
        for name in ("batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.width is not None and self.width < 1:
            raise ConfigError("width", f"must be >= 1, got {self.width}")
        self.adam()

    def adam(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.learning_rate, clip_norm=self.clip_norm)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


@dataclass
class TrainResult:
    model: EdictModel
    history: pd.DataFrame
    best_epoch: int
    best_val_mse: float


@dataclass
class ClassifierResult:
    head: ClassifierHead
    seed: int
    per_seed: pd.DataFrame
    heads: Dict[int, ClassifierHead] = field(default_factory=dict)
    history: pd.DataFrame = field(default_factory=pd.DataFrame)


# --- unsupervised objective ---------------------------------------------------

def _scatter(values: Array, rows: np.ndarray, batch: int) -> Array:
    """Place per-event values (R,) at their batch rows, giving (B, 1)."""
    onehot = np.zeros((batch, rows.size))
    onehot[rows, np.arange(rows.size)] = 1.0
    return Array(onehot) @ ag.reshape(values, (rows.size, 1))


def batch_loss(model: EdictModel, batch: Sequence[IrregularSeries], config: TrainConfig) -> LossBreakdown:
    """
    Mean over series of the per-series mean observation loss.

    Series without observations are ignored; a batch with none raises.
    """
    series = [s for s in batch if s.n_times]
    if not series:
        raise ValueError("batch_loss needs at least one series with observations")
    B = len(series)
    terms: Dict[str, List[Array]] = {"nll": [], "kl": [], "reg": []}

    def _on_obs(event: ObservationEvent) -> None:
        post = predict_niw(model, event.state_after)
        target = conjugate_update(event.niw_before, event.values, event.mask)
        terms["nll"].append(_scatter(nll(event.niw_before, event.values, event.mask, config.nll_form), event.rows, B))
        terms["kl"].append(_scatter(niw_kl(target, post, event.mask), event.rows, B))
        terms["reg"].append(_scatter(evidential_reg(event.niw_before, event.values, event.mask), event.rows, B))

    walk(model, series, on_observation=_on_obs)

    counts = np.array([s.n_times for s in series], dtype=np.float64)[:, None]
    weights = 1.0 / (counts * B)

    def _mean(parts: List[Array]) -> Array:
        acc = parts[0]
        for p in parts[1:]:
            acc = acc + p
        return (acc * weights).sum()

    return total_loss(_mean(terms["nll"]), _mean(terms["kl"]), _mean(terms["reg"]), config.beta1, config.beta2)


def validation_mse(model: EdictModel, val: Dataset, config: TrainConfig) -> Optional[float]:
    """Interpolation MSE on a seeded holdout of `val`; None when there are no targets."""
    if not len(val):
        return None
    split = holdout_observations(val, fraction=config.holdout_fraction, t_cut=config.t_cut, seed=config.seed)
    if split.interpolation.empty:
        return None
    mean, _, _ = mse_from_predictions(predict_targets(model, split.train, split.interpolation))
    return mean


def train_edict(train: Dataset, val: Dataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    if not len(train):
        raise ValueError("train_edict needs a non-empty training set")
    if config.train_before_cut:
        train = holdout_observations(
            train, fraction=config.holdout_fraction, t_cut=config.t_cut, seed=config.seed
        ).train
    usable = [s for s in train.series if s.n_times]
    if not usable:
        raise ValueError("train_edict needs at least one training series with observations")

    model = EdictModel.initialize(config.dims(train.n_features, train.n_static), seed=config.seed)
    adam = config.adam()
    state = OptimizerState.zeros_like(model.state_dict())
    rng = np.random.default_rng([config.seed, 1])

    rows: List[Dict[str, float]] = []
    best_state = model.state_dict()
    best_epoch, best_mse = 0, math.inf
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(usable))
        sums = {"nll": 0.0, "kl": 0.0, "reg": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, order.size, config.batch_size):
            batch = [usable[i] for i in order[start:start + config.batch_size]]
            with Tape() as tape:
                loss = batch_loss(model, batch, config)
            tape.backward(loss.total)
            state = step_parameters(model, state, adam)
            values = loss.as_floats()
            for k in sums:
                sums[k] += values[k]
            n_batches += 1
            logger.debug("epoch %d batch %d: total=%.5f", epoch, n_batches, values["total"])

        means = {k: v / n_batches for k, v in sums.items()}
        val_mse = validation_mse(model, val, config)
        rows.append({"epoch": epoch, **means, "val_mse": np.nan if val_mse is None else val_mse})
        logger.info(
            "epoch %d: nll=%.4f kl=%.4f reg=%.4f total=%.4f val_mse=%s",
            epoch, means["nll"], means["kl"], means["reg"], means["total"],
            "n/a" if val_mse is None else f"{val_mse:.5f}",
        )
        if val_mse is None:
            best_state, best_epoch = model.state_dict(), epoch
        elif val_mse < best_mse:
            best_state, best_epoch, best_mse = model.state_dict(), epoch, val_mse

    if math.isinf(best_mse):
        logger.warning("no validation interpolation targets; keeping the last epoch")
    model.load_state_dict(best_state)
    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    return TrainResult(model=model.frozen(), history=history, best_epoch=best_epoch, best_val_mse=best_mse)


# --- downstream classifier ------------------------------------------------------

def final_states(model: EdictModel, dataset: Dataset) -> np.ndarray:
    """h(T) of every series (unrolled to the horizon), shape (N, H)."""
    frozen = model.frozen() if model.requires_grad else model
    out = np.empty((len(dataset), model.dims.hidden))
    for start in range(0, len(dataset), FEATURE_BATCH):
        chunk = dataset.series[start:start + FEATURE_BATCH]
        out[start:start + len(chunk)] = walk(frozen, chunk, to_horizon=True).h.data
    return out


def _fit_head(
    features: np.ndarray,
    labels: np.ndarray,
    val_features: np.ndarray,
    val_labels: np.ndarray,
    n_classes: int,
    seed: int,
    config: ClassifierConfig,
) -> Tuple[ClassifierHead, float, List[Dict[str, float]]]:
    head = ClassifierHead.initialize(features.shape[1], n_classes, seed=seed, width=config.width)
    adam = config.adam()
    state = OptimizerState.zeros_like(head.state_dict())
    rng = np.random.default_rng([seed, 2])
    best_state, best_acc = head.state_dict(), -1.0
    log: List[Dict[str, float]] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(labels.size)
        total, n_batches = 0.0, 0
        for start in range(0, order.size, config.batch_size):
            idx = order[start:start + config.batch_size]
            with Tape() as tape:
                loss = cross_entropy(head.logits(features[idx]), labels[idx])
            tape.backward(loss)
            state = step_parameters(head, state, adam)
            total += loss.item()
            n_batches += 1
        val_acc = accuracy(np.argmax(head.logits(val_features).data, axis=1), val_labels)
        log.append({"seed": seed, "epoch": epoch, "loss": total / n_batches, "val_accuracy": val_acc})
        if val_acc > best_acc:
            best_state, best_acc = head.state_dict(), val_acc
    head.load_state_dict(best_state)
    return head.frozen(), best_acc, log


def train_classifier(
    model: EdictModel, train: Dataset, val: Dataset, config: ClassifierConfig = ClassifierConfig()
) -> ClassifierResult:
    """Heads on frozen h(T), one per seed; the best validation accuracy wins (ties go to the earlier seed)."""
    if not (train.is_labeled and val.is_labeled):
        raise ValueError("train_classifier needs labeled train and validation sets")
    n_classes = max(train.n_classes, val.n_classes, int(train.labels.max()) + 1)
    features = final_states(model, train)
    val_features = final_states(model, val)

    heads: Dict[int, ClassifierHead] = {}
    per_seed: List[Dict[str, float]] = []
    history: List[Dict[str, float]] = []
    for seed in config.seeds:
        head, val_acc, log = _fit_head(features, train.labels, val_features, val.labels, n_classes, seed, config)
        heads[seed] = head
        per_seed.append({"seed": seed, "val_accuracy": val_acc})
        history.extend(log)
        logger.info("classifier seed %d: best val accuracy %.4f", seed, val_acc)

    table = pd.DataFrame(per_seed, columns=["seed", "val_accuracy"])
    best_seed = int(table.loc[table["val_accuracy"].idxmax(), "seed"])
    return ClassifierResult(
        head=heads[best_seed],
        seed=best_seed,
        per_seed=table,
        heads=heads,
        history=pd.DataFrame(history, columns=["seed", "epoch", "loss", "val_accuracy"]),
    )


def predict_proba(model: EdictModel, head: ClassifierHead, dataset: Dataset) -> np.ndarray:
    return head.probabilities(final_states(model, dataset))
