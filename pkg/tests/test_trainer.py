import math
from dataclasses import replace

import numpy as np
import pytest

from edict.errors import ConfigError
from edict.ingest.series import Dataset
from edict.numerics.autograd import Tape
from edict.training.trainer import (
    HISTORY_COLUMNS,
    ClassifierConfig,
    TrainConfig,
    batch_loss,
    final_states,
    predict_proba,
    train_classifier,
    train_edict,
)

from helpers import central_difference

TINY = dict(epochs=2, hidden=6, encoder=4, head=5, batch_size=20, ode_step=0.05)


class TestBatchLoss:
    def test_zero_weights_leave_only_nll(self, small_model, toy_batch):
        loss = batch_loss(small_model, toy_batch, TrainConfig(beta1=0.0, beta2=0.0))
        assert loss.as_floats()["total"] == pytest.approx(loss.as_floats()["nll"])

    def test_batch_is_mean_of_single_series_losses(self, small_model, toy_batch):
        config = TrainConfig()
        together = batch_loss(small_model, toy_batch, config).as_floats()["total"]
        alone = [batch_loss(small_model, [s], config).as_floats()["total"] for s in toy_batch]
        assert together == pytest.approx(np.mean(alone), rel=1e-10)

    def test_series_without_observations_are_skipped(self, small_model, toy_batch):
        empty = toy_batch[0].truncate(0.0)
        config = TrainConfig()
        with_empty = batch_loss(small_model, [toy_batch[1], empty], config).as_floats()["total"]
        without = batch_loss(small_model, [toy_batch[1]], config).as_floats()["total"]
        assert with_empty == pytest.approx(without)
        with pytest.raises(ValueError, match="at least one series"):
            batch_loss(small_model, [empty], config)

    @pytest.mark.parametrize("name", ["enc.b2", "niw.nu.b1"])
    def test_gradient_matches_finite_differences(self, trainable_model, toy_batch, name):
        # the KL target is held constant, so only the KL-free objective is a plain function of the weights
        config = TrainConfig(beta1=0.0, beta2=0.05)
        param = trainable_model[name]
        with Tape() as tape:
            loss = batch_loss(trainable_model, toy_batch, config)
        tape.backward(loss.total)
        analytic = param.grad.copy()

        original = param.data.copy()

        def value(v):
            param.data = v
            out = batch_loss(trainable_model, toy_batch, config).as_floats()["total"]
            param.data = original
            return out

        np.testing.assert_allclose(analytic, central_difference(value, original), rtol=1e-4, atol=1e-7)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs, key",
        [
            ({"beta1": -1.0}, "beta1"),
            ({"epochs": 0}, "epochs"),
            ({"nll_form": "gaussian"}, "nll_form"),
            ({"t_cut": 0.0}, "t_cut"),
            ({"holdout_fraction": 1.0}, "holdout_fraction"),
            ({"adam_beta2": 1.0}, "adam_beta2"),
            ({"seed": -1}, "seed"),
        ],
    )
    def test_validation(self, kwargs, key):
        with pytest.raises(ConfigError) as err:
            TrainConfig(**kwargs)
        assert err.value.key == key

    def test_classifier_seeds_required(self):
        with pytest.raises(ConfigError) as err:
            ClassifierConfig(seeds=())
        assert err.value.key == "seeds"


class TestTrainEdict:
    def test_same_seed_same_weights(self, synthetic_splits):
        train, val, _, _ = synthetic_splits
        a = train_edict(train, val, TrainConfig(**TINY))
        b = train_edict(train, val, TrainConfig(**TINY))
        assert a.model.checksum() == b.model.checksum()
        assert list(a.history.columns) == HISTORY_COLUMNS
        assert len(a.history) == 2
        assert a.best_epoch in (1, 2)
        assert math.isfinite(a.best_val_mse)
        assert not a.model.requires_grad

    def test_without_validation_keeps_last_epoch(self, synthetic_splits):
        train, _, _, _ = synthetic_splits
        empty = Dataset([], n_features=train.n_features)
        result = train_edict(train.subset(range(10)), empty, TrainConfig(**TINY))
        assert result.best_epoch == 2
        assert math.isinf(result.best_val_mse)
        assert result.history["val_mse"].isna().all()
        assert np.isfinite(result.history["total"]).all()

    def test_empty_training_set_rejected(self, synthetic_splits):
        _, val, _, _ = synthetic_splits
        with pytest.raises(ValueError, match="non-empty"):
            train_edict(Dataset([], n_features=val.n_features), val, TrainConfig(**TINY))


class TestClassifier:
    @pytest.fixture(scope="class")
    def fitted(self, synthetic_splits):
        train, val, _, _ = synthetic_splits
        model = train_edict(train, val, TrainConfig(**TINY)).model
        result = train_classifier(model, train, val, ClassifierConfig(epochs=3, batch_size=20, seeds=(0, 1)))
        return model, result

    def test_one_head_per_seed(self, fitted):
        _, result = fitted
        assert list(result.per_seed["seed"]) == [0, 1]
        assert set(result.heads) == {0, 1}
        assert result.seed in (0, 1)
        best = result.per_seed["val_accuracy"].max()
        assert result.per_seed.set_index("seed").loc[result.seed, "val_accuracy"] == best
        assert set(result.history["seed"]) == {0, 1}

    def test_probabilities_sum_to_one(self, fitted, synthetic_splits):
        model, result = fitted
        _, _, test, _ = synthetic_splits
        proba = predict_proba(model, result.head, test)
        assert proba.shape == (len(test), result.head.n_classes)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)

    def test_final_states_shape(self, fitted, synthetic_splits):
        model, _ = fitted
        _, _, test, _ = synthetic_splits
        assert final_states(model, test).shape == (len(test), model.dims.hidden)

    def test_needs_labels(self, fitted, synthetic_splits):
        model, _ = fitted
        train, val, _, _ = synthetic_splits
        unlabeled = train.with_series([replace(s, label=None) for s in train])
        with pytest.raises(ValueError, match="labeled"):
            train_classifier(model, unlabeled, val, ClassifierConfig(epochs=1))
