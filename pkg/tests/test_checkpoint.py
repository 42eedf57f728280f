import json

import numpy as np
import pytest

from edict.ingest.series import NormStats
from edict.model.classifier import ClassifierHead
from edict.training.checkpoint import load_classifier, load_model, save_classifier, save_model


@pytest.fixture
def stats():
    return NormStats(mean=np.array([0.1, -0.2, 1.0 / 3.0]), std=np.array([1.0, 2.5, 1e-8]))


class TestModelCheckpoint:
    def test_round_trip_preserves_weights_and_stats(self, tmp_path, small_model, stats):
        path = save_model(tmp_path / "edict.json", small_model, config={"epochs": 2}, stats=stats)
        loaded = load_model(path)
        assert loaded.params.checksum() == small_model.checksum()
        assert loaded.params.dims == small_model.dims
        assert loaded.config == {"epochs": 2}
        np.testing.assert_array_equal(loaded.stats.mean, stats.mean)
        np.testing.assert_array_equal(loaded.stats.std, stats.std)
        assert not loaded.params.requires_grad

    def test_refuses_to_overwrite(self, tmp_path, small_model):
        path = save_model(tmp_path / "edict.json", small_model)
        with pytest.raises(FileExistsError, match="Refusing to overwrite"):
            save_model(path, small_model)
        save_model(path, small_model, overwrite=True)

    def test_tampered_parameters_fail_checksum(self, tmp_path, small_model):
        path = save_model(tmp_path / "edict.json", small_model)
        payload = json.loads(path.read_text())
        payload["parameters"]["init.b"]["data"][0] += 1e-3
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="checksum"):
            load_model(path)

    def test_kind_and_version_checked(self, tmp_path, small_model):
        path = save_model(tmp_path / "edict.json", small_model)
        with pytest.raises(ValueError, match="expected a classifier checkpoint"):
            load_classifier(path)
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="format_version"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Missing required file"):
            load_model(tmp_path / "absent.json")


def test_classifier_round_trip(tmp_path):
    head = ClassifierHead.initialize(6, 3, seed=4, width=5)
    loaded = load_classifier(save_classifier(tmp_path / "clf.json", head, config={"seed": 4})).params
    assert (loaded.hidden, loaded.n_classes, loaded.width) == (6, 3, 5)
    assert loaded.checksum() == head.checksum()
    h = np.random.default_rng(0).normal(size=(4, 6))
    np.testing.assert_array_equal(loaded.probabilities(h), head.probabilities(h))
