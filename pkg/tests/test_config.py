import json

import pytest

from edict.config import RunConfig, config_from_dict, parse_config, write_config
from edict.errors import ConfigError


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return path


class TestParse:
    def test_minimal_file_gives_defaults(self, tmp_path):
        config = parse_config(write_json(tmp_path / "run.json", {"format_version": 1}))
        assert config == RunConfig()
        assert config.checkpoint_path.name == "edict.json"
        assert config.classifier_path.parent == config.out_dir

    def test_sections_are_typed(self):
        config = config_from_dict(
            {
                "format_version": 1,
                "seed": 4,
                "dataset": {"n_series": 30, "split": [0.6, 0.2, 0.2]},
                "train": {"epochs": 3, "beta2": 0},
                "classifier": {"seeds": [5, 6]},
                "sweep": {"levels": [0, 9], "policies": ["none"]},
            }
        )
        assert config.seed == 4
        assert config.dataset.split == (0.6, 0.2, 0.2)
        assert config.train.epochs == 3
        assert isinstance(config.train.beta2, float)
        assert config.classifier.seeds == (5, 6)
        assert config.sweep.policies == ("none",)

    def test_format_version_required(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"seed": 0})
        assert err.value.key == "format_version"
        with pytest.raises(ConfigError) as err:
            config_from_dict({"format_version": 2})
        assert err.value.key == "format_version"

    @pytest.mark.parametrize(
        "raw, key",
        [
            ({"train": {"foo": 1}}, "train.foo"),
            ({"bogus": 1}, "bogus"),
            ({"train": {"epochs": "3"}}, "train.epochs"),
            ({"train": {"epochs": 2.5}}, "train.epochs"),
            ({"train": {"train_before_cut": 1}}, "train.train_before_cut"),
            ({"train": {"beta1": -1}}, "train.beta1"),
            ({"train": {"adam_beta1": 1.5}}, "train.adam_beta1"),
            ({"dataset": {"source": "csv"}}, "dataset.path"),
            ({"dataset": {"split": [0.5, 0.5]}}, "dataset.split"),
            ({"holdout": {"t_cut": 0}}, "holdout.t_cut"),
            ({"sweep": {"levels": [12]}}, "sweep.levels"),
            ({"sweep": {"levels": ["a"]}}, "sweep.levels[0]"),
            ({"infer": {"policy": "median"}}, "infer.policy"),
            ({"classifier": []}, "classifier"),
            ({"seed": -1}, "seed"),
            ({"train": {"seed": -3}}, "train.seed"),
            ({"classifier": {"seeds": [0, -2]}}, "classifier.seeds"),
            ({"sweep": {"seeds": [-1]}}, "sweep.seeds"),
            ({"infer": {"noise_seed": -5}}, "infer.noise_seed"),
        ],
    )
    def test_errors_name_the_dotted_key(self, raw, key):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"format_version": 1, **raw})
        assert err.value.key == key
        assert str(err.value).startswith(f"{key}: ")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{format_version: 1")
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        assert err.value.key == "<root>"

    def test_top_level_must_be_an_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            config_from_dict([1, 2])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_config(tmp_path / "absent.json")


class TestWrite:
    def test_written_config_parses_back_equal(self, tmp_path):
        config = config_from_dict(
            {"format_version": 1, "seed": 9, "out": str(tmp_path / "run"), "train": {"hidden": 7}}
        )
        assert parse_config(write_config(config, tmp_path / "echo.json")) == config

    def test_overrides(self):
        config = RunConfig().with_overrides(seed=3, out="elsewhere")
        assert config.seed == 3
        assert str(config.out_dir) == "elsewhere"
        assert RunConfig().with_overrides() == RunConfig()

    def test_negative_seed_override_rejected(self):
        with pytest.raises(ConfigError) as err:
            RunConfig().with_overrides(seed=-4)
        assert err.value.key == "seed"
