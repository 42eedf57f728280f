import json
import shutil

import pytest

from edict import cli
from edict.cli import Staging, main
from edict.config import RunConfig

TINY_RUN = {
    "format_version": 1,
    "seed": 0,
    "dataset": {"n_series": 30},
    "train": {"epochs": 1, "hidden": 6, "encoder": 4, "head": 5, "batch_size": 15, "ode_step": 0.05},
    "classifier": {"epochs": 2, "batch_size": 15, "seeds": [0]},
    "sweep": {"levels": [0, 3], "policies": ["none", "edgr"], "seeds": [0]},
    "infer": {"noise_level": 5},
}


def write_config(directory, **changes):
    directory.mkdir(parents=True, exist_ok=True)
    payload = json.loads(json.dumps(TINY_RUN))
    payload["out"] = str(directory / "run")
    for section, value in changes.items():
        if isinstance(value, dict):
            payload.setdefault(section, {}).update(value)
        else:
            payload[section] = value
    path = directory / "run.json"
    path.write_text(json.dumps(payload))
    return path


def run(*argv):
    return main([*argv, "--log-level", "WARNING"])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """A run directory after train, eval-calibration, train-classifier, noise-sweep and infer."""
    config = write_config(tmp_path_factory.mktemp("pipeline"))
    codes = {
        cmd: run(cmd, "--config", str(config))
        for cmd in ("train", "eval-calibration", "train-classifier", "noise-sweep", "infer")
    }
    return config, config.parent / "run", codes


class TestGenerate:
    def test_writes_data_and_manifest(self, tmp_path):
        config = write_config(tmp_path)
        assert run("generate", "--config", str(config)) == 0
        out = tmp_path / "run"
        assert {p.name for p in (out / "data").iterdir()} == {"observations.csv", "labels.csv", "meta.json"}
        manifest = json.loads((out / "generate.manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert "data/observations.csv" in manifest["artifacts"]
        assert json.loads((out / "generate.config.json").read_text())["seed"] == 0
        assert not [p for p in out.iterdir() if p.name.startswith(".generate-")]

    def test_refuses_to_overwrite(self, tmp_path, capsys):
        config = write_config(tmp_path)
        assert run("generate", "--config", str(config)) == 0
        assert run("generate", "--config", str(config)) == 1
        assert "Refusing to overwrite" in capsys.readouterr().err
        assert run("generate", "--config", str(config), "--overwrite") == 0

    def test_same_seed_same_bytes(self, tmp_path):
        config = write_config(tmp_path)
        for out in ("a", "b"):
            assert run("generate", "--config", str(config), "--out", str(tmp_path / out)) == 0
        assert run("generate", "--config", str(config), "--out", str(tmp_path / "c"), "--seed", "1") == 0

        def data_hashes(out):
            artifacts = json.loads((tmp_path / out / "generate.manifest.json").read_text())["artifacts"]
            return {k: v for k, v in artifacts.items() if k.startswith("data/")}

        assert data_hashes("a") == data_hashes("b")
        assert data_hashes("a") != data_hashes("c")

    def test_csv_source_cannot_be_generated(self, tmp_path, capsys):
        config = write_config(tmp_path, dataset={"source": "csv", "path": str(tmp_path)})
        assert run("generate", "--config", str(config)) == 1
        assert "dataset.source" in capsys.readouterr().err


class TestPipeline:
    def test_every_step_succeeds(self, trained):
        _, _, codes = trained
        assert codes == {cmd: 0 for cmd in codes}

    def test_artifacts(self, trained):
        _, out, _ = trained
        for name in (
            "edict.json",
            "loss_log.csv",
            "calibration_interpolation.csv",
            "calibration_extrapolation.json",
            "contraction.json",
            "classifier.json",
            "classifier_report.json",
            "noise_sweep.csv",
            "inference.json",
            "noise-sweep.manifest.json",
        ):
            assert (out / name).is_file(), name

    def test_inference_payload(self, trained):
        _, out, _ = trained
        payload = json.loads((out / "inference.json").read_text())
        assert payload["policy"] == "edgr"
        assert payload["noise_level"] == 5
        assert sum(payload["probabilities"]) == pytest.approx(1.0)
        assert payload["predicted_class"] in (0, 1)

    def test_unknown_series_id(self, trained, capsys):
        config, _, _ = trained
        raw = json.loads(config.read_text())
        raw["infer"]["series_id"] = "missing"
        alt = config.parent / "missing.json"
        alt.write_text(json.dumps(raw))
        assert run("infer", "--config", str(alt), "--overwrite") == 1
        assert "missing" in capsys.readouterr().err

    def test_feature_count_mismatch(self, trained, capsys):
        config, _, _ = trained
        raw = json.loads(config.read_text())
        raw["dataset"]["source"] = "demo2d"
        alt = config.parent / "demo.json"
        alt.write_text(json.dumps(raw))
        assert run("eval-calibration", "--config", str(alt), "--overwrite") == 1
        assert "D=3" in capsys.readouterr().err


class TestErrors:
    def test_missing_checkpoint(self, tmp_path, capsys):
        assert run("eval-calibration", "--config", str(write_config(tmp_path))) == 1
        assert "Missing required file" in capsys.readouterr().err

    def test_bad_config_key(self, tmp_path, capsys):
        assert run("train", "--config", str(write_config(tmp_path, train={"foo": 1}))) == 1
        assert "train.foo" in capsys.readouterr().err

    def test_negative_seed(self, tmp_path):
        assert run("generate", "--config", str(write_config(tmp_path)), "--seed", "-1") == 1

    def test_unknown_command_is_a_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main(["explode"])
        assert err.value.code == 2


class TestStaging:
    def test_target_outside_run_directory(self, tmp_path):
        config = RunConfig(out=str(tmp_path / "run"))
        elsewhere = tmp_path / "models" / "edict.json"
        with Staging("demo", config, overwrite=False) as staging:
            staging.declare("edict.json", elsewhere)
            staging.path("edict.json").write_text("{}")
        assert elsewhere.read_text() == "{}"
        assert sorted(p.name for p in elsewhere.parent.iterdir()) == ["edict.json"]
        assert sorted(p.name for p in (tmp_path / "run").iterdir()) == ["demo.config.json", "demo.manifest.json"]

    def test_failed_move_leaves_targets_untouched(self, tmp_path, monkeypatch):
        config = RunConfig(out=str(tmp_path / "run"))
        (tmp_path / "run").mkdir()
        (tmp_path / "run" / "a.txt").write_text("old")
        real_move = shutil.move

        def failing_move(src, dst):
            if src.endswith("b.txt"):
                raise OSError("Invalid cross-device link")
            return real_move(src, dst)

        monkeypatch.setattr(cli.shutil, "move", failing_move)
        with pytest.raises(OSError, match="cross-device"):
            with Staging("demo", config, overwrite=True) as staging:
                staging.declare("a.txt")
                staging.declare("b.txt")
                staging.path("a.txt").write_text("new")
                staging.path("b.txt").write_text("b")
        assert sorted(p.name for p in (tmp_path / "run").iterdir()) == ["a.txt"]
        assert (tmp_path / "run" / "a.txt").read_text() == "old"
