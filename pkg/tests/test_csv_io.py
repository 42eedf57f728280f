import json

import numpy as np
import pytest

from edict.errors import DataFormatError
from edict.ingest.csv_io import load_csv, load_dataset_dir, save_csv
from edict.ingest.series import Dataset
from edict.ingest.synthetic import generate_synthetic

from helpers import make_series


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_long_format_pivot(self, tmp_path):
        obs = write(
            tmp_path / "obs.csv",
            "series_id,time,feature_index,value\n"
            "s1,0,0,1.5\n"
            "s1,10,1,2.5\n"
            "s1,10,0,0.5\n"
            "s2,5,1,-1.0\n",
        )
        labels = write(tmp_path / "labels.csv", "series_id,label\ns1,1\ns2,0\n")
        ds = load_csv(obs, labels)
        assert ds.n_features == 2
        assert ds.n_classes == 2
        assert ds.time_range == (0.0, 10.0)
        s1 = ds.by_id("s1")
        np.testing.assert_array_equal(s1.times, [0.0, 1.0])
        np.testing.assert_array_equal(s1.masks, [[True, False], [True, True]])
        np.testing.assert_array_equal(s1.values, [[1.5, 0.0], [0.5, 2.5]])
        assert ds.by_id("s2").label == 0

    def test_missing_columns(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,value\ns1,0,1\n")
        with pytest.raises(DataFormatError, match="missing required columns"):
            load_csv(obs)

    def test_malformed_value_cites_line(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,1,0,abc\n")
        with pytest.raises(DataFormatError, match="line 3"):
            load_csv(obs)

    def test_feature_index_beyond_declared_width(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,1,4,2\n")
        with pytest.raises(DataFormatError, match="feature_index >= D=2"):
            load_csv(obs, n_features=2)

    def test_conflicting_duplicates(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,0,0,2\n")
        with pytest.raises(DataFormatError, match="conflicting values"):
            load_csv(obs)

    def test_identical_duplicates_collapse(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,0,0,1\ns1,2,0,3\n")
        assert load_csv(obs).by_id("s1").n_cells == 2

    def test_clipped_times_with_conflicting_values(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,6,0,2\ns1,8,0,3\n")
        meta = write(tmp_path / "meta.json", json.dumps({"n_features": 1, "time_range": [0.0, 5.0]}))
        with pytest.raises(DataFormatError, match=r"conflicting values for series s1 at normalized time 1\.0 \(raw times \[6\.0, 8\.0\]\)"):
            load_csv(obs, meta_path=meta)

    def test_clipped_times_with_equal_values_merge(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns1,6,0,2\ns1,8,0,2\n")
        meta = write(tmp_path / "meta.json", json.dumps({"n_features": 1, "time_range": [0.0, 5.0]}))
        s1 = load_csv(obs, meta_path=meta).by_id("s1")
        np.testing.assert_array_equal(s1.times, [0.0, 1.0])
        np.testing.assert_array_equal(s1.values, [[1.0], [2.0]])

    def test_static_covariates(self, tmp_path):
        obs = write(tmp_path / "obs.csv", "series_id,time,feature_index,value\ns1,0,0,1\ns2,1,0,2\n")
        static = write(tmp_path / "static.csv", "series_id,c0,c1\ns1,0.5,1\ns2,-1,2\n")
        ds = load_csv(obs, static_path=static)
        assert ds.n_static == 2
        np.testing.assert_array_equal(ds.by_id("s2").static, [-1.0, 2.0])

    def test_missing_directory_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Missing required file"):
            load_dataset_dir(tmp_path)


class TestSaveCsv:
    def test_generated_dataset_survives_disk(self, tmp_path):
        ds = generate_synthetic(12, seed=5)
        written = save_csv(ds, tmp_path / "data")
        assert set(written) == {"observations", "labels", "meta"}
        back = load_dataset_dir(tmp_path / "data")
        assert back.ids == ds.ids
        np.testing.assert_array_equal(back.labels, ds.labels)
        for a, b in zip(ds, back):
            np.testing.assert_allclose(a.times, b.times, rtol=0, atol=1e-12)
            np.testing.assert_array_equal(a.masks, b.masks)
            np.testing.assert_array_equal(a.values, b.values)

    def test_meta_sidecar(self, tmp_path):
        ds = Dataset([make_series("x", [0.0, 1.0], [[1.0], [2.0]])], n_features=1, time_range=(5.0, 25.0))
        save_csv(ds, tmp_path)
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["time_range"] == [5.0, 25.0]
        assert meta["n_features"] == 1
        assert meta["ids"] == ["x"]
        assert not (tmp_path / "labels.csv").exists()
