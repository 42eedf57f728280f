import numpy as np
import pytest

from edict.ingest.series import Dataset, IrregularSeries, NormStats

from helpers import make_series


class TestIrregularSeries:
    def test_masked_cells_are_zeroed(self):
        s = make_series("a", [0.1, 0.5], [[1.0, 9.0], [2.0, 3.0]], [[True, False], [True, True]])
        assert s.values[0, 1] == 0.0
        assert s.n_cells == 3
        assert list(s.cells()) == [(0, 0), (1, 0), (1, 1)]

    def test_times_strictly_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            make_series("a", [0.5, 0.5], [[1.0], [2.0]])

    def test_times_in_unit_interval(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            make_series("a", [0.5, 1.2], [[1.0], [2.0]])

    def test_every_time_needs_an_observation(self):
        with pytest.raises(ValueError, match="at least one observed"):
            make_series("a", [0.1, 0.2], [[1.0], [2.0]], [[True], [False]])

    def test_observed_values_must_be_finite(self):
        with pytest.raises(ValueError, match="finite"):
            make_series("a", [0.1], [[np.nan]])

    def test_truncate_keeps_times_up_to_cut(self):
        s = make_series("a", [0.1, 0.4, 0.8], [[1.0], [2.0], [3.0]])
        cut = s.truncate(0.4)
        np.testing.assert_array_equal(cut.times, [0.1, 0.4])
        assert cut.n_times == 2

    def test_empty_series_allowed(self):
        s = IrregularSeries("empty", np.empty(0), np.empty((0, 2)), np.empty((0, 2), dtype=bool))
        assert s.n_times == 0
        assert s.n_features == 2


class TestDataset:
    def test_feature_count_checked(self):
        with pytest.raises(ValueError, match="features"):
            Dataset([make_series("a", [0.1], [[1.0, 2.0]])], n_features=3)

    def test_label_range_checked(self):
        with pytest.raises(ValueError, match="label 2"):
            Dataset([make_series("a", [0.1], [[1.0]], label=2)], n_features=1, n_classes=2)

    def test_labels_and_lookup(self):
        ds = Dataset(
            [make_series("a", [0.1], [[1.0]], label=0), make_series("b", [0.2], [[2.0]], label=1)],
            n_features=1,
            n_classes=2,
        )
        assert ds.is_labeled
        np.testing.assert_array_equal(ds.labels, [0, 1])
        assert ds.by_id("b").times[0] == 0.2
        with pytest.raises(KeyError):
            ds.by_id("zzz")
        assert ds.subset([1]).ids == ["b"]

    def test_unlabeled_labels_raise(self):
        ds = Dataset([make_series("a", [0.1], [[1.0]])], n_features=1)
        assert not ds.is_labeled
        with pytest.raises(ValueError, match="no labels"):
            ds.labels


class TestNormStats:
    def test_apply_then_invert(self):
        stats = NormStats(mean=np.array([1.0, -2.0]), std=np.array([2.0, 0.5]))
        s = make_series("a", [0.1, 0.3], [[3.0, -2.0], [1.0, 0.0]], [[True, True], [True, False]])
        z = stats.apply(s)
        np.testing.assert_allclose(z.values, [[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(stats.invert(z).values, s.values)

    def test_dict_form(self):
        stats = NormStats(mean=np.array([1.0]), std=np.array([3.0]))
        back = NormStats.from_dict(stats.to_dict())
        np.testing.assert_array_equal(back.mean, stats.mean)
        np.testing.assert_array_equal(back.std, stats.std)
