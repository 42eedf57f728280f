import numpy as np
import pytest

from edict.ingest.synthetic import (
    INITIAL_WINDOW,
    KEEP_FRACTION,
    N_GRID,
    generate_demo2d,
    generate_synthetic,
    inject_noise,
    noise_scale,
    synthetic_dense,
)


class TestGenerateSynthetic:
    def test_seeded(self):
        a = generate_synthetic(20, seed=1)
        b = generate_synthetic(20, seed=1)
        c = generate_synthetic(20, seed=2)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.values, y.values)
            np.testing.assert_array_equal(x.masks, y.masks)
        assert any(not np.array_equal(x.values, z.values) for x, z in zip(a, c))

    def test_sparsity_and_initial_window(self):
        ds = generate_synthetic(50, seed=0)
        assert ds.n_features == 3
        for s in ds:
            assert s.n_cells <= KEEP_FRACTION * N_GRID * 3
            assert (s.times < INITIAL_WINDOW).any()

    def test_balanced_labels(self):
        labels = generate_synthetic(41, seed=0).labels
        assert abs(int(labels.sum()) - 20) <= 1

    def test_dense_latents_are_separable(self):
        """The mean gap between features 1 and 2 decides the class on dense signals."""
        _, signals, labels = synthetic_dense(200, seed=4)
        gap = signals[:, :, 0].mean(axis=1) - signals[:, :, 1].mean(axis=1)
        np.testing.assert_array_equal((gap < 0).astype(int), labels)

    def test_distractor_follows_uninformative_feature(self):
        _, signals, labels = synthetic_dense(50, seed=2)
        for x, y in zip(signals, labels):
            source = x[:, 1] if y == 0 else x[:, 0]
            assert np.abs(x[:, 2] - source).mean() < 0.2

    def test_keep_fraction_bounds(self):
        with pytest.raises(ValueError, match="keep_fraction"):
            generate_synthetic(5, keep_fraction=0.5)
        with pytest.raises(ValueError, match="at least one series"):
            generate_synthetic(0)


class TestGenerateDemo2d:
    def test_anticorrelated_and_unlabeled(self):
        ds = generate_demo2d(30, seed=0)
        assert ds.n_features == 2
        assert not ds.is_labeled
        for s in ds:
            both = s.masks.all(axis=1)
            np.testing.assert_allclose(s.values[both, 1], -s.values[both, 0])


class TestInjectNoise:
    def test_level_zero_is_identity(self):
        ds = generate_synthetic(5, seed=0)
        assert inject_noise(ds, 0, seed=3) is ds

    def test_masks_untouched_and_seeded(self):
        ds = generate_synthetic(8, seed=0)
        a = inject_noise(ds, 5, seed=1)
        b = inject_noise(ds, 5, seed=1)
        for clean, x, y in zip(ds, a, b):
            np.testing.assert_array_equal(x.masks, clean.masks)
            np.testing.assert_array_equal(x.values, y.values)
            assert np.all(x.values[~x.masks] == 0.0)

    def test_scale_grows_with_time(self):
        np.testing.assert_allclose(noise_scale(9, np.array([0.0, 0.5, 1.0])), [0.1, 0.3, 0.9])
        np.testing.assert_allclose(noise_scale(1, np.array([0.0, 1.0])), [0.1, 0.1])

    def test_empirical_noise_std(self):
        ds = generate_synthetic(300, seed=0)
        noisy = inject_noise(ds, 9, seed=0)
        late = np.concatenate([(n.values - c.values)[c.masks & (c.times >= 0.9)[:, None]] for c, n in zip(ds, noisy)])
        assert late.std() == pytest.approx(0.1 * 9 ** 0.95, rel=0.1)

    @pytest.mark.parametrize("level", [-1, 10, 2.5])
    def test_invalid_levels(self, level):
        with pytest.raises(ValueError, match="noise level"):
            inject_noise(generate_synthetic(2, seed=0), level)
