import numpy as np
import pytest

from edict.evals.classification import accuracy, auroc, macro_auroc


class TestAccuracy:
    def test_fraction_correct(self):
        assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == pytest.approx(0.75)

    def test_length_mismatch_and_empty(self):
        with pytest.raises(ValueError, match="differ in length"):
            accuracy([0, 1], [0])
        with pytest.raises(ValueError, match="empty"):
            accuracy([], [])


class TestAUROC:
    def test_hand_example(self):
        assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_perfect_and_inverted_ranking(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_ties_score_one_half(self):
        assert auroc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == pytest.approx(0.5)

    def test_invariant_under_increasing_transforms(self):
        rng = np.random.default_rng(5)
        scores = rng.uniform(size=200)
        labels = rng.integers(0, 2, size=200)
        base = auroc(scores, labels)
        assert auroc(np.exp(3.0 * scores), labels) == pytest.approx(base)
        assert auroc(np.round(scores, 1), labels) != pytest.approx(1.0)

    def test_needs_both_classes(self):
        with pytest.raises(ValueError, match="both classes"):
            auroc([0.2, 0.7], [1, 1])


class TestMacroAUROC:
    def test_binary_uses_positive_column(self):
        p1 = np.array([0.1, 0.4, 0.35, 0.8])
        probs = np.stack([1.0 - p1, p1], axis=1)
        assert macro_auroc(probs, [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_three_classes_one_vs_rest(self):
        labels = np.array([0, 1, 2, 0, 1, 2])
        probs = np.eye(3)[labels] * 0.7 + 0.1
        assert macro_auroc(probs, labels) == pytest.approx(1.0)

    def test_shape_checked(self):
        with pytest.raises(ValueError, match="do not match"):
            macro_auroc(np.full((3, 2), 0.5), [0, 1])
