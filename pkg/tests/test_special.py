import math

import numpy as np
import pytest

from edict.numerics.special import digamma, lgamma, trigamma

from helpers import central_difference

EULER_GAMMA = 0.5772156649015329


class TestSpecialFunctions:
    def test_known_values(self):
        assert lgamma(1.0) == pytest.approx(0.0, abs=1e-15)
        assert lgamma(0.5) == pytest.approx(0.5 * math.log(math.pi))
        assert lgamma(5.0) == pytest.approx(math.log(24.0))
        assert digamma(1.0) == pytest.approx(-EULER_GAMMA)
        assert trigamma(1.0) == pytest.approx(math.pi ** 2 / 6.0)

    def test_digamma_is_derivative_of_lgamma(self):
        x = np.array([0.7, 1.5, 4.0, 12.0])
        numeric = np.array([central_difference(lambda v: lgamma(float(v[0])), np.array([xi]))[0] for xi in x])
        np.testing.assert_allclose(digamma(x), numeric, rtol=1e-6)

    def test_trigamma_is_derivative_of_digamma(self):
        x = np.array([0.9, 2.5, 7.0])
        numeric = np.array([central_difference(lambda v: digamma(float(v[0])), np.array([xi]))[0] for xi in x])
        np.testing.assert_allclose(trigamma(x), numeric, rtol=1e-5)

    def test_arrays_in_arrays_out(self):
        out = lgamma(np.array([1.0, 2.0, 3.0]))
        assert isinstance(out, np.ndarray)
        np.testing.assert_allclose(out, [0.0, 0.0, math.log(2.0)], atol=1e-15)

    @pytest.mark.parametrize("fn", [lgamma, digamma, trigamma])
    @pytest.mark.parametrize("bad", [0.0, -1.5, float("nan")])
    def test_rejects_non_positive_arguments(self, fn, bad):
        with pytest.raises(ValueError, match="requires x > 0"):
            fn(bad)
