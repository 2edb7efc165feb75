import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest
from hypothesis import given, settings, strategies as st

from robustarch.numerics import (
    RngStream,
    chi2_survival,
    interquartile_range,
    ols,
    standard_normal_draws,
)


class TestRng:
    def test_replay_is_identical(self):
        a = standard_normal_draws(RngStream(123, 4), 5)
        b = standard_normal_draws(RngStream(123, 4), 5)
        assert_array_equal(a, b)

    def test_moments(self):
        x = standard_normal_draws(RngStream(2024, 0), 100_000)
        assert abs(x.mean()) < 0.02
        assert abs(x.var() - 1.0) < 0.02

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            standard_normal_draws(RngStream(1), 0)

    def test_streams_differ(self):
        a = standard_normal_draws(RngStream(7, 0), 50)
        b = standard_normal_draws(RngStream(7, 1), 50)
        assert not np.array_equal(a, b)

    def test_interleaving_does_not_change_streams(self):
        ref_a = standard_normal_draws(RngStream(9, 1), 40)
        ref_b = standard_normal_draws(RngStream(9, 2), 40)
        ga, gb = RngStream(9, 1).generator(), RngStream(9, 2).generator()
        parts_a, parts_b = [], []
        for _ in range(4):
            parts_a.append(standard_normal_draws(ga, 10))
            parts_b.append(standard_normal_draws(gb, 10))
        assert_array_equal(np.concatenate(parts_a), ref_a)
        assert_array_equal(np.concatenate(parts_b), ref_b)

    def test_distinct_streams_uncorrelated(self):
        a = standard_normal_draws(RngStream(5, 10), 20_000)
        b = standard_normal_draws(RngStream(5, 11), 20_000)
        # |corr| for independent streams is ~ N(0, 1/n); 4 sd bound
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)

    def test_tuple_stream_ids(self):
        a = standard_normal_draws(RngStream(5, (3, 1)), 8)
        b = standard_normal_draws(RngStream(5, (3, 2)), 8)
        assert not np.array_equal(a, b)
        assert_array_equal(a, standard_normal_draws(RngStream(5, (3, 1)), 8))


class TestOls:
    def test_exact_fit(self):
        rs = np.random.default_rng(0)
        x = np.column_stack([np.ones(30), rs.standard_normal((30, 2))])
        y = x @ np.array([1.0, -2.0, 0.5])
        sol = ols(x, y)
        assert np.max(np.abs(sol.residuals)) < 1e-10
        assert sol.r_squared == pytest.approx(1.0)

    def test_intercept_only(self):
        y = np.array([1.0, 4.0, 2.0, 7.0, 3.0])
        sol = ols(np.ones((5, 1)), y)
        assert_allclose(sol.fitted, np.full(5, y.mean()))
        assert sol.r_squared == pytest.approx(0.0, abs=1e-15)

    def test_normal_equations_oracle(self):
        rs = np.random.default_rng(11)
        x = np.column_stack([np.ones(20), rs.standard_normal((20, 2))])
        y = rs.standard_normal(20)
        expected = np.linalg.inv(x.T @ x) @ x.T @ y
        assert_allclose(ols(x, y).coefficients, expected, atol=1e-8)

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            ols(np.ones((5, 2)), np.ones(4))
        with pytest.raises(ValueError):
            ols(np.ones((3, 3)), np.ones(3))

    def test_rank_deficient_min_norm(self):
        x = np.column_stack([np.ones(10), np.ones(10)])
        y = np.arange(10.0)
        sol = ols(x, y)
        assert sol.rank_deficient
        assert_allclose(sol.coefficients, [y.mean() / 2, y.mean() / 2])

    def test_orthogonality_random_instances(self):
        rs = np.random.default_rng(123)
        for _ in range(100):
            k = int(rs.integers(1, 7))
            n = int(rs.integers(k + 1, 51))
            x = np.column_stack([np.ones(n), rs.standard_normal((n, k - 1))]) if k > 1 else np.ones((n, 1))
            y = rs.standard_normal(n) * 3 + 1
            sol = ols(x, y)
            assert_allclose(sol.fitted + sol.residuals, y, atol=1e-12)
            inner = x.T @ sol.residuals
            bound = 1e-10 * np.linalg.norm(x, axis=0) * np.linalg.norm(y)
            assert np.all(np.abs(inner) <= bound)
            sst = np.sum((y - y.mean()) ** 2)
            assert sol.r_squared == pytest.approx(1 - sol.ssr / sst, abs=1e-12)


class TestChi2:
    @pytest.mark.parametrize("df", [1, 2, 5, 10])
    def test_zero(self, df):
        assert chi2_survival(0.0, df) == 1.0

    def test_reference_points(self, chi2_oracle):
        # frozen from the quadrature oracle in conftest
        assert chi2_survival(3.841, 1) == pytest.approx(0.050013683763956686, abs=1e-10)
        assert chi2_survival(5.991, 2) == pytest.approx(0.050011615026579095, abs=1e-10)
        assert abs(chi2_survival(3.841, 1) - 0.05) < 1e-4
        assert abs(chi2_survival(5.991, 2) - 0.05) < 1e-4

    def test_grid_against_quadrature(self, chi2_oracle):
        for df in range(1, 11):
            prev = 1.0
            for x in np.round(np.arange(0.1, 20.0 + 1e-9, 0.1), 10):
                v = chi2_survival(x, df)
                assert abs(v - chi2_oracle(x, df)) < 1e-8
                assert v <= prev
                prev = v

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            chi2_survival(-0.1, 1)
        with pytest.raises(ValueError):
            chi2_survival(1.0, 0)


class TestIqr:
    def test_hand_value(self):
        assert interquartile_range([1, 2, 3, 4, 5]) == 2.0

    def test_constant(self):
        assert interquartile_range(np.full(9, 3.3)) == 0.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            interquartile_range([1, 2, 3])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_permutation_invariant(self, xs):
        assert interquartile_range(xs) == interquartile_range(xs[::-1])
        assert interquartile_range(xs) == interquartile_range(sorted(xs))
