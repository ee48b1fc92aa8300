import math

import numpy as np
import pytest

from wfr_smc.metrics import (MetricReport, MmdEvaluator, mmd_gaussian,
                             mmd_squared_gaussian, moment_mse, w1_marginal,
                             w1_marginal_average)


def uniform(n):
    return np.full(n, 1.0 / n)


class TestMmd:
    def test_identical_clouds_zero(self, rng):
        x = rng.standard_normal((50, 2))
        assert mmd_squared_gaussian(x, uniform(50), x) == 0.0
        assert mmd_gaussian(x, uniform(50), x) == 0.0

    def test_two_distant_atoms_approach_two(self):
        # closed form for two Diracs: mmd^2 = 2 (1 - exp(-||z||^2 / 2)) -> 2
        for z in (5.0, 20.0, 100.0):
            m2 = mmd_squared_gaussian(np.array([[0.0]]), uniform(1),
                                      np.array([[z]]))
            assert m2 == pytest.approx(2 * (1 - math.exp(-z * z / 2)), rel=1e-12)
        assert m2 == pytest.approx(2.0, rel=1e-12)

    def test_reference_permutation_invariant(self, rng):
        x = rng.standard_normal((30, 2))
        y = rng.standard_normal((70, 2))
        w = rng.dirichlet(np.ones(30))
        a = mmd_squared_gaussian(x, w, y)
        b = mmd_squared_gaussian(x, w, rng.permutation(y))
        assert a == pytest.approx(b, rel=1e-12)

    def test_monotone_along_interpolation_path(self, rng):
        # moving a cloud linearly onto the reference atoms shrinks the
        # discrepancy along a 10-point path
        y = rng.standard_normal((40, 2))
        x0 = y + rng.standard_normal((40, 2)) * 3.0
        evaluator = MmdEvaluator(y)
        values = []
        for step in np.linspace(0.0, 1.0, 10):
            x = (1 - step) * x0 + step * y
            values.append(evaluator.mmd_squared(x, uniform(40)))
        assert np.all(np.diff(values) <= 1e-9)
        assert values[-1] == 0.0

    def test_weighted_equals_replicated_atoms(self):
        # weight 2/3 on an atom equals duplicating it in an unweighted cloud
        x = np.array([[0.0], [1.0]])
        w = np.array([2 / 3, 1 / 3])
        ref = np.array([[0.5], [2.0], [-1.0]])
        dup = np.array([[0.0], [0.0], [1.0]])
        assert mmd_squared_gaussian(x, w, ref) == pytest.approx(
            mmd_squared_gaussian(dup, uniform(3), ref), rel=1e-12)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            MmdEvaluator(np.empty((0, 1)))


class TestW1Marginal:
    def test_identical_zero(self, rng):
        x = rng.standard_normal((20, 1))
        assert w1_marginal(x, uniform(20), x) == pytest.approx(0.0, abs=1e-14)

    def test_two_diracs(self):
        a, b = -1.5, 2.5
        assert w1_marginal(np.array([[a]]), uniform(1),
                           np.array([[b]])) == pytest.approx(abs(a - b))

    def test_shifted_atom_half_epsilon(self):
        # {0, 1} uniform vs {0, 1 + eps} uniform differs by eps on the upper
        # half of the quantile range
        eps = 0.25
        value = w1_marginal(np.array([[0.0], [1.0]]), uniform(2),
                            np.array([[0.0], [1.0 + eps]]))
        assert value == pytest.approx(eps / 2, rel=1e-12)

    def test_triangle_inequality(self, rng):
        for _ in range(25):
            a = rng.standard_normal((8, 1))
            b = rng.standard_normal((13, 1)) + rng.uniform(-2, 2)
            c = rng.standard_normal((5, 1)) * 2
            dab = w1_marginal(a, uniform(8), b)
            dbc = w1_marginal(b, uniform(13), c)
            dac = w1_marginal(a, uniform(8), c)
            assert dac <= dab + dbc + 1e-10

    def test_average_over_axes(self, rng):
        x = rng.standard_normal((30, 2))
        y = rng.standard_normal((40, 2))
        w = uniform(30)
        expected = 0.5 * (w1_marginal(x, w, y, 0) + w1_marginal(x, w, y, 1))
        assert w1_marginal_average(x, w, y) == pytest.approx(expected, rel=1e-13)

    def test_bad_axis_rejected(self, rng):
        x = rng.standard_normal((5, 2))
        with pytest.raises(ValueError):
            w1_marginal(x, uniform(5), x, axis=2)


class TestMomentMse:
    def test_constructed_match_is_zero(self):
        # two symmetric atoms match mean 0 and variance 1 exactly
        x = np.array([[-1.0], [1.0]])
        mse_mean, mse_cov = moment_mse(x, uniform(2), [0.0], [[1.0]])
        assert mse_mean == pytest.approx(0.0, abs=1e-15)
        assert mse_cov == pytest.approx(0.0, abs=1e-15)

    def test_translation_changes_mean_error_only(self, rng):
        x = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
        true_mean = np.zeros(2)
        true_cov = (x.T @ x) / 4
        v = np.array([0.3, -0.4])
        mse_mean, mse_cov = moment_mse(x + v, uniform(4), true_mean, true_cov)
        assert mse_mean == pytest.approx(np.sum(v ** 2) / 2, rel=1e-12)
        assert mse_cov == pytest.approx(0.0, abs=1e-15)

    def test_permutation_invariant(self, rng):
        x = rng.standard_normal((25, 2))
        w = rng.dirichlet(np.ones(25))
        perm = rng.permutation(25)
        a = moment_mse(x, w, np.zeros(2), np.eye(2))
        b = moment_mse(x[perm], w[perm], np.zeros(2), np.eye(2))
        assert a == pytest.approx(b, rel=1e-12)

    def test_single_particle_covariance_rejected(self):
        with pytest.raises(ValueError):
            moment_mse(np.array([[1.0]]), uniform(1), [0.0], [[1.0]])


class TestMetricReport:
    def test_row_matches_columns(self):
        report = MetricReport(3, 0.5, 0.9, 0.01, 0.1, 0.001, 0.002)
        assert len(report.as_row()) == len(MetricReport.CSV_COLUMNS)
        assert report.as_row()[0] == 3
