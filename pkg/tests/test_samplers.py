import math

import numpy as np
import pytest

from wfr_smc.gaussian_flows import GaussianState, evolve
from wfr_smc.particles import ParticleSystem, RngStream
from wfr_smc.samplers import (SamplerConfig, SamplerDivergenceError,
                              iterate_ula, mirror_descent_gaussian,
                              run_smc_wfr, run_tempered_smc_wfr,
                              run_tempered_ula, run_tempering_smc, run_ula,
                              run_unit_fr_smc, rwm_sweep, tempered_ula_step,
                              tempered_wfr_log_weight, ula_step,
                              wfr_log_weight)
from wfr_smc.schedules import constant_one, exponential, linear_horizon
from wfr_smc.targets import gauss1d


class ZeroNoise:
    """Test double: a generator whose normal draws are all zero."""

    def standard_normal(self, shape):
        return np.zeros(shape)


class ScriptedRng:
    """Test double with programmed normal and uniform draws."""

    def __init__(self, normals, uniforms):
        self.normals = np.asarray(normals, dtype=float)
        self.uniforms = np.asarray(uniforms, dtype=float)

    def standard_normal(self, shape):
        return np.broadcast_to(self.normals, shape).copy()

    def random(self, n):
        return self.uniforms[:n].copy()


def cloud(values):
    return ParticleSystem.uniform(np.asarray(values, dtype=float))


class TestUlaStep:
    def test_drift_toward_standard_normal_mode(self):
        ps = cloud([1.0])
        moved, drift = ula_step(ps, gauss1d(0, 1), 0.1, ZeroNoise())
        assert drift[0, 0] == pytest.approx(0.9)
        assert moved.positions[0, 0] == pytest.approx(0.9)

    def test_fixed_point_at_mode(self):
        ps = cloud([3.0])
        moved, _ = ula_step(ps, gauss1d(3.0, 0.5), 0.2, ZeroNoise())
        assert moved.positions[0, 0] == pytest.approx(3.0)

    def test_vanishing_step_is_identity(self):
        ps = cloud([1.7])
        moved, _ = ula_step(ps, gauss1d(0, 1), 1e-12, ZeroNoise())
        assert moved.positions[0, 0] == pytest.approx(1.7, abs=1e-10)

    def test_weights_unchanged(self, rng):
        ps = ParticleSystem(rng.standard_normal((10, 1)), rng.standard_normal(10))
        moved, _ = ula_step(ps, gauss1d(0, 1), 0.1, rng)
        np.testing.assert_array_equal(moved.log_weights, ps.log_weights)


class TestTemperedUlaStep:
    def test_endpoint_matches_plain_step(self, rng):
        ps = ParticleSystem.uniform(rng.standard_normal((20, 1)))
        mu0, pi = gauss1d(0, 1), gauss1d(4, 1)
        a, _ = ula_step(ps, pi, 0.1, RngStream(5))
        b, _ = tempered_ula_step(ps, mu0, pi, 1.0, 0.1, RngStream(5))
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_zero_lambda_drifts_to_initial(self):
        moved, _ = tempered_ula_step(cloud([2.0]), gauss1d(0, 1), gauss1d(9, 1),
                                     0.0, 0.1, ZeroNoise())
        assert moved.positions[0, 0] == pytest.approx(1.8)

    def test_half_lambda_convex_drift(self):
        # hand evaluation: 0 + 0.1 (0.5 * 0 + 0.5 * 4) = 0.2
        moved, _ = tempered_ula_step(cloud([0.0]), gauss1d(0, 1), gauss1d(4, 1),
                                     0.5, 0.1, ZeroNoise())
        assert moved.positions[0, 0] == pytest.approx(0.2)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError):
            tempered_ula_step(cloud([0.0]), gauss1d(0, 1), gauss1d(1, 1),
                              1.5, 0.1, ZeroNoise())


class TestWfrLogWeight:
    def test_single_drift_point_value(self):
        # direct evaluation of both densities: pi peaked at 0 (value 0 by
        # convention), denominator N(0; 0, 2 gamma)
        gamma = 0.1
        value = wfr_log_weight(np.array([0.0]), np.array([[0.0]]),
                               gauss1d(0, 1), gamma)
        expected = (1 - math.exp(-gamma)) * (
            0.0 + 0.5 * math.log(2 * math.pi * 2 * gamma))
        assert value == pytest.approx(expected, rel=1e-12)

    def test_constant_rescaling_shifts_all_weights_equally(self, rng):
        drift = rng.standard_normal((20, 1))
        points = rng.standard_normal((20, 1))
        base = wfr_log_weight(points, drift, gauss1d(0, 1), 0.1)

        class Shifted:
            dim = 1

            def log_density(self, x):
                return np.atleast_1d(gauss1d(0, 1).log_density(x)) + 7.3

        shifted = wfr_log_weight(points, drift, Shifted(), 0.1)
        delta = 1 - math.exp(-0.1)
        np.testing.assert_allclose(shifted - base, delta * 7.3, rtol=1e-12)

    def test_reflection_symmetry(self):
        drift = np.array([[0.7], [-0.7]])
        target = gauss1d(0, 1)
        for x in (0.0, 0.4, 2.0):
            a = wfr_log_weight(np.array([x]), drift, target, 0.1)
            b = wfr_log_weight(np.array([-x]), drift, target, 0.1)
            assert a == pytest.approx(b, rel=1e-12)

    def test_empty_drift_rejected(self):
        with pytest.raises(ValueError):
            wfr_log_weight(np.array([0.0]), np.empty((0, 1)), gauss1d(0, 1), 0.1)

    def test_nonpositive_gamma_rejected(self):
        with pytest.raises(ValueError):
            tempered_wfr_log_weight(np.array([0.0]), np.array([[0.0]]),
                                    gauss1d(0, 1), 0.0, 0.0)


class TestTemperedWfrLogWeight:
    def test_constant_schedule_matches_untempered(self, rng):
        gamma = 0.2
        drift = rng.standard_normal((15, 1))
        points = rng.standard_normal((8, 1))
        delta = constant_one().fr_window_exponent(0.4, gamma)
        a = tempered_wfr_log_weight(points, drift, gauss1d(0, 1), gamma, delta)
        b = wfr_log_weight(points, drift, gauss1d(0, 1), gamma)
        np.testing.assert_array_equal(a, b)

    def test_zero_schedule_gives_zero_weights(self, rng):
        gamma = 0.2
        delta = exponential(0.0).fr_window_exponent(1.0, gamma)
        values = tempered_wfr_log_weight(rng.standard_normal((5, 1)),
                                         rng.standard_normal((5, 1)),
                                         gauss1d(0, 1), gamma, delta)
        np.testing.assert_allclose(values, 0.0, atol=1e-15)

    def test_delta_outside_range_rejected(self):
        with pytest.raises(ValueError):
            tempered_wfr_log_weight(np.array([0.0]), np.array([[0.0]]),
                                    gauss1d(0, 1), 0.1, 0.5)


class TestMirrorDescentGaussian:
    MU = GaussianState([0.0], [[1.0]])
    PI = GaussianState([2.0], [[0.5]])

    def test_zero_step_returns_mu(self):
        out = mirror_descent_gaussian(self.MU, self.PI, 0.0)
        np.testing.assert_array_equal(out.mean, self.MU.mean)

    def test_full_step_returns_pi(self):
        out = mirror_descent_gaussian(self.MU, self.PI, 1.0)
        np.testing.assert_array_equal(out.cov, self.PI.cov)

    def test_half_step_complete_the_square(self):
        # precision 0.5 * 1 + 0.5 * 2 = 1.5, mean (2/3)(0.5 * 0 + 0.5 * 4) = 4/3
        out = mirror_descent_gaussian(self.MU, self.PI, 0.5)
        assert out.cov[0, 0] == pytest.approx(2 / 3, rel=1e-12)
        assert out.mean[0] == pytest.approx(4 / 3, rel=1e-12)

    def test_delta_out_of_range(self):
        with pytest.raises(ValueError):
            mirror_descent_gaussian(self.MU, self.PI, 1.2)


class TestRwmSweep:
    def test_uphill_always_accepted(self):
        # proposal with higher density accepted regardless of the uniform
        positions = np.array([[3.0]])
        scripted = ScriptedRng(normals=[-1.0], uniforms=[1.0 - 1e-12])
        out = rwm_sweep(positions, gauss1d(0, 1).log_density, 1.0, scripted)
        assert out[0, 0] == pytest.approx(2.0)

    def test_downhill_accepted_iff_log_uniform_below_ratio(self):
        target = gauss1d(0, 1)
        positions = np.zeros((1, 1))
        log_ratio = float(target.log_density([1.0]))  # = -0.5
        for u, expect_move in ((math.exp(log_ratio) * 0.999, True),
                               (math.exp(log_ratio) * 1.001, False)):
            scripted = ScriptedRng(normals=[1.0], uniforms=[u])
            out = rwm_sweep(positions, target.log_density, 1.0, scripted)
            assert (out[0, 0] != 0.0) == expect_move

    def test_invariance_for_gaussian(self):
        # long chain from stationarity keeps mean near 0
        gen = RngStream(42).generator()
        x = gen.standard_normal((500, 1))
        for _ in range(50):
            x = rwm_sweep(x, gauss1d(0, 1).log_density, 0.8, gen)
        assert abs(x.mean()) < 3 * x.std() / math.sqrt(500 / 10)  # crude IACT 10


def stationary_config(n=500, t=100, gamma=0.1):
    return SamplerConfig(n_particles=n, n_iterations=t, gamma=gamma)


class TestRunSmcWfr:
    def test_stationary_case_keeps_ess_high(self):
        # pi = mu0: weights stay near uniform; checked over 10 seeds
        target = gauss1d(0, 1)
        for seed in range(10):
            traj = run_smc_wfr(stationary_config(), target, target,
                               RngStream(seed))
            ess = np.array([ps.ess() / ps.n_particles for ps in traj[1:]])
            assert ess.min() >= 0.5

    def test_single_particle_rejected(self):
        with pytest.raises(ValueError):
            run_smc_wfr(SamplerConfig(1, 10, 0.1), gauss1d(0, 1), gauss1d(0, 1),
                        RngStream(0))

    def test_seed_determinism(self):
        cfg = SamplerConfig(64, 20, 0.05)
        a = run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(3, 0.5), RngStream(9))
        b = run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(3, 0.5), RngStream(9))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.positions, y.positions)
            np.testing.assert_array_equal(x.log_weights, y.log_weights)

    def test_tracks_moment_oracle_at_fine_step(self):
        # at gamma = 0.01 the time-discretisation bias is well inside the
        # replicate spread (contrast with gamma = 0.05, where the Langevin
        # half-step bias dominates).  Replicate-level standard errors are
        # used because resampling genealogies correlate particles, so the
        # naive sqrt(var / ESS) within one run understates the spread.
        gamma, n_seeds = 0.01, 6
        checkpoints = (1.0, 2.0)
        cfg = SamplerConfig(n_particles=800, n_iterations=200, gamma=gamma)
        oracle = {t: evolve("wfr", GaussianState([0.0], [[1.0]]),
                            GaussianState([20.0], [[0.1]]), [t])[0]
                  for t in checkpoints}
        means = {t: [] for t in checkpoints}
        variances = {t: [] for t in checkpoints}
        for seed in range(n_seeds):
            traj = run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(20, 0.1),
                               RngStream(seed))
            for t in checkpoints:
                ps = traj[int(round(t / gamma))]
                w = ps.normalized_weights()
                mean = float(w @ ps.positions[:, 0])
                means[t].append(mean)
                variances[t].append(float(w @ (ps.positions[:, 0] - mean) ** 2))
        for t in checkpoints:
            ref = oracle[t]
            for est, truth in ((means[t], ref.mean[0]),
                               (variances[t], ref.cov[0, 0])):
                arr = np.asarray(est)
                se = arr.std(ddof=1) / math.sqrt(n_seeds)
                assert abs(arr.mean() - truth) < 3 * se + 0.01

    def test_weight_collapse_aborts_with_iteration(self):
        cfg = SamplerConfig(n_particles=5, n_iterations=50, gamma=1e-4)
        with pytest.raises(SamplerDivergenceError) as excinfo:
            run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(0, 1e-8), RngStream(0))
        assert excinfo.value.iteration >= 3


class TestEndpointConsistency:
    def test_tempered_smc_wfr_with_constant_schedule(self):
        cfg = SamplerConfig(64, 25, 0.05)
        tempered_cfg = SamplerConfig(64, 25, 0.05, schedule=constant_one())
        mu0, pi = gauss1d(0, 1), gauss1d(5, 0.5)
        plain = run_smc_wfr(cfg, mu0, pi, RngStream(3))
        tempered = run_tempered_smc_wfr(tempered_cfg, mu0, pi, RngStream(3))
        for x, y in zip(plain, tempered):
            np.testing.assert_array_equal(x.positions, y.positions)
            np.testing.assert_array_equal(x.log_weights, y.log_weights)

    def test_tempered_ula_with_constant_schedule(self):
        cfg = SamplerConfig(64, 25, 0.05)
        tempered_cfg = SamplerConfig(64, 25, 0.05, schedule=constant_one())
        mu0, pi = gauss1d(0, 1), gauss1d(5, 0.5)
        plain = run_ula(cfg, pi, RngStream(3), mu0)
        tempered = run_tempered_ula(tempered_cfg, mu0, pi, RngStream(3))
        for x, y in zip(plain, tempered):
            np.testing.assert_array_equal(x.positions, y.positions)


class ShiftedTarget:
    """Same unnormalised density scaled by a constant."""

    def __init__(self, base, log_shift):
        self.base = base
        self.log_shift = log_shift
        self.dim = base.dim

    def log_density(self, x):
        return np.asarray(self.base.log_density(x)) + self.log_shift

    def grad_log_density(self, x):
        return self.base.grad_log_density(x)

    def sample(self, n, rng):
        return self.base.sample(n, rng)


class TestRescalingInvariance:
    def test_normalized_weights_and_paths_unchanged(self):
        cfg = SamplerConfig(128, 30, 0.05)
        mu0, pi = gauss1d(0, 1), gauss1d(4, 0.3)
        seed = RngStream(11)
        plain = run_smc_wfr(cfg, mu0, pi, seed)
        scaled = run_smc_wfr(cfg, mu0, ShiftedTarget(pi, 123.456), seed)
        for x, y in zip(plain, scaled):
            np.testing.assert_array_equal(x.positions, y.positions)
            np.testing.assert_allclose(y.normalized_weights(),
                                       x.normalized_weights(), atol=1e-12)


class TestUnitFrSmc:
    def test_zero_lambda_gap_gives_zero_weights(self):
        cfg = SamplerConfig(32, 10, 0.1, schedule=constant_one(), rwm_sigma=0.5)
        traj = run_unit_fr_smc(cfg, gauss1d(0, 1), gauss1d(5, 1), RngStream(2))
        for ps in traj:
            np.testing.assert_array_equal(ps.log_weights, np.zeros(32))

    def test_reaches_distant_narrow_target(self):
        cfg = SamplerConfig(2000, 200, 0.1, schedule=linear_horizon(1.0),
                            rwm_sigma=0.5)
        traj = run_unit_fr_smc(cfg, gauss1d(0, 1), gauss1d(20, 0.1),
                               RngStream(4))
        final = traj[-1]
        w = final.normalized_weights()
        mean = float(w @ final.positions[:, 0])
        var = float(w @ (final.positions[:, 0] - mean) ** 2)
        se = math.sqrt(var / final.ess())
        assert abs(mean - 20.0) < 3 * se

    def test_invalid_sigma_rejected(self):
        with pytest.raises(ValueError):
            SamplerConfig(8, 5, 0.1, rwm_sigma=0.0)


class TestTemperingSmc:
    def test_constant_lambda_gives_zero_weights(self):
        cfg = SamplerConfig(32, 10, 0.1, schedule=constant_one())
        traj = run_tempering_smc(cfg, gauss1d(0, 1), gauss1d(5, 1), RngStream(2))
        for ps in traj:
            np.testing.assert_array_equal(ps.log_weights, np.zeros(32))

    def test_reaches_distant_narrow_target(self):
        cfg = SamplerConfig(2000, 200, 0.05, schedule=linear_horizon(10.0))
        traj = run_tempering_smc(cfg, gauss1d(0, 1), gauss1d(20, 0.1),
                                 RngStream(8))
        final = traj[-1]
        w = final.normalized_weights()
        mean = float(w @ final.positions[:, 0])
        var = float(w @ (final.positions[:, 0] - mean) ** 2)
        se = math.sqrt(var / final.ess())
        assert abs(mean - 20.0) < 3 * se


class TestSeedDeterminismAllSamplers:
    # identical (seed, stream) pairs give bit-identical trajectories
    def _assert_same(self, run, *args):
        a = run(*args, RngStream(21))
        b = run(*args, RngStream(21))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.positions, y.positions)
            np.testing.assert_array_equal(x.log_weights, y.log_weights)

    def test_all_samplers(self):
        mu0, pi = gauss1d(0, 1), gauss1d(3, 0.5)
        sched = linear_horizon(1.0)
        cfg = SamplerConfig(32, 12, 0.05, schedule=sched)
        self._assert_same(run_tempered_smc_wfr, cfg, mu0, pi)
        self._assert_same(run_tempering_smc, cfg, mu0, pi)
        self._assert_same(run_unit_fr_smc, cfg, mu0, pi)
        self._assert_same(run_tempered_ula, cfg, mu0, pi)
        self._assert_same(lambda c, p, r: run_ula(c, p, r), cfg, pi)


class TestTemperedFlowBehaviour:
    def test_zero_schedule_equilibrates_around_initial(self):
        # lambda = 0: the moving target is mu0 itself
        cfg = SamplerConfig(500, 100, 0.05, schedule=exponential(0.0))
        traj = run_tempered_smc_wfr(cfg, gauss1d(0, 1), gauss1d(30, 1),
                                    RngStream(9))
        final = traj[-1]
        w = final.normalized_weights()
        mean = float(w @ final.positions[:, 0])
        var = float(w @ (final.positions[:, 0] - mean) ** 2)
        assert abs(mean) < 3 * math.sqrt(var / final.ess()) + 0.05

    def test_linear_schedule_converges_slower_than_untempered(self):
        # moving the target only delays convergence: the moment-matched KL
        # of the tempered run dominates the untempered one mid-run
        from wfr_smc.metrics import gaussian_kl_proxy
        mu0, pi = gauss1d(0, 1), gauss1d(20, 0.1)
        t_total = 100
        plain_cfg = SamplerConfig(500, t_total, 0.05)
        temp_cfg = SamplerConfig(500, t_total, 0.05,
                                 schedule=linear_horizon(5.0))
        kl_plain, kl_temp = {}, {}
        probes = range(20, 95, 10)
        for ps in run_smc_wfr(plain_cfg, mu0, pi, RngStream(2)):
            if ps.iteration in probes:
                kl_plain[ps.iteration] = gaussian_kl_proxy(ps, [20.0], [[0.1]])
        for ps in run_tempered_smc_wfr(temp_cfg, mu0, pi, RngStream(2)):
            if ps.iteration in probes:
                kl_temp[ps.iteration] = gaussian_kl_proxy(ps, [20.0], [[0.1]])
        assert all(kl_temp[n] >= kl_plain[n] for n in probes)


class TestUlaBaselines:
    def test_stationary_start_stays_put(self):
        cfg = SamplerConfig(500, 200, 0.1)
        traj = run_ula(cfg, gauss1d(0, 1), RngStream(6))
        chain_mean = traj[-1].positions.mean()
        assert abs(chain_mean) < 3 / math.sqrt(500)

    def test_oversized_step_diverges(self):
        # gamma > 2 / L for the standard normal: variance grows, flagged by
        # inspection rather than asserted as convergence
        cfg = SamplerConfig(200, 100, 2.2)
        traj = run_ula(cfg, gauss1d(0, 1), RngStream(6))
        assert traj[-1].positions.var() > 100 * traj[0].positions.var()

    def test_tempered_chain_lags_behind_target(self):
        # with the zero schedule the chains equilibrate around mu0
        cfg = SamplerConfig(500, 100, 0.1, schedule=exponential(0.0))
        traj = run_tempered_ula(cfg, gauss1d(0, 1), gauss1d(30, 1), RngStream(1))
        assert abs(traj[-1].positions.mean()) < 0.3

    def test_mode_coverage_failure_for_far_separated_modes(self):
        # unit-variance modes separated by 9 sigma: parallel chains started
        # in one mode keep half the mass there for the whole budget, so the
        # kernel discrepancy stays far above the crossing threshold
        from wfr_smc.metrics import MmdEvaluator
        from wfr_smc.targets import bimodal
        pi = bimodal(9.0)
        evaluator = MmdEvaluator(pi.sample(10_000, RngStream(20_240_905)))
        cfg = SamplerConfig(500, 2000, 0.1)
        floor = np.inf
        for ps in iterate_ula(cfg, pi, RngStream(4), gauss1d(0, 1)):
            if ps.iteration % 100 == 0 and ps.iteration > 0:
                floor = min(floor, evaluator.mmd_squared(
                    ps.positions, ps.normalized_weights()))
        assert floor > 0.05


class TestEssThresholdPolicy:
    def test_weights_accumulate_between_resamples(self):
        cfg = SamplerConfig(64, 15, 0.05, resample_policy="ess_threshold",
                            ess_threshold=0.01)
        traj = run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(2, 0.5), RngStream(7))
        # with an effectively-never threshold the weights are never reset
        assert not np.all(traj[-1].log_weights == traj[-1].log_weights[0])

    def test_always_policy_resets_weights_each_iteration(self):
        cfg = SamplerConfig(64, 5, 0.05)
        traj = run_smc_wfr(cfg, gauss1d(0, 1), gauss1d(2, 0.5), RngStream(7))
        # the pre-reweight weights are uniform after every resample, so the
        # stored weights equal the single-iteration increments; bounded scale
        assert np.abs(traj[-1].log_weights).max() < 50
