"""Particle samplers for diffusion, reaction and combined gradient-flow
dynamics on probability distributions, with exact Gaussian moment oracles,
birth-death baselines, distributional metrics and a benchmark harness."""

__version__ = "0.1.0"

from .gaussian_flows import (FLOW_KINDS, GaussianState, evolve, gaussian_kl,
                             moment_rhs, unit_fr_time_rescaling_check)
from .metrics import (MetricReport, MmdEvaluator, gaussian_kl_proxy,
                      mmd_gaussian, mmd_squared_gaussian, moment_mse,
                      w1_marginal, w1_marginal_average)
from .particles import (DegenerateWeightsError, ParticleSystem, RngStream,
                        StepSize, effective_sample_size, normalize_log_weights,
                        resample)
from .samplers import (SamplerConfig, SamplerDivergenceError,
                       mirror_descent_gaussian, run_smc_wfr,
                       run_tempered_smc_wfr, run_tempered_ula,
                       run_tempering_smc, run_ula, run_unit_fr_smc,
                       tempered_ula_step, tempered_wfr_log_weight, ula_step,
                       wfr_log_weight)
from .bdl import BdlConfig, bdl_rates, bdl_step, kde_log_density, run_bdl
from .schedules import (TemperingSchedule, constant_one, exponential,
                        linear_horizon, optimal_one_over)
from .targets import (GaussianMixtureTarget, GaussianTarget,
                      GeometricPathTarget, bimodal, four_mode, gauss1d,
                      gauss2d_iso, make_target)
from .harness import (ComparisonReport, ConfigError, ExperimentConfig,
                      RunSummary, compare_flows, parse_config,
                      parse_config_file, run_experiment)
