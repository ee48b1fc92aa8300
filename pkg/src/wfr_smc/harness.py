"""Configuration-driven experiment runner.

A run is described by a small key/value config file (see `parse_config`),
executes ``replicates`` independent seeded runs of one sampler, evaluates the
metric columns at a fixed cadence against a frozen reference sample of the
target, and writes one CSV per replicate plus a summary CSV.  All stochastic
output is a pure function of (config, seed); only the wallclock column varies
between repeated runs.
"""

from __future__ import annotations

import io
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bdl import BdlConfig, PopulationCollapseError, iterate_bdl
from .metrics import MetricReport, MmdEvaluator, moment_mse, w1_marginal_average
from .particles import RngStream, effective_sample_size, normalize_log_weights
from .samplers import (SamplerConfig, SamplerDivergenceError,
                       iterate_smc_wfr, iterate_tempered_smc_wfr,
                       iterate_tempered_ula, iterate_tempering_smc,
                       iterate_ula, iterate_unit_fr_smc)
from .schedules import TemperingSchedule
from .targets import make_target

__all__ = [
    "ComparisonReport",
    "ConfigError",
    "ExperimentConfig",
    "RunSummary",
    "compare_flows",
    "parse_config",
    "parse_config_file",
    "parse_schedule",
    "run_experiment",
]

SAMPLERS = ("smc_wfr", "tempered_smc_wfr", "unit_fr_smc", "tempering_smc",
            "ula", "tempered_ula", "bdl_pde", "bdl_kl")
_NEEDS_SCHEDULE = ("tempered_smc_wfr", "unit_fr_smc", "tempering_smc",
                   "tempered_ula")


class ConfigError(ValueError):
    """Invalid experiment config; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    sampler: str
    target: str
    mu0: str | None = None
    n_particles: int = 500
    n_iterations: int = 1000
    gamma: float = 0.05
    schedule: str | None = None
    kde_bandwidth: float | None = None
    rwm_sigma: float = 0.5
    resampling: str = "multinomial"
    resample_policy: str = "always"
    ess_threshold: float = 0.5
    metric_cadence: int = 1
    seed: int = 0
    replicates: int = 10
    out_dir: str | None = None
    mmd_reference_size: int = 10_000
    mmd_reference_seed: int = 20_240_905
    mmd_threshold: float = 0.05

    def label(self) -> str:
        return f"{self.sampler}/{self.schedule or 'none'}"


def parse_schedule(spec: str, horizon: float) -> TemperingSchedule:
    """Build a schedule from a spec string.

    ``"constant_one"``, ``"optimal_one_over"``, ``"linear_horizon(H)"``,
    ``"exponential(alpha)"``; the shorthand ``"linear"`` uses the run's own
    time horizon.
    """
    spec = spec.strip()
    if spec == "linear":
        return TemperingSchedule("linear_horizon", horizon)
    match = re.fullmatch(r"([a-zA-Z_][a-zA-Z0-9_]*)\s*(?:\(([^)]*)\))?", spec)
    if match is None:
        raise ValueError(f"malformed schedule spec: {spec!r}")
    name, argstr = match.group(1), match.group(2)
    param = float(argstr) if argstr is not None and argstr.strip() else 0.0
    return TemperingSchedule(name, param)


_FIELD_TYPES = {
    "sampler": str, "target": str, "mu0": str, "schedule": str,
    "out_dir": str, "resampling": str, "resample_policy": str,
    "n_particles": int, "n_iterations": int, "metric_cadence": int,
    "seed": int, "replicates": int, "mmd_reference_size": int,
    "mmd_reference_seed": int,
    "gamma": float, "kde_bandwidth": float, "rwm_sigma": float,
    "ess_threshold": float, "mmd_threshold": float,
}


def _parse_value(raw: str, line_no: int, errors: list[str]):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if re.fullmatch(r"[+-]?\d+", raw):
        return int(raw)
    try:
        return float(raw)
    except ValueError:
        errors.append(f"line {line_no}: value {raw!r} is neither a quoted "
                      "string nor a number")
        return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a config; raises ConfigError listing every problem.

    Grammar: optional ``[section]`` headers, ``key = value`` lines, ``#``
    comments; strings are double-quoted, numbers are plain.
    """
    errors: list[str] = []
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped or re.fullmatch(r"\[[^\]]*\]", stripped):
            continue
        if "=" not in stripped:
            errors.append(f"line {line_no}: expected 'key = value'")
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            errors.append(f"line {line_no}: unknown key {key!r}")
            continue
        value = _parse_value(raw, line_no, errors)
        if value is None:
            continue
        expected = _FIELD_TYPES[key]
        if expected is str and not isinstance(value, str):
            errors.append(f"line {line_no}: {key} must be a quoted string")
            continue
        if expected in (int, float) and isinstance(value, str):
            errors.append(f"line {line_no}: {key} must be a number")
            continue
        if expected is int and not isinstance(value, int):
            errors.append(f"line {line_no}: {key} must be an integer")
            continue
        values[key] = expected(value) if not isinstance(value, str) else value

    if "sampler" not in values:
        errors.append("missing required key 'sampler'")
    if "target" not in values:
        errors.append("missing required key 'target'")
    if errors:
        raise ConfigError(errors)

    config = ExperimentConfig(**values)
    _validate(config, errors)
    if errors:
        raise ConfigError(errors)
    return config


def parse_config_file(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _validate(config: ExperimentConfig, errors: list[str]) -> None:
    if config.sampler not in SAMPLERS:
        errors.append(f"sampler: unknown sampler {config.sampler!r}")
    for key in ("target", "mu0"):
        spec = getattr(config, key)
        if spec is None:
            continue
        try:
            make_target(spec)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    if config.n_particles <= 0:
        errors.append("n_particles: must be positive")
    if config.n_iterations <= 0:
        errors.append("n_iterations: must be positive")
    if config.gamma <= 0:
        errors.append("gamma: must be positive")
    if config.kde_bandwidth is not None and config.kde_bandwidth <= 0:
        errors.append("kde_bandwidth: must be positive")
    if config.rwm_sigma <= 0:
        errors.append("rwm_sigma: must be positive")
    if config.metric_cadence < 1:
        errors.append("metric_cadence: must be >= 1")
    if config.replicates < 1:
        errors.append("replicates: must be >= 1")
    if config.mmd_reference_size < 1:
        errors.append("mmd_reference_size: must be >= 1")
    if config.resampling not in ("multinomial", "systematic"):
        errors.append(f"resampling: unknown scheme {config.resampling!r}")
    if config.resample_policy not in ("always", "ess_threshold"):
        errors.append(f"resample_policy: unknown policy {config.resample_policy!r}")
    if config.resample_policy == "ess_threshold" and not 0 < config.ess_threshold <= 1:
        errors.append("ess_threshold: must lie in (0, 1]")
    if config.sampler in _NEEDS_SCHEDULE and config.schedule is None:
        # bridge samplers default to the linear schedule over their own horizon
        config.schedule = "linear"
    if config.schedule is not None:
        horizon = _schedule_horizon(config)
        try:
            parse_schedule(config.schedule, horizon)
        except ValueError as exc:
            errors.append(f"schedule: {exc}")
    if config.sampler.startswith("bdl") and config.kde_bandwidth is None:
        config.kde_bandwidth = config.gamma
    if config.mu0 is None and config.sampler != "ula":
        errors.append("mu0: required for this sampler")


def _schedule_horizon(config: ExperimentConfig) -> float:
    if config.sampler == "unit_fr_smc":
        return 1.0
    return config.n_iterations * config.gamma


def _make_iterator(config: ExperimentConfig, seed: int):
    rng = RngStream(seed)
    pi = make_target(config.target)
    mu0 = make_target(config.mu0) if config.mu0 is not None else None
    schedule = None
    if config.schedule is not None:
        schedule = parse_schedule(config.schedule, _schedule_horizon(config))
    sc = SamplerConfig(
        n_particles=config.n_particles, n_iterations=config.n_iterations,
        gamma=config.gamma, schedule=schedule, resampling=config.resampling,
        resample_policy=config.resample_policy,
        ess_threshold=config.ess_threshold, rwm_sigma=config.rwm_sigma)
    if config.sampler == "smc_wfr":
        return iterate_smc_wfr(sc, mu0, pi, rng)
    if config.sampler == "tempered_smc_wfr":
        return iterate_tempered_smc_wfr(sc, mu0, pi, rng)
    if config.sampler == "unit_fr_smc":
        return iterate_unit_fr_smc(sc, mu0, pi, rng)
    if config.sampler == "tempering_smc":
        return iterate_tempering_smc(sc, mu0, pi, rng)
    if config.sampler == "ula":
        return iterate_ula(sc, pi, rng, mu0)
    if config.sampler == "tempered_ula":
        return iterate_tempered_ula(sc, mu0, pi, rng)
    bc = BdlConfig(n_particles=config.n_particles,
                   n_iterations=config.n_iterations, gamma=config.gamma,
                   kde_bandwidth=config.kde_bandwidth,
                   rate_variant=config.sampler.removeprefix("bdl_"))
    return iterate_bdl(bc, mu0, pi, rng)


@dataclass
class ReplicateResult:
    replicate: int
    status: str                     # "ok" or the failure message
    reports: list[MetricReport]
    iterations_to_threshold: int | None

    @property
    def final(self) -> MetricReport | None:
        return self.reports[-1] if self.reports else None


@dataclass
class RunSummary:
    config: ExperimentConfig
    replicates: list[ReplicateResult]
    aggregates: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.replicates if r.status != "ok")

    def threshold_iterations(self, censor: int | None = None) -> np.ndarray:
        """Per-replicate first crossing; never-crossed entries are censored
        at ``censor`` (default: n_iterations + 1)."""
        if censor is None:
            censor = self.config.n_iterations + 1
        return np.array([
            censor if r.iterations_to_threshold is None
            else r.iterations_to_threshold
            for r in self.replicates if r.status == "ok"], dtype=float)


_AGG_FIELDS = ("mmd", "w1_marginal_avg", "mse_mean", "mse_cov", "ess_fraction")


def _aggregate(results: list[ReplicateResult]) -> dict:
    finals = [r.final for r in results if r.status == "ok" and r.final]
    agg = {}
    for name in _AGG_FIELDS:
        vals = np.array([getattr(f, name) for f in finals], dtype=float)
        if vals.size == 0:
            agg[name] = (float("nan"), float("nan"))
        else:
            stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            agg[name] = (float(vals.mean()), stderr)
    return agg


def run_experiment(config: ExperimentConfig, out_dir=None,
                   paper_scale: bool = False) -> RunSummary:
    """Execute the configured replicates, optionally writing CSVs.

    Replicate r uses seed ``config.seed + r``.  A replicate that aborts
    (degenerate weights, population collapse) is recorded with its failure
    message; the run as a whole only fails if every replicate fails.
    """
    if paper_scale:
        config = replace(config, replicates=50)
    pi = make_target(config.target)
    reference = pi.sample(config.mmd_reference_size,
                          RngStream(config.mmd_reference_seed))
    evaluator = MmdEvaluator(reference)
    true_mean, true_cov = pi.moments()

    results = []
    for r in range(config.replicates):
        results.append(_run_replicate(config, r, evaluator, reference,
                                      true_mean, true_cov))
    summary = RunSummary(config, results, _aggregate(results))

    target_dir = out_dir if out_dir is not None else config.out_dir
    if target_dir is not None:
        _write_outputs(summary, Path(target_dir))
    return summary


def _run_replicate(config, r, evaluator, reference, true_mean, true_cov):
    cadence = config.metric_cadence
    reports: list[MetricReport] = []
    crossing = None
    status = "ok"
    start = time.perf_counter()
    try:
        for ps in _make_iterator(config, config.seed + r):
            n = ps.iteration
            if not (n == 0 or n % cadence == 0 or n == config.n_iterations):
                continue
            probs = normalize_log_weights(ps.log_weights)[0]
            mmd = evaluator.mmd_squared(ps.positions, probs)
            w1 = w1_marginal_average(ps.positions, probs, reference)
            mse_m, mse_c = moment_mse(ps.positions, probs, true_mean, true_cov)
            report = MetricReport(
                iteration=n, wallclock_s=time.perf_counter() - start,
                ess_fraction=effective_sample_size(probs) / ps.n_particles,
                mmd=mmd, w1_marginal_avg=w1, mse_mean=mse_m, mse_cov=mse_c)
            reports.append(report)
            if crossing is None and n >= 1 and mmd < config.mmd_threshold:
                crossing = n
    except (SamplerDivergenceError, PopulationCollapseError) as exc:
        status = f"aborted: {exc}"
    return ReplicateResult(r, status, reports, crossing)


# ---------------------------------------------------------------------------
# CSV output


def _format(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def render_metric_csv(reports: list[MetricReport]) -> str:
    buf = io.StringIO()
    buf.write(f"# wfr-smc v{__version__}\n")
    buf.write(",".join(MetricReport.CSV_COLUMNS) + "\n")
    for report in reports:
        buf.write(",".join(_format(v) for v in report.as_row()) + "\n")
    return buf.getvalue()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_outputs(summary: RunSummary, out_dir: Path) -> None:
    for result in summary.replicates:
        _write_text(out_dir / f"replicate_{result.replicate:03d}.csv",
                    render_metric_csv(result.reports))
    _write_text(out_dir / "summary.csv", render_summary_csv(summary))


def render_summary_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    buf.write(f"# wfr-smc v{__version__}\n")
    buf.write("replicate,status,iterations_to_threshold,"
              + ",".join(_AGG_FIELDS) + "\n")
    for result in summary.replicates:
        final = result.final
        cross = ("" if result.iterations_to_threshold is None
                 else str(result.iterations_to_threshold))
        vals = [_format(getattr(final, f)) if final else "" for f in _AGG_FIELDS]
        status = "ok" if result.status == "ok" else "failed"
        buf.write(f"{result.replicate},{status},{cross}," + ",".join(vals) + "\n")
    for stat_idx, stat_name in ((0, "mean"), (1, "stderr")):
        vals = [_format(summary.aggregates[f][stat_idx]) for f in _AGG_FIELDS]
        buf.write(f"{stat_name},,," + ",".join(vals) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# multi-config comparison


@dataclass
class ComparisonReport:
    rows: list[dict]
    pairwise: list[dict]

    def render_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# wfr-smc v{__version__}\n")
        buf.write("label,mean_iterations_to_threshold,stderr,n_crossed,n_ok\n")
        for row in self.rows:
            buf.write(f"{row['label']},{_format(row['mean'])},"
                      f"{_format(row['stderr'])},{row['n_crossed']},{row['n_ok']}\n")
        return buf.getvalue()


def compare_flows(configs: list[ExperimentConfig], out_dir=None,
                  paper_scale: bool = False) -> ComparisonReport:
    """Run each config and tabulate iterations-to-threshold side by side.

    All configs must share the target, initial distribution and particle
    count, otherwise the comparison is meaningless and rejected.
    """
    if not configs:
        raise ValueError("no configs to compare")
    base = (configs[0].target, configs[0].mu0, configs[0].n_particles)
    for config in configs[1:]:
        if (config.target, config.mu0, config.n_particles) != base:
            raise ValueError(
                "incomparable configs: target, mu0 and n_particles must match")
    rows = []
    for config in configs:
        summary = run_experiment(config, out_dir=None, paper_scale=paper_scale)
        crossings = summary.threshold_iterations()
        n_ok = sum(1 for r in summary.replicates if r.status == "ok")
        n_crossed = sum(1 for r in summary.replicates
                        if r.iterations_to_threshold is not None)
        mean = float(crossings.mean()) if crossings.size else float("nan")
        stderr = (float(crossings.std(ddof=1) / np.sqrt(crossings.size))
                  if crossings.size > 1 else 0.0)
        rows.append({"label": config.label(), "mean": mean, "stderr": stderr,
                     "n_crossed": n_crossed, "n_ok": n_ok})
    pairwise = []
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            diff = a["mean"] - b["mean"]
            spread = float(np.hypot(a["stderr"], b["stderr"]))
            pairwise.append({"first": a["label"], "second": b["label"],
                             "mean_difference": diff, "stderr": spread})
    report = ComparisonReport(rows, pairwise)
    if out_dir is not None:
        _write_text(Path(out_dir) / "comparison.csv", report.render_csv())
    return report
