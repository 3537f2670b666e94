"""Monte Carlo campaigns over the five benchmarks and the three sweeps.

Every trial owns a set of named random streams derived from the master
seed and the trial index. Benchmarks and grid points of one trial reuse
the same streams (common random numbers), and results are reduced in
trial order, so the output does not depend on the worker count.
"""
from __future__ import annotations

import csv
import enum
import json
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .channels import draw_channel_set, draw_rayleigh
from .disco import ReflectionVector, aca_variance
from .manifold import RcgSettings, rcg_optimize, project_discrete
from .precoding import (anti_jamming_precoder, effective_channels, sjnr_deterministic,
                        sjnr_monte_carlo)
from .scenario import (LINK_KIND, ScenarioConfig, build_geometry, config_hash,
                       pathloss_gain, rng_stream)

__all__ = [
    "BenchmarkId",
    "RateReport",
    "SWEEP_KINDS",
    "DEFAULT_GRIDS",
    "TrialState",
    "run_benchmark",
    "run_trials",
    "sweep",
    "emit_report",
    "read_report_csv",
    "version_string",
]


class BenchmarkId(str, enum.Enum):
    NO_JAMMING = "no-jamming"
    PROPOSED = "proposed"
    AJP = "ajp"
    FPJ_NO_DEFENSE = "fpj-no-defense"
    ACTIVE_JAMMER = "active-jammer"

    def __str__(self):
        return self.value


ALL_BENCHMARKS = tuple(BenchmarkId)
SWEEP_KINDS = ("power", "n-irs", "bits")
DEFAULT_GRIDS = {
    "power": (-10.0, -5.0, 0.0, 5.0, 10.0),
    "n-irs": (32, 64, 128),
    "bits": (1, 2, 3, 4),
}


def apply_grid_value(config: ScenarioConfig, kind: str, value) -> ScenarioConfig:
    """Config for one grid point; power values are per-user dBm."""
    if kind == "power":
        return config.with_per_user_power(float(value))
    if kind == "n-irs":
        return config.replace(n_irs=int(value))
    if kind == "bits":
        return config.replace(irs_alphabet_bits=int(value))
    raise ValueError(f"unknown sweep kind {kind!r}")


class TrialState:
    """Everything drawn for one trial, shared by all benchmarks.

    The IRS optimization is run lazily and cached, so benchmarks that
    need it pay for it once.
    """

    def __init__(self, config: ScenarioConfig, trial: int, rcg_settings: RcgSettings | None = None):
        self.config = config
        self.trial = trial
        self.rcg_settings = rcg_settings or RcgSettings()
        seed = config.seed
        geo_trial = 0 if config.frozen_users else trial
        self.geometry = build_geometry(config, rng_stream(seed, geo_trial, "geometry"))
        self.channels = draw_channel_set(config, self.geometry, rng_stream(seed, trial, "channels"))
        self.beta = aca_variance(config, self.geometry).beta
        L_ju = np.atleast_1d(pathloss_gain(LINK_KIND["JU"], self.geometry.d_ju))
        g = draw_rayleigh(config.n_users, 1, rng_stream(seed, trial, "jammer"))[:, 0]
        self.jammer_gain = L_ju * np.abs(g) ** 2
        self._continuous = None
        self.rcg_trace = None

    def continuous_irs(self) -> ReflectionVector:
        if self._continuous is None:
            rng = rng_stream(self.config.seed, self.trial, "rcg")
            self._continuous, self.rcg_trace = rcg_optimize(
                self.channels, self.rcg_settings, restarts=self.config.rcg_restarts, rng=rng)
        return self._continuous

    def optimized_irs(self, config: ScenarioConfig) -> ReflectionVector:
        return project_discrete(self.continuous_irs(), config.irs_alphabet)

    def baseline_irs(self, config: ScenarioConfig) -> ReflectionVector | None:
        mode = config.baseline_irs
        if mode == "none":
            return None
        if mode == "optimized":
            return self.optimized_irs(config)
        rng = rng_stream(config.seed, self.trial, "random-irs")
        alphabet = config.irs_alphabet
        return ReflectionVector(alphabet[rng.integers(alphabet.size, size=config.n_irs)],
                                tuple(alphabet))

    def rate(self, benchmark: BenchmarkId | str, config: ScenarioConfig | None = None) -> float:
        """Per-user SJNR rate R/K of one benchmark under ``config``.

        ``config`` may differ from the trial's in power, IRS bits or
        estimation scaling, never in array sizes.
        """
        cfg = config or self.config
        b = BenchmarkId(benchmark)
        P0, sigma2 = cfg.power_budget_watts, cfg.noise_watts
        beta_est = cfg.beta_scale * self.beta

        if b in (BenchmarkId.NO_JAMMING, BenchmarkId.PROPOSED):
            irs = self.optimized_irs(cfg)
        else:
            irs = self.baseline_irs(cfg)
        eff = effective_channels(self.channels, irs)

        if b is BenchmarkId.NO_JAMMING:
            W = anti_jamming_precoder(eff, 0.0, sigma2, P0)
            return sjnr_deterministic(eff, W, sigma2).rate_per_user
        if b is BenchmarkId.ACTIVE_JAMMER:
            W = anti_jamming_precoder(eff, 0.0, sigma2, P0)
            jam = cfg.jammer_power_watts * self.jammer_gain
            return sjnr_deterministic(eff, W, sigma2, interference=jam).rate_per_user

        loaded = b in (BenchmarkId.PROPOSED, BenchmarkId.AJP)
        W = anti_jamming_precoder(eff, beta_est if loaded else 0.0, sigma2, P0)
        rep = sjnr_monte_carlo(self.channels, irs, W, sigma2, cfg.dirs_draws,
                               rng_stream(cfg.seed, self.trial, "dirs"), cfg.dirs_alphabet,
                               redraw=cfg.dirs_redraw_per_symbol)
        return rep.rate_per_user


def run_benchmark(benchmark: BenchmarkId | str, config: ScenarioConfig, trial: int = 0) -> float:
    """Per-user rate of one benchmark for trial ``trial`` of ``config.seed``."""
    return TrialState(config, trial).rate(benchmark)


def _trial_rates(trial, config, kind, grid, benchmarks, rcg_settings):
    out = np.empty((len(grid), len(benchmarks)))
    states = {}
    for gi, value in enumerate(grid):
        cfg = apply_grid_value(config, kind, value)
        if cfg.n_irs not in states:
            states[cfg.n_irs] = TrialState(cfg, trial, rcg_settings)
        state = states[cfg.n_irs]
        for bi, b in enumerate(benchmarks):
            out[gi, bi] = state.rate(b, cfg)
    return out


def run_trials(config: ScenarioConfig, kind: str, grid, benchmarks=ALL_BENCHMARKS, *,
               trials: int | None = None, workers: int = 1,
               rcg_settings: RcgSettings | None = None) -> np.ndarray:
    """Per-trial rates, shape (trials, len(grid), len(benchmarks))."""
    n = config.trials if trials is None else trials
    job = partial(_trial_rates, config=config, kind=kind, grid=tuple(grid),
                  benchmarks=tuple(BenchmarkId(b) for b in benchmarks),
                  rcg_settings=rcg_settings)
    if workers <= 1:
        rows = [job(t) for t in range(n)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, range(n), chunksize=max(1, n // (4 * workers))))
    return np.stack(rows)


@dataclass
class RateReport:
    sweep_var: str
    grid: list
    benchmarks: list
    mean: np.ndarray        # (G, B)
    stderr: np.ndarray      # (G, B)
    trials: int
    seed: int
    config: dict
    config_hash: str
    version: str
    per_trial: np.ndarray = field(repr=False, default=None)  # (T, G, B)

    def value(self, benchmark, grid_value, what="mean") -> float:
        gi = list(self.grid).index(grid_value)
        bi = list(self.benchmarks).index(str(BenchmarkId(benchmark)))
        return float(getattr(self, what)[gi, bi])

    def paired(self, a, b, grid_value) -> tuple[float, float]:
        """Mean and standard error of the per-trial difference rate(a) - rate(b)."""
        gi = list(self.grid).index(grid_value)
        ia = list(self.benchmarks).index(str(BenchmarkId(a)))
        ib = list(self.benchmarks).index(str(BenchmarkId(b)))
        diff = self.per_trial[:, gi, ia] - self.per_trial[:, gi, ib]
        return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(diff.size))


def version_string() -> str:
    from . import __version__
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"],
                             cwd=Path(__file__).parent, capture_output=True, text=True,
                             timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def sweep(kind: str, grid, config: ScenarioConfig, *, benchmarks=ALL_BENCHMARKS,
          trials: int | None = None, workers: int = 1,
          rcg_settings: RcgSettings | None = None) -> RateReport:
    """Run every benchmark at every grid point with common random numbers."""
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    benchmarks = [str(BenchmarkId(b)) for b in benchmarks]
    rates = run_trials(config, kind, grid, benchmarks, trials=trials, workers=workers,
                       rcg_settings=rcg_settings)
    n = rates.shape[0]
    stderr = rates.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(rates.shape[1:])
    return RateReport(sweep_var=kind, grid=grid, benchmarks=benchmarks,
                      mean=rates.mean(axis=0), stderr=stderr, trials=n, seed=config.seed,
                      config=config.to_dict(), config_hash=config_hash(config),
                      version=version_string(), per_trial=rates)


CSV_HEADER = ["sweep_var", "value", "benchmark", "mean_rate", "stderr", "trials", "seed"]


def emit_report(report: RateReport, path, manifest_path=None) -> Path:
    """Write the CSV and a JSON run manifest next to it (``<stem>.manifest.json``)."""
    if not report.grid or not report.benchmarks:
        raise ValueError("report has no grid points or benchmarks")
    path = Path(path)
    manifest_path = Path(manifest_path) if manifest_path else path.with_suffix(".manifest.json")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for gi, value in enumerate(report.grid):
            for bi, b in enumerate(report.benchmarks):
                writer.writerow([report.sweep_var, repr(value), b,
                                 repr(float(report.mean[gi, bi])),
                                 repr(float(report.stderr[gi, bi])), report.trials, report.seed])
    manifest = {
        "sweep_var": report.sweep_var,
        "grid": report.grid,
        "benchmarks": report.benchmarks,
        "trials": report.trials,
        "seed": report.seed,
        "config_hash": report.config_hash,
        "version": report.version,
        "config": report.config,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_report_csv(path) -> list[dict]:
    """Parse an emitted CSV back into typed rows."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "sweep_var": row["sweep_var"],
                "value": float(row["value"]),
                "benchmark": row["benchmark"],
                "mean_rate": float(row["mean_rate"]),
                "stderr": float(row["stderr"]),
                "trials": int(row["trials"]),
                "seed": int(row["seed"]),
            })
    return rows
