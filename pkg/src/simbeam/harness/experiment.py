"""
Seeded Monte-Carlo sweeps and CSV output.

Every (sweep value, trial) pair gets its own 64-bit seed derived from the
base seed, so trials can run in any order or in parallel and still give
byte-identical tables.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..channel import sample_channel_set
from ..geometry import SimLayout, SimLayoutConfig
from ..optimizer import (SolveReport, alternating_optimize, average_power_baseline,
                         quantized_continuous_baseline, zf_baseline)
from ..phaseopt import codebook_search, finite_diff_gradient, sum_rate_gradient
from ..wavefield import PhaseConfig
from .config import ExperimentConfig

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

RESULT_FIELDS = ("sweep_axis", "sweep_value", "method", "trials", "failed_trials",
                 "mean_rate_bps_per_hz", "stderr_bps_per_hz", "mean_outer_iterations", "seeds_digest")
TRACE_FIELDS = ("method", "iteration", "rate")


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche mix of a 64-bit word."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, sweep_index: int, trial_index: int) -> int:
    """``mix(mix(mix(base) ^ sweep) ^ trial)``.

    For a fixed base seed, distinct (sweep, trial) pairs map to distinct
    seeds because each step is a bijection on 64-bit words.
    """
    x = splitmix64(base_seed & MASK64)
    x = splitmix64(x ^ (sweep_index & MASK64))
    return splitmix64(x ^ (trial_index & MASK64))


@dataclass(frozen=True)
class ResultRow:
    sweep_axis: str
    sweep_value: float
    method: str
    trials: int
    failed_trials: int
    mean_rate: float
    stderr: float
    mean_outer_iterations: float
    seeds_digest: str

    def as_csv(self):
        return [self.sweep_axis, repr(float(self.sweep_value)), self.method, self.trials, self.failed_trials,
                repr(self.mean_rate), repr(self.stderr), repr(self.mean_outer_iterations), self.seeds_digest]


@dataclass(frozen=True)
class TrialOutcome:
    sweep_index: int
    trial_index: int
    method: str
    seed: int
    rate: float
    outer_iterations: int
    error: str | None = None


def solve_method(method, channels, layout, env, bits, config: ExperimentConfig, seed) -> tuple[float, int]:
    """Run one solver on one channel realization; returns (rate, outer iterations)."""
    rng = np.random.default_rng([seed, 1])
    budget = env.tx_power
    opts = config.ao_options(bits)
    if method in ("sr", "pga", "pga-cont"):
        rep = alternating_optimize(channels, budget, method, opts, rng=rng)
        return rep.rate, rep.ao_iterations
    if method == "quantized":
        rep = quantized_continuous_baseline(channels, budget, bits, opts, rng=rng)
        return rep.rate, rep.ao_iterations
    if method in ("avg-sr", "avg-pga"):
        rep = average_power_baseline(channels, budget, method[4:], opts, rng=rng)
        return rep.rate, rep.ao_iterations
    if method == "codebook":
        Q = config.codebook_size or 10 * channels.L * channels.N
        res = codebook_search(channels, budget, Q, rng, bits, opts.iwf)
        return res.rate, 0
    if method == "zf":
        res = zf_baseline(layout.K, layout.M, budget, env.noise_power, env,
                          np.random.default_rng([seed, 2]), wavelength=layout.wavelength,
                          normalization=config.zf_normalization)
        return res.rate, 0
    raise ValueError(f"unknown method {method!r}")


def run_trial(config: ExperimentConfig, sweep_index: int, trial_index: int) -> list[TrialOutcome]:
    value = config.sweep_values[sweep_index]
    layout_cfg, env, bits = config.at(value)
    seed = trial_seed(config.seed, sweep_index, trial_index)
    channels = sample_channel_set(SimLayout(layout_cfg), env, np.random.default_rng([seed, 0]), seed=seed)
    out = []
    for method in config.methods:
        try:
            rate, iters = solve_method(method, channels, layout_cfg, env, bits, config, seed)
            out.append(TrialOutcome(sweep_index, trial_index, method, seed, rate, iters))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("trial %d/%d method %s failed: %s", sweep_index, trial_index, method, exc)
            out.append(TrialOutcome(sweep_index, trial_index, method, seed, math.nan, 0, str(exc)))
    return out


def _run_trial_args(args):
    return run_trial(*args)


def aggregate(config: ExperimentConfig, outcomes) -> list[ResultRow]:
    """Reduce trial outcomes to one row per (sweep value, method).

    Outcomes are ordered by trial index before reduction and sums use
    ``math.fsum``, so the result does not depend on execution order.
    """
    rows = []
    for s, value in enumerate(config.sweep_values):
        for method in config.methods:
            mine = sorted((o for o in outcomes if o.sweep_index == s and o.method == method),
                          key=lambda o: o.trial_index)
            ok = [o for o in mine if o.error is None]
            rates = [o.rate for o in ok]
            n = len(rates)
            mean = math.fsum(rates) / n if n else math.nan
            if n > 1:
                var = math.fsum((r - mean) ** 2 for r in rates) / (n - 1)
                stderr = math.sqrt(var / n)
            else:
                stderr = 0.0 if n else math.nan
            iters = math.fsum(o.outer_iterations for o in ok) / n if n else math.nan
            digest = hashlib.sha256(",".join(str(o.seed) for o in mine).encode()).hexdigest()[:16]
            rows.append(ResultRow(config.sweep_axis, value, method, len(mine), len(mine) - n,
                                  mean, stderr, iters, digest))
    return rows


def run_experiment(config: ExperimentConfig, order=None, workers=None) -> list[ResultRow]:
    """Run every sweep value x trial x method and aggregate.

    ``order`` optionally permutes the (sweep, trial) execution order;
    ``workers > 1`` runs trials in a process pool.
    """
    jobs = [(s, t) for s in range(len(config.sweep_values)) for t in range(config.trials)]
    if order is not None:
        jobs = [jobs[i] for i in order]
    workers = config.workers if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_args, [(config, s, t) for s, t in jobs]))
    else:
        results = [run_trial(config, s, t) for s, t in jobs]
    outcomes = [o for batch in results for o in batch]
    return aggregate(config, outcomes)


def write_results(rows, path):
    """Write result rows as CSV (comma separated, LF line endings, header row)."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_FIELDS)
            for row in rows:
                writer.writerow(row.as_csv())
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [ResultRow(r["sweep_axis"], float(r["sweep_value"]), r["method"], int(r["trials"]),
                          int(r["failed_trials"]), float(r["mean_rate_bps_per_hz"]),
                          float(r["stderr_bps_per_hz"]), float(r["mean_outer_iterations"]),
                          r["seeds_digest"]) for r in reader]


def trace_rows(report: SolveReport):
    """``(label, iteration, rate)`` for the outer loop and every inner solve.

    Inner traces are labelled ``<method>/iwf/<outer>`` and
    ``<method>/phase/<outer>``; iterations count from 1.
    """
    rows = [(report.method, i, r) for i, r in enumerate(report.trace, 1)]
    for outer, trace in enumerate(report.iwf_traces, 1):
        rows += [(f"{report.method}/iwf/{outer}", i, r) for i, r in enumerate(trace, 1)]
    for outer, trace in enumerate(report.phase_traces, 1):
        rows += [(f"{report.method}/phase/{outer}", i, r) for i, r in enumerate(trace, 1)]
    return rows


def export_traces(report: SolveReport, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_FIELDS)
            for label, it, rate in trace_rows(report):
                writer.writerow([label, it, repr(float(rate))])
    except OSError as exc:
        raise OSError(f"cannot write traces to {path}: {exc}") from exc


def read_traces(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["method"], int(r["iteration"]), float(r["rate"])) for r in csv.DictReader(fh)]


def solve_single(config: ExperimentConfig, method, sweep_index=0, trial_index=0) -> SolveReport:
    """One seeded solve with full traces, as used by the ``trace`` command."""
    value = config.sweep_values[sweep_index]
    layout_cfg, env, bits = config.at(value)
    seed = trial_seed(config.seed, sweep_index, trial_index)
    channels = sample_channel_set(SimLayout(layout_cfg), env, np.random.default_rng([seed, 0]), seed=seed)
    rng = np.random.default_rng([seed, 1])
    opts = config.ao_options(bits)
    budget = env.tx_power
    if method in ("sr", "pga", "pga-cont"):
        rep = alternating_optimize(channels, budget, method, opts, rng=rng)
    elif method == "quantized":
        rep = quantized_continuous_baseline(channels, budget, bits, opts, rng=rng)
    elif method in ("avg-sr", "avg-pga"):
        rep = average_power_baseline(channels, budget, method[4:], opts, rng=rng)
    else:
        raise ValueError(f"method {method!r} has no convergence trace; "
                         "use sr, pga, pga-cont, quantized, avg-sr or avg-pga")
    rep.seed = seed
    return rep


def gradient_check(instances=100, seed=0, L=3, N=4, K=2, step=1e-6, floor=1e-10):
    """Largest componentwise relative error of the analytic sum-rate gradient.

    Each instance draws a channel set and continuous phases, then compares
    the analytic gradient with central differences. Components whose
    absolute error is below ``floor`` count as exact.
    """
    side = math.isqrt(N)
    layout = SimLayout(SimLayoutConfig(M=K, K=K, L=L, Nx=side, Ny=N // side))
    env = ExperimentConfig().env
    worst = 0.0
    for i in range(instances):
        rng = np.random.default_rng([seed, i])
        channels = sample_channel_set(layout, env, rng)
        phases = PhaseConfig.continuous(rng.uniform(0, 2 * np.pi, (L, layout.config.N)))
        p = rng.dirichlet(np.ones(K)) * env.tx_power
        g = sum_rate_gradient(phases, channels, p)
        fd = finite_diff_gradient(phases, channels, p, step)
        err = np.abs(g - fd)
        rel = np.where(err < floor, 0.0, err / np.maximum(np.abs(fd), floor))
        worst = max(worst, float(rel.max()))
    return worst
