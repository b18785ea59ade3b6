"""
Acceptance suite: one test per criterion, each printing a single
``CRITERION n PASS|FAIL`` line with the measured numbers.

Full-size defaults: N = 49 (7 x 7), M = K = 4, L = 7, b = 2,
P_T = 10 dBm, 20 Monte-Carlo trials.
"""

import itertools
import time

import numpy as np
import pytest

from simbeam.channel import Environment, sample_channel_set
from simbeam.geometry import SimLayout, SimLayoutConfig
from simbeam.harness.config import ExperimentConfig
from simbeam.harness.experiment import gradient_check, run_experiment, trial_seed, write_results
from simbeam.optimizer import AoOptions, alternating_optimize, link_gains
from simbeam.phaseopt import exhaustive_search, projected_gradient_ascent, successive_refinement
from simbeam.powerctl import iterative_waterfilling, waterfill
from simbeam.wavefield import PhaseConfig, rate_norm_bound

TRIALS = 20


@pytest.fixture
def report(capsys):
    def emit(n, ok, text):
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {text}")
    return emit


def default_channels(seed, **layout):
    cfg = SimLayoutConfig(**layout)
    return sample_channel_set(SimLayout(cfg), Environment(), np.random.default_rng([seed, 0]), seed=seed)


def means(rows):
    return {(r.sweep_value, r.method): r.mean_rate for r in rows}


def test_criterion_1_gradient(report):
    t = time.perf_counter()
    worst = gradient_check(instances=100, seed=2024, L=3, N=4, K=2)
    dt = time.perf_counter() - t
    ok = worst < 1e-6 and dt < 10
    report(1, ok, f"max componentwise relative error {worst:.2e} (< 1e-6) over 100 instances in {dt:.1f} s")
    assert ok


def test_criterion_2_exhaustive_oracle(report):
    t = time.perf_counter()
    env = Environment()
    worst_gap, over = 0.0, 0.0
    for seed in range(100):
        ch = default_channels(seed, M=2, K=2, L=1, Nx=2, Ny=1)
        p = np.random.default_rng(seed).dirichlet([1, 1]) * env.tx_power
        opt = exhaustive_search(ch, p, 1)
        assert opt.iterations == 4
        for start in itertools.product((0, 1), repeat=2):
            ph = PhaseConfig(np.array([start]), 1)
            sr = successive_refinement(ph, ch, p)
            worst_gap = max(worst_gap, opt.rate - sr.rate)
            ga = projected_gradient_ascent(ph, ch, p)
            over = max(over, sr.rate - opt.rate, ga.rate - opt.rate)
        ao = alternating_optimize(ch, env.tx_power, "sr", AoOptions(bits=1), rng=np.random.default_rng(seed))
        over = max(over, ao.rate - exhaustive_search(ch, ao.p, 1).rate)
    dt = time.perf_counter() - t
    ok = worst_gap < 1e-9 and over <= 1e-12 and dt < 10
    report(2, ok, f"max SR shortfall vs exhaustive {worst_gap:.1e}, max excess of any optimizer {over:.1e}, "
                  f"{dt:.1f} s")
    assert ok


def closed_form(floors, budget):
    order = np.sort(floors)
    for m in range(len(order), 0, -1):
        level = (budget + order[:m].sum()) / m
        if level > order[m - 1]:
            return np.maximum(level - floors, 0.0)


def test_criterion_3_waterfilling(report):
    rng = np.random.default_rng(3)
    worst_p, worst_budget = 0.0, 0.0
    for _ in range(100):
        K = int(rng.integers(1, 9))
        budget = 10 ** rng.uniform(-3, 1)
        d = 10 ** rng.uniform(-9, -5, K)
        s2 = np.full(K, Environment().noise_power) * 10 ** rng.uniform(0, 3, K)
        res = iterative_waterfilling(np.diag(d), s2, budget)
        ref = closed_form(s2 / d, budget)
        worst_p = max(worst_p, np.max(np.abs(res.p - ref)))
        for p in res.history + [res.p]:
            worst_budget = max(worst_budget, abs(p.sum() - budget))
        assert np.all(res.p >= 0)
    ok = worst_p < 1e-8 and worst_budget < 1e-9
    report(3, ok, f"max |dp|_inf {worst_p:.1e} (< 1e-8), max budget residual {worst_budget:.1e} (< 1e-9)")
    assert ok


def test_criterion_4_monotonicity(report):
    env = Environment()
    budget = env.tx_power
    sr_bad = ao_bad = ga_bad = bound_bad = 0
    worst_ao_drop = 0.0
    for seed in range(100):
        ch = default_channels(seed, M=3, K=3, L=3, Nx=3, Ny=3)
        rng = np.random.default_rng([seed, 1])
        p = rng.dirichlet(np.ones(3)) * budget
        bound = rate_norm_bound(ch, p)

        sr = successive_refinement(PhaseConfig.random(3, 9, 2, rng), ch, p)
        tr = [sr.initial_rate] + sr.trace
        sr_bad += any(b < a for a, b in zip(tr, tr[1:]))
        bound_bad += any(r > bound + 1e-12 for r in tr)

        ga = projected_gradient_ascent(PhaseConfig.continuous(rng.uniform(0, 2 * np.pi, (3, 9))), ch, p)
        tr = [ga.initial_rate] + ga.trace
        ga_bad += any(b < a for a, b in zip(tr, tr[1:]))
        bound_bad += any(r > bound + 1e-12 for r in tr)

        ao = alternating_optimize(ch, budget, "sr", rng=rng)
        tr = [ao.initial_rate] + ao.trace
        drops = [a - b for a, b in zip(tr, tr[1:])]
        worst_ao_drop = max([worst_ao_drop] + drops)
        ao_bad += any(d > 1e-9 for d in drops)
        # bound over every feasible power vector: water-fill the interference-free SNRs
        a = np.sum(np.abs(ch.h) ** 2, axis=1) * np.prod([np.linalg.norm(w, 2) for w in ch.W]) ** 2 / ch.sigma2
        bound_any_p = rate_norm_bound(ch, waterfill(1 / a, budget))
        bound_bad += any(r > bound_any_p + 1e-12 for r in tr)
        bound_bad += ao.rate > rate_norm_bound(ch, ao.p) + 1e-12
    ok = sr_bad == ao_bad == ga_bad == bound_bad == 0
    report(4, ok, f"violations over 100 runs each: SR {sr_bad}, AO {ao_bad} (max drop {worst_ao_drop:.1e}), "
                  f"continuous PGA {ga_bad}, bound {bound_bad}")
    assert ok


@pytest.fixture(scope="module")
def layer_sweep():
    cfg = ExperimentConfig(methods=("sr",), sweep_axis="L", sweep_values=tuple(float(v) for v in range(1, 8)),
                           trials=TRIALS, seed=5)
    t = time.perf_counter()
    return run_experiment(cfg), time.perf_counter() - t


@pytest.fixture(scope="module")
def bits_sweep():
    cfg = ExperimentConfig(methods=("sr",), sweep_axis="b", sweep_values=(2.0, 6.0), trials=TRIALS, seed=6)
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def continuous_run():
    cfg = ExperimentConfig(methods=("pga-cont",), sweep_axis="b", sweep_values=(2.0,), trials=TRIALS, seed=6)
    return run_experiment(cfg)


def test_criterion_5_layer_trend(report, layer_sweep):
    rows, dt = layer_sweep
    m = [means(rows)[(float(L), "sr")] for L in range(1, 8)]
    ratio = m[6] / m[0]
    increasing = m[0] < m[1] < m[2]
    ok = ratio >= 1.5 and increasing and dt < 600
    curve = ", ".join(f"{v:.2f}" for v in m)
    report(5, ok, f"mean R(L=1..7) = [{curve}] bits/s/Hz; R(7)/R(1) = {ratio:.2f} (>= 1.5), "
                  f"increasing over L=1..3: {increasing}, {dt:.0f} s")
    assert ok


def test_criterion_6_discrete_penalty(report, bits_sweep, continuous_run):
    cont = continuous_run[0].mean_rate
    b2 = means(bits_sweep)[(2.0, "sr")]
    b6 = means(bits_sweep)[(6.0, "sr")]
    gap2, gap6 = cont - b2, cont - b6
    ok = gap2 <= 1.0 and gap6 <= 0.2
    report(6, ok, f"continuous {cont:.2f}, b=2 {b2:.2f}, b=6 {b6:.2f} bits/s/Hz; "
                  f"gap b=2 {gap2:.2f} (<= 1.0), gap b=6 {gap6:.2f} (<= 0.2)")
    assert ok


def test_criterion_7_sim_vs_zf(report, bits_sweep, tmp_path):
    t = time.perf_counter()
    zf = run_experiment(ExperimentConfig(methods=("zf",), sweep_axis="b", sweep_values=(2.0,), trials=TRIALS,
                                         seed=6))
    write_results(zf, tmp_path / "zf.csv")
    sim = means(bits_sweep)[(2.0, "sr")]
    ratio = sim / zf[0].mean_rate
    ok = ratio >= 2.0
    report(7, ok, f"SIM {sim:.2f} vs ZF {zf[0].mean_rate:.2f} bits/s/Hz, ratio {ratio:.2f} (>= 2.0), "
                  f"{time.perf_counter() - t:.1f} s")
    assert ok


def test_criterion_8_iteration_budgets(report):
    env = Environment()
    budget = env.tx_power
    iwf, sr, ga, ao = [], [], [], []
    for run in range(10):
        seed = trial_seed(8, 0, run)
        ch = default_channels(seed)
        rng = np.random.default_rng([seed, 1])
        phases = PhaseConfig.random(7, 49, 2, rng)
        iwf.append(iterative_waterfilling(link_gains(phases, ch), ch.sigma2, budget).iterations)
        p = np.full(4, budget / 4)
        sr.append(successive_refinement(phases, ch, p).iterations)
        ga.append(projected_gradient_ascent(phases, ch, p).iterations)
        rep = alternating_optimize(ch, budget, "sr", phases0=phases)
        ao.append(rep.ao_iterations)
        sr.extend(rep.phase_iterations)
    med_iwf = float(np.median(iwf))
    ok = med_iwf <= 20 and max(sr) <= 25 and max(ga) <= 20 and max(ao) <= 10
    report(8, ok, f"I_IWF median {med_iwf:g} (<= 20), I_SR max {max(sr)} (<= 25), I_GA max {max(ga)} (<= 20), "
                  f"I_AO max {max(ao)} (<= 10)")
    assert ok


def test_criterion_9_determinism(report, tmp_path):
    cfg = ExperimentConfig(layout=SimLayoutConfig(M=2, K=2, L=2, Nx=3, Ny=3), methods=("sr", "pga", "zf"),
                           sweep_axis="L", sweep_values=(1.0, 2.0, 3.0), trials=4, seed=2**63 + 17)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = run_experiment(cfg)
    write_results(rows, a)
    write_results(run_experiment(cfg), b)
    same_bytes = a.read_bytes() == b.read_bytes()
    order = np.random.default_rng(9).permutation(len(cfg.sweep_values) * cfg.trials)
    permuted = run_experiment(cfg, order=order)
    same_aggr = permuted == rows
    single = ExperimentConfig(layout=cfg.layout, methods=("sr",), sweep_values=(2.0,), trials=1, seed=1)
    write_results(run_experiment(single), a)
    write_results(run_experiment(single), b)
    same_single = a.read_bytes() == b.read_bytes()
    ok = same_bytes and same_aggr and same_single
    report(9, ok, f"byte-identical reruns: {same_bytes and same_single}, permuted-order aggregates identical: "
                  f"{same_aggr}")
    assert ok
