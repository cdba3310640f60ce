"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from bacnoma import specfun, trends
from bacnoma.config import SystemConfig
from bacnoma.errors import DegenerateChannelError
from bacnoma.experiments import fig1_specs, fig2_specs, fig3_specs
from bacnoma.geometry import complex_normal, prewhiten, sample_geometry, sample_sdma_channels
from bacnoma.harness import SweepResult, run_experiment
from bacnoma.legacy import build_beamformers, interference_budgets, interference_matrix
from bacnoma.mac import LogDetObjective
from bacnoma.ofdma import (build_stacked_mac, draw_ofdma, ofdma_budgets, ofdma_constraint_matrix,
                           sic_rates_ofdma, sum_capacity_ofdma)
from bacnoma.sdma import (AvgQrObjective, avg_qr_gains, avg_qr_sum_rate, draw_excitation,
                          effective_channels, qr_diagonal_sq, qr_rates_approach2,
                          sic_rates_approach1, sum_capacity_sdma)
from bacnoma.solver import FeasibleRegion, maximize

from oracles import avgqr_sum, feasible_grid, logdet2

SEED = 20240611


def sdma_case(rng, n, k, m, alpha):
    cfg = SystemConfig(n_antennas=n, n_downlink=k, n_devices=m, alpha=alpha)
    while True:
        ch = sample_sdma_channels(cfg, sample_geometry(cfg, rng), rng)
        try:
            w = build_beamformers(ch)
            break
        except DegenerateChannelError:
            continue
    tau = interference_budgets(ch, w, cfg.tau_policy, cfg.p0, cfg.sigma2)
    return cfg, ch, w, prewhiten(cfg, ch), FeasibleRegion(interference_matrix(ch, w), tau)


def random_sdma(rng, max_n=6, max_m=6, m=None, overload=True):
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, n + 1))
    if m is None:
        m = int(rng.integers(1, (max_m if overload else n) + 1))
    return sdma_case(rng, n, k, m, 10 ** rng.uniform(-5, -1))


def random_ofdma_model(rng, k, m):
    cfg = SystemConfig(n_downlink=k, n_devices=m, alpha=10 ** rng.uniform(-5, -1))
    ch = draw_ofdma(cfg, rng)
    return cfg, ch, build_stacked_mac(ch, complex_normal(rng, k), cfg.p0, cfg.alpha, cfg.sigma2)


def rel_gap(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_chain_rule(criterion):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst_sdma = worst_ofdma = 0.0
    for _ in range(1000):
        cfg, ch, w, wh, _ = random_sdma(rng)
        exc = draw_excitation(ch.h, w, cfg.p0, rng)
        eta = rng.uniform(size=ch.n_devices)
        order = rng.permutation(ch.n_devices)
        worst_sdma = max(worst_sdma, rel_gap(sic_rates_approach1(wh, exc, eta, order).sum,
                                             sum_capacity_sdma(wh, exc, eta)))
    for _ in range(1000):
        _, ch, model = random_ofdma_model(rng, int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        eta = rng.uniform(size=ch.n_devices)
        order = rng.permutation(ch.n_devices)
        worst_ofdma = max(worst_ofdma, rel_gap(sic_rates_ofdma(model, eta, order).sum,
                                               sum_capacity_ofdma(model, eta)))
    elapsed = time.perf_counter() - start
    ok = worst_sdma <= 1e-9 and worst_ofdma <= 1e-9 and elapsed < 10
    criterion(1, ok, f"worst relative gap SDMA {worst_sdma:.2e}, OFDMA {worst_ofdma:.2e}; "
                     f"{elapsed:.1f} s")
    assert ok


def test_criterion_2_order_invariance(criterion):
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for i in range(100):
        cfg, ch, w, wh, _ = random_sdma(rng)
        exc = draw_excitation(ch.h, w, cfg.p0, rng)
        eta = rng.uniform(size=ch.n_devices)
        sums = [sic_rates_approach1(wh, exc, eta, rng.permutation(ch.n_devices)).sum
                for _ in range(5)]
        worst = max(worst, (max(sums) - min(sums)) / max(sums))
    ok = worst <= 1e-9
    criterion(2, ok, f"worst relative spread over 5 orders {worst:.2e}")
    assert ok


def test_criterion_3_average_rate(criterion):
    rng = np.random.default_rng(SEED + 3)
    start = time.perf_counter()
    n_draws, z_scores = 200000, []
    for _ in range(20):
        cfg, ch, w, wh, _ = random_sdma(rng, overload=False)
        eta = rng.uniform(size=ch.n_devices)
        closed = avg_qr_sum_rate(wh, w, eta, cfg.p0)
        # the vectorized draw below must reproduce qr_rates_approach2 exactly
        r2 = qr_diagonal_sq(wh)
        for _ in range(3):
            exc = draw_excitation(ch.h, w, cfg.p0, rng)
            direct = qr_rates_approach2(wh, exc, eta).sum
            assert np.log2(1 + r2 * eta * np.abs(exc.s0_gain) ** 2).sum() == pytest.approx(direct, rel=1e-12)
        x = complex_normal(rng, (n_draws, ch.n_downlink))
        s0 = math.sqrt(cfg.p0) * x @ (ch.h @ w).T
        draws = np.log2(1 + r2 * eta * np.abs(s0) ** 2).sum(axis=1)
        z_scores.append(abs(draws.mean() - closed) / (draws.std(ddof=1) / math.sqrt(n_draws)))
    elapsed = time.perf_counter() - start
    ok = max(z_scores) <= 3 and elapsed < 60
    criterion(3, ok, f"largest |closed form - MC mean| = {max(z_scores):.2f} SE over 20 "
                     f"instances; {elapsed:.1f} s")
    assert ok


def _quad(fun, lo, hi=np.inf):
    return integrate.quad(fun, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]


def test_criterion_4_special_functions(criterion):
    start = time.perf_counter()
    checks = {}
    e1 = lambda y: _quad(lambda t: math.exp(-t) / t, y)  # noqa: E731
    checks["ei_neg(1)"] = rel_gap(specfun.ei_neg(1.0), -e1(1.0)) <= 1e-10
    checks["ei_neg(0.5)"] = rel_gap(specfun.ei_neg(0.5), -e1(0.5)) <= 1e-10
    f1 = _quad(lambda t: math.exp(-t) / (1 + t), 0.0)
    checks["f(1)"] = rel_gap(specfun.f(1.0), f1) <= 1e-8
    for x, h in ((1.0, 1e-6), (10.0, 1e-6)):
        fd = (specfun.f(x + h) - specfun.f(x - h)) / (2 * h)
        checks[f"f_prime({x:g})"] = abs(specfun.f_prime(x) - fd) <= 1e-5
    h = 1e-4
    fd2 = (specfun.f(1 + h) - 2 * specfun.f(1.0) + specfun.f(1 - h)) / h**2
    checks["f_second(1)"] = abs(specfun.f_second(1.0) - fd2) <= 1e-4
    checks["g(1)"] = rel_gap(specfun.g_appendix(1.0), -e1(1.0) + math.exp(-1)) <= 1e-10
    grid = np.logspace(-3, 3, 200)
    checks["f_second<=1e-12 on grid"] = bool(np.all(specfun.f_second(grid) <= 1e-12))
    checks["g>=-1e-12 on grid"] = bool(np.all(specfun.g_appendix(grid) >= -1e-12))
    elapsed = time.perf_counter() - start
    failed = [k for k, v in checks.items() if not v]
    ok = not failed and elapsed < 5
    criterion(4, ok, (f"failed: {failed}" if failed else f"{len(checks)} checks hold")
              + f"; {elapsed:.2f} s")
    assert ok


def frontier(region, n=200001):
    """Points where neither coordinate can grow: the maximizer of an increasing
    objective lies on this curve."""
    e1 = np.linspace(0.0, region.solo_optimum()[0], n)
    with np.errstate(divide="ignore", invalid="ignore"):
        caps = (region.tau[:, None] - region.a[:, :1] * e1[None, :]) / region.a[:, 1:]
    caps = np.where(region.a[:, 1:] > 0, caps, np.inf)
    e2 = np.clip(np.minimum(1.0, caps.min(axis=0)), 0.0, 1.0)
    return np.stack([e1, e2], axis=1)


def test_criterion_5_solver_vs_grid(criterion):
    rng = np.random.default_rng(SEED + 5)
    start = time.perf_counter()
    worst = {}
    for problem in ("Problem1", "Problem3", "Problem5"):
        shortfall = -np.inf
        for _ in range(50):
            if problem == "Problem5":
                cfg, ch, model = random_ofdma_model(rng, 4, 2)
                region = FeasibleRegion(ofdma_constraint_matrix(ch),
                                        ofdma_budgets(ch, cfg.tau_policy, cfg.p0, cfg.sigma2))
                b = model.h_bar
                obj, oracle = LogDetObjective(b), lambda p: logdet2(b, p)  # noqa: E731
            else:
                cfg, ch, w, wh, region = sdma_case(rng, 4, 4, 2, 10 ** rng.uniform(-5, -1))
                if problem == "Problem1":
                    b = effective_channels(wh, draw_excitation(ch.h, w, cfg.p0, rng))
                    obj, oracle = LogDetObjective(b), lambda p: logdet2(b, p)  # noqa: E731
                else:
                    c = avg_qr_gains(wh, w, cfg.p0)
                    obj, oracle = AvgQrObjective(c), lambda p: avgqr_sum(c, p)  # noqa: E731
            res = maximize(obj.value, obj.grad, region, curvature=obj.curvature)
            assert region.violation(res.eta_star) <= 1e-9
            best = max(oracle(feasible_grid(region)).max(), oracle(frontier(region)).max())
            shortfall = max(shortfall, best - res.objective)
        worst[problem] = shortfall
    elapsed = time.perf_counter() - start
    ok = all(v <= 1e-4 for v in worst.values()) and elapsed < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(5, ok, f"largest oracle - solver objective: {detail}; {elapsed:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def desk_runs():
    start = time.perf_counter()
    runs = {name: SweepResult.concat([run_experiment(s) for s in fn("desk", 0)])
            for name, fn in (("fig1", fig1_specs), ("fig2", fig2_specs), ("fig3", fig3_specs))}
    return runs, time.perf_counter() - start


def test_criterion_6_dominance_and_protection(criterion, desk_runs):
    runs, _ = desk_runs
    trials = [t for res in runs.values() for t in res.trials]
    gap = max(t.max_dominance_gap for t in trials)
    violation = max(t.max_violation for t in trials)
    ok = gap <= 1e-9 and violation <= 1e-9
    criterion(6, ok, f"{len(trials)} desk trials: worst Approach II - Approach I {gap:.1e}, "
                     f"worst constraint violation {violation:.1e}")
    assert ok


def test_criterion_7_trends(criterion, desk_runs):
    runs, elapsed = desk_runs
    f1, f2, f3 = runs["fig1"], runs["fig2"], runs["fig3"]
    n = fig2_specs("desk")[0].config.n_antennas
    m_values = fig2_specs("desk")[0].sweep.values
    parts = {}
    parts["a"] = trends.combine(
        [trends.beats(f1, s, "OMA") for s in ("ApproachI", "ApproachII")]
        + [trends.beats(f2, s + c, "OMA" + c, values=[m for m in m_values if m >= 2])
           for s in ("ApproachI", "ApproachII") for c in ("@CaseI", "@CaseII")])
    parts["b"] = trends.combine(trends.monotone(f1, s, -1) for s in
                                 ("ApproachI", "ApproachI_RandomEta", "ApproachII", "OMA"))
    defined = all(trends.defined_values(f2, "ApproachII" + c) == [m for m in m_values if m <= n]
                  for c in ("@CaseI", "@CaseII"))
    parts["c"] = trends.combine(
        [trends.monotone(f2, "ApproachI" + c, +1) for c in ("@CaseI", "@CaseII")]
        + [(defined, "Approach II rows exactly for M <= N")])
    parts["d"] = trends.combine(trends.relative_spread(f2, "OMA" + c, 0.10)
                                 for c in ("@CaseI", "@CaseII"))
    parts["e"] = trends.combine(trends.not_below(f2, s + "@CaseII", s + "@CaseI")
                                 for s in ("ApproachI", "ApproachII"))
    parts["f"] = trends.combine([
        trends.beats(f3, "OFDMA_NOMA", "OFDMA_OMA", values=[m for m in m_values if m >= 2]),
        trends.monotone(f3, "OFDMA_NOMA", +1, strict=True)])
    parts["runtime"] = (elapsed < 900, f"{elapsed:.0f} s")
    failed = {k: d for k, (ok, d) in parts.items() if not ok}
    ok = not failed
    summary = " ".join(f"({k}) {'ok' if v[0] else 'FAIL'}" for k, v in parts.items())
    criterion(7, ok, f"{summary}; desk runs took {elapsed:.0f} s"
              + (f"; failures: {failed}" if failed else ""))
    assert ok, failed


def _cli(args, tmp_path, tag):
    out = tmp_path / f"{tag}.csv"
    proc = subprocess.run([sys.executable, "-m", "bacnoma", *args, "--out", str(out)],
                          capture_output=True, timeout=600)
    assert proc.returncode == 0, proc.stderr.decode()
    return out.read_bytes()


def test_criterion_8_determinism(criterion, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("n_antennas = 3\nn_downlink = 3\nsweep = n_devices: 1, 4\nn_trials = 3\n"
                   "n_excitations = 2\n")
    commands = {
        "fig1": ["fig1", "--trials", "2", "--seed", "7"],
        "fig2": ["fig2", "--trials", "2", "--seed", "7"],
        "fig3": ["fig3", "--trials", "3", "--seed", "7"],
        "simulate": ["simulate", "--config", str(cfg), "--seed", "7"],
        "rates": ["rates", "--seed", "7"],
    }
    differing = []
    for name, args in commands.items():
        first, second = _cli(args, tmp_path, name + "1"), _cli(args, tmp_path, name + "2")
        if first != second or not first:
            differing.append(name)
    runs = [subprocess.run([sys.executable, "-m", "bacnoma", "selftest", "--seed", "7"],
                           capture_output=True, timeout=600).stdout for _ in range(2)]
    if runs[0] != runs[1]:
        differing.append("selftest")
    ok = not differing
    criterion(8, ok, f"differing outputs: {differing}" if differing else
              f"{len(commands) + 1} subcommands byte-identical across two runs")
    assert ok
