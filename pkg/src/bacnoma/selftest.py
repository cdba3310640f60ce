"""Quick built-in oracle checks behind ``bacnoma selftest``.

These are small, dependency-free versions of the checks in the test suite,
meant for verifying an installation.  The full suites run under pytest.
"""

from __future__ import annotations

import logging
import time
from dataclasses import replace
from typing import Callable, List, Tuple

import numpy as np

from . import ofdma, specfun
from .config import SystemConfig
from .geometry import complex_normal, prewhiten, sample_geometry, sample_sdma_channels
from .legacy import build_beamformers, interference_budgets, interference_matrix
from .mac import LogDetObjective, sic_rates
from .sdma import (AvgQrObjective, avg_qr_gains, draw_excitation, effective_channels,
                   qr_diagonal_sq)
from .solver import FeasibleRegion, maximize

log = logging.getLogger(__name__)


def _instance(rng, m=3):
    cfg = SystemConfig(n_devices=m)
    ch = sample_sdma_channels(cfg, sample_geometry(cfg, rng), rng)
    w = build_beamformers(ch)
    return cfg, ch, w, prewhiten(cfg, ch)


def check_chain_rule(rng) -> bool:
    for _ in range(50):
        b = complex_normal(rng, (4, int(rng.integers(1, 7))), 10.0)
        eta = rng.uniform(size=b.shape[1])
        order = rng.permutation(b.shape[1])
        total = LogDetObjective(b).value(eta)
        if abs(sic_rates(b, eta, order).sum - total) > 1e-9 * max(1.0, total):
            return False
    return True


def check_f_integral(rng) -> bool:
    # f(x) = int_0^inf e^-t ln(1 + x t) dt, by the substitution t = s / (1 - s)
    s = np.linspace(0.0, 1.0, 200001)[1:-1]
    t = s / (1.0 - s)
    jac = 1.0 / (1.0 - s) ** 2
    for x in (0.05, 1.0, 20.0):
        val = np.trapezoid(np.exp(-t) * np.log1p(x * t) * jac, s)
        if abs(val - specfun.f(x)) > 1e-6 * max(1.0, val):
            return False
    return True


def check_concavity(rng) -> bool:
    xs = np.logspace(-3, 3, 200)
    return bool(np.all(specfun.f_second(xs) <= 1e-12) and np.all(specfun.g_appendix(xs) >= -1e-12))


def check_average_rate(rng) -> bool:
    cfg, ch, w, wh = _instance(rng)
    eta = rng.uniform(size=ch.n_devices)
    closed = AvgQrObjective(avg_qr_gains(wh, w, cfg.p0)).value(eta)
    r2 = qr_diagonal_sq(wh)
    s0 = np.array([draw_excitation(ch.h, w, cfg.p0, rng).s0_gain for _ in range(20000)])
    draws = np.log2(1.0 + r2 * eta * np.abs(s0) ** 2).sum(axis=1)
    return abs(draws.mean() - closed) <= 4.0 * draws.std(ddof=1) / np.sqrt(draws.size)


def check_solver_grid(rng) -> bool:
    cfg, ch, w, wh = _instance(rng, m=2)
    tau = interference_budgets(ch, w, cfg.tau_policy, cfg.p0, cfg.sigma2)
    region = FeasibleRegion(interference_matrix(ch, w), tau)
    obj = LogDetObjective(effective_channels(wh, draw_excitation(ch.h, w, cfg.p0, rng)))
    res = maximize(obj.value, obj.grad, region, curvature=obj.curvature)
    # objective is increasing in each eta, so the optimum lies on the frontier
    e1 = np.linspace(0.0, region.solo_optimum()[0], 20001)
    caps = (region.tau[:, None] - region.a[:, :1] * e1[None, :]) / np.where(
        region.a[:, 1:] > 0, region.a[:, 1:], np.inf)
    e2 = np.clip(np.minimum(1.0, caps.min(axis=0)), 0.0, 1.0)
    best = max(obj.value(np.array([a, b])) for a, b in zip(e1, e2))
    return res.converged and res.objective >= best - 1e-4 and region.violation(res.eta_star) <= 1e-9


def check_ofdma_chain_rule(rng) -> bool:
    cfg = replace(SystemConfig(), n_devices=5)
    ch = ofdma.draw_ofdma(cfg, rng)
    model = ofdma.build_stacked_mac(ch, complex_normal(rng, ch.n_subcarriers), cfg.p0,
                                    cfg.alpha, cfg.sigma2)
    eta = rng.uniform(size=ch.n_devices)
    total = ofdma.sum_capacity_ofdma(model, eta)
    got = ofdma.sic_rates_ofdma(model, eta, rng.permutation(ch.n_devices)).sum
    return abs(got - total) <= 1e-9 * max(1.0, total)


CHECKS: List[Tuple[str, Callable]] = [
    ("MAC chain rule (SDMA)", check_chain_rule),
    ("MAC chain rule (OFDMA)", check_ofdma_chain_rule),
    ("f against numerical integral", check_f_integral),
    ("f'' <= 0 and g >= 0 on a log grid", check_concavity),
    ("closed-form average QR rate vs Monte Carlo", check_average_rate),
    ("solver vs frontier grid search, M = 2", check_solver_grid),
]


def run(seed: int = 0, out=print) -> bool:
    ok_all = True
    for i, (name, fn) in enumerate(CHECKS):
        t0 = time.perf_counter()
        ok = bool(fn(np.random.default_rng([seed, i])))
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}")
        log.info("%s took %.2f s", name, time.perf_counter() - t0)
    return ok_all
