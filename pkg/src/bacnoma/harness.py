"""Monte Carlo experiment driver.

Each trial owns a child random stream derived from ``(seed, trial)``.  Within
a trial the channels are drawn once for the largest device count and sliced,
and the same channels and legacy symbols are reused for every sweep value, so
differences between sweep points are paired rather than independent.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import ofdma
from .config import SystemConfig
from .errors import DegenerateChannelError, InfeasibleTargetError
from .geometry import complex_normal, prewhiten, sample_geometry, sample_sdma_channels
from .legacy import build_beamformers, downlink_rates_sdma, interference_budgets, interference_matrix
from .mac import LogDetObjective
from .sdma import (AvgQrObjective, ExcitationRealization, avg_qr_gains, effective_channels,
                   qr_rates_approach2)
from .solver import FeasibleRegion, SolverOptions, maximize, random_feasible

log = logging.getLogger(__name__)

APPROACH_I = "ApproachI"
APPROACH_I_RANDOM = "ApproachI_RandomEta"
APPROACH_II = "ApproachII"
OMA = "OMA"
OFDMA_NOMA = "OFDMA_NOMA"
OFDMA_NOMA_RANDOM = "OFDMA_NOMA_RandomEta"
OFDMA_OMA = "OFDMA_OMA"

SDMA_SCHEMES = (APPROACH_I, APPROACH_I_RANDOM, APPROACH_II, OMA)
OFDMA_SCHEMES = (OFDMA_NOMA, OFDMA_NOMA_RANDOM, OFDMA_OMA)
ALL_SCHEMES = SDMA_SCHEMES + OFDMA_SCHEMES

CSV_HEADER = ("sweep_param,sweep_value,scheme,mean_bpcu,stderr_bpcu,"
              "mean_downlink_bpcu,feasible_frac,n_trials")
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class AlphaSweep:
    values: Tuple[float, ...]
    param = "alpha"


@dataclass(frozen=True)
class DeviceSweep:
    values: Tuple[int, ...]
    param = "n_devices"


@dataclass(frozen=True)
class Fixed:
    param = "none"

    @property
    def values(self) -> Tuple[float, ...]:
        return (0.0,)


Sweep = Union[AlphaSweep, DeviceSweep, Fixed]


@dataclass
class ExperimentSpec:
    config: SystemConfig
    sweep: Sweep = field(default_factory=Fixed)
    n_trials: int = 200
    n_excitations: int = 10
    schemes: Tuple[str, ...] = SDMA_SCHEMES
    solver: SolverOptions = field(default_factory=SolverOptions)
    # appended to the scheme name in the output, e.g. "@CaseII"
    label: str = ""

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        bad = [s for s in self.schemes if s not in ALL_SCHEMES]
        if bad:
            raise ValueError(f"unknown schemes {bad}")
        if self.n_trials < 1 or self.n_excitations < 1:
            raise ValueError("n_trials and n_excitations must be >= 1")
        if isinstance(self.sweep, DeviceSweep) and min(self.sweep.values) < 1:
            raise ValueError("device counts must be >= 1")
        if isinstance(self.sweep, AlphaSweep) and not all(0 <= a <= 1 for a in self.sweep.values):
            raise ValueError("alpha values must lie in [0, 1]")

    @property
    def max_devices(self) -> int:
        if isinstance(self.sweep, DeviceSweep):
            return max(self.sweep.values)
        return self.config.n_devices

    def config_at(self, value) -> SystemConfig:
        if isinstance(self.sweep, AlphaSweep):
            return replace(self.config, alpha=float(value))
        if isinstance(self.sweep, DeviceSweep):
            return replace(self.config, n_devices=int(value))
        return self.config


@dataclass
class Outcome:
    """One scheme on one trial at one sweep value."""

    rate: float
    downlink: float
    feasible: bool = True


@dataclass
class TrialRecord:
    trial: int
    redraws: int
    outcomes: Dict[Tuple[float, str], Outcome]
    # worst scaled constraint violation over every returned eta
    max_violation: float = 0.0
    # worst (Approach II instantaneous rate - Approach I capacity) over excitations
    max_dominance_gap: float = -np.inf
    unconverged: int = 0


@dataclass
class SweepRow:
    sweep_param: str
    sweep_value: float
    scheme: str
    mean_bpcu: float
    stderr_bpcu: float
    mean_downlink_bpcu: float
    feasible_frac: float
    n_trials: int


@dataclass
class SweepResult:
    rows: List[SweepRow]
    trials: List[TrialRecord] = field(default_factory=list, repr=False)

    def row(self, value, scheme: str) -> SweepRow:
        for r in self.rows:
            if r.scheme == scheme and np.isclose(r.sweep_value, value, rtol=0, atol=1e-15):
                return r
        raise KeyError((value, scheme))

    def series(self, scheme: str) -> List[SweepRow]:
        return [r for r in self.rows if r.scheme == scheme]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r.sweep_param},{r.sweep_value:.10e},{r.scheme},{r.mean_bpcu:.10e},"
                         f"{r.stderr_bpcu:.10e},{r.mean_downlink_bpcu:.10e},"
                         f"{r.feasible_frac:.10e},{r.n_trials}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write(self.to_csv())

    @staticmethod
    def concat(results: Sequence["SweepResult"]) -> "SweepResult":
        return SweepResult([r for res in results for r in res.rows],
                           [t for res in results for t in res.trials])


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), int(stream)]))


def oma_baseline(wh, w: np.ndarray, region: FeasibleRegion,
                 excitations: Sequence[ExcitationRealization]) -> float:
    """Time sharing: each device transmits alone for 1/M of the time at its
    largest feasible reflection coefficient; averaged over the excitations."""
    solo = region.solo_optimum()
    gain = np.sum(np.abs(wh.h_tilde) ** 2, axis=1)
    rates = [np.mean(np.log2(1.0 + solo * np.abs(exc.s0_gain) ** 2 * gain)) for exc in excitations]
    return float(np.mean(rates))


def _solve(obj, region: FeasibleRegion, opts: SolverOptions, rec: TrialRecord):
    res = maximize(obj.value, obj.grad, region, opts, curvature=obj.curvature)
    if not res.converged:
        rec.unconverged += 1
    rec.max_violation = max(rec.max_violation, region.violation(res.eta_star))
    return res


def _sdma_trial(spec: ExperimentSpec, rng: np.random.Generator, rec: TrialRecord,
                eta_rng_seed: Tuple[int, int]) -> None:
    base = spec.config
    m_max = spec.max_devices
    for redraw in range(MAX_REDRAWS):
        pos = sample_geometry(base, rng, m_max)
        full = sample_sdma_channels(base, pos, rng)
        try:
            w = build_beamformers(full)
            break
        except DegenerateChannelError:
            rec.redraws += 1
    else:
        raise DegenerateChannelError("too many degenerate channel draws")
    xs = complex_normal(rng, (spec.n_excitations, base.n_downlink))
    p0, sigma2 = base.p0, base.sigma2
    wanted = [s for s in spec.schemes if s in SDMA_SCHEMES]

    for value in spec.sweep.values:
        cfg = spec.config_at(value)
        ch = full.first_devices(cfg.n_devices)
        m = ch.n_devices
        try:
            tau = interference_budgets(ch, w, cfg.tau_policy, p0, sigma2)
        except InfeasibleTargetError:
            for s in wanted:
                rec.outcomes[(value, s)] = Outcome(0.0, 0.0, feasible=False)
            continue
        region = FeasibleRegion(interference_matrix(ch, w), tau)
        wh = prewhiten(cfg, ch)
        excs = [ExcitationRealization.from_symbols(ch.h, w, x, p0) for x in xs]
        objs = [LogDetObjective(effective_channels(wh, e)) for e in excs]
        dl = lambda eta: float(np.mean(downlink_rates_sdma(ch, w, eta, p0, sigma2)))  # noqa: E731

        caps = None
        if APPROACH_I in wanted or APPROACH_II in wanted:
            sols = [_solve(o, region, spec.solver, rec) for o in objs]
            caps = np.array([r.objective for r in sols])
            if APPROACH_I in wanted:
                rec.outcomes[(value, APPROACH_I)] = Outcome(
                    float(np.mean(caps)), float(np.mean([dl(r.eta_star) for r in sols])))
        if APPROACH_I_RANDOM in wanted:
            eta = random_feasible(region, trial_rng(*eta_rng_seed, stream=1))
            rate = float(np.mean([o.value(eta) for o in objs]))
            rec.max_violation = max(rec.max_violation, region.violation(eta))
            rec.outcomes[(value, APPROACH_I_RANDOM)] = Outcome(rate, dl(eta))
        if APPROACH_II in wanted and m <= cfg.n_antennas:
            obj = AvgQrObjective(avg_qr_gains(wh, w, p0))
            res = _solve(obj, region, spec.solver, rec)
            rec.outcomes[(value, APPROACH_II)] = Outcome(res.objective, dl(res.eta_star))
            for e, cap in zip(excs, caps):
                inst = qr_rates_approach2(wh, e, res.eta_star).sum
                rec.max_dominance_gap = max(rec.max_dominance_gap, inst - cap)
        if OMA in wanted:
            solo = region.solo_optimum()
            dl_oma = float(np.mean([dl(solo * (np.arange(m) == i)) for i in range(m)]))
            rec.outcomes[(value, OMA)] = Outcome(oma_baseline(wh, w, region, excs), dl_oma)


def _ofdma_trial(spec: ExperimentSpec, rng: np.random.Generator, rec: TrialRecord,
                 eta_rng_seed: Tuple[int, int]) -> None:
    base = spec.config
    full = ofdma.draw_ofdma(base, rng, spec.max_devices)
    k = full.n_subcarriers
    x = complex_normal(rng, k)
    p0, sigma2 = base.p0, base.sigma2
    wanted = [s for s in spec.schemes if s in OFDMA_SCHEMES]

    for value in spec.sweep.values:
        cfg = spec.config_at(value)
        ch = full.first_devices(cfg.n_devices)
        m = ch.n_devices
        try:
            tau = ofdma.ofdma_budgets(ch, cfg.tau_policy, p0, sigma2)
        except InfeasibleTargetError:
            for s in wanted:
                rec.outcomes[(value, s)] = Outcome(0.0, 0.0, feasible=False)
            continue
        region = FeasibleRegion(ofdma.ofdma_constraint_matrix(ch), tau)
        model = ofdma.build_stacked_mac(ch, x, p0, cfg.alpha, sigma2)
        obj = LogDetObjective(model.h_bar)
        dl = lambda eta: float(np.mean(ofdma.downlink_rates_ofdma(ch, eta, p0, sigma2)))  # noqa: E731

        if OFDMA_NOMA in wanted:
            res = _solve(obj, region, spec.solver, rec)
            rec.outcomes[(value, OFDMA_NOMA)] = Outcome(res.objective / k, dl(res.eta_star))
        if OFDMA_NOMA_RANDOM in wanted:
            eta = random_feasible(region, trial_rng(*eta_rng_seed, stream=1))
            rec.max_violation = max(rec.max_violation, region.violation(eta))
            rec.outcomes[(value, OFDMA_NOMA_RANDOM)] = Outcome(obj.value(eta) / k, dl(eta))
        if OFDMA_OMA in wanted:
            solo = region.solo_optimum()
            gains = np.sum(np.abs(model.h_bar) ** 2, axis=0)
            rate = float(np.mean(np.log2(1.0 + solo * gains))) / k
            dl_oma = float(np.mean([dl(solo * (np.arange(m) == i)) for i in range(m)]))
            rec.outcomes[(value, OFDMA_OMA)] = Outcome(rate, dl_oma)


def run_trial(spec: ExperimentSpec, trial: int) -> TrialRecord:
    seed = spec.config.rng_seed
    rec = TrialRecord(trial, 0, {})
    if any(s in SDMA_SCHEMES for s in spec.schemes):
        _sdma_trial(spec, trial_rng(seed, trial), rec, (seed, trial))
    if any(s in OFDMA_SCHEMES for s in spec.schemes):
        _ofdma_trial(spec, trial_rng(seed, trial, stream=2), rec, (seed, trial))
    if rec.redraws:
        log.info("trial %d: %d degenerate channel redraws", trial, rec.redraws)
    return rec


def worker_count() -> int:
    """``BACNOMA_THREADS`` caps the number of worker processes; 0 or unset means one per CPU."""
    raw = os.environ.get("BACNOMA_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"BACNOMA_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("BACNOMA_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _aggregate(spec: ExperimentSpec, records: Sequence[TrialRecord]) -> List[SweepRow]:
    rows = []
    for value in spec.sweep.values:
        for scheme in spec.schemes:
            outs = [r.outcomes[(value, scheme)] for r in records if (value, scheme) in r.outcomes]
            if not outs:
                continue  # scheme undefined here (Approach II with M > N)
            ok = [o for o in outs if o.feasible]
            n = len(ok)
            rates = np.array([o.rate for o in ok])
            dls = np.array([o.downlink for o in ok])
            mean = float(np.sum(rates) / n) if n else float("nan")
            se = float(np.std(rates, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            dl = float(np.sum(dls) / n) if n else float("nan")
            rows.append(SweepRow(spec.sweep.param, float(value), scheme + spec.label, mean, se, dl,
                                 n / len(outs), n))
    return rows


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> SweepResult:
    workers = worker_count() if workers is None else max(1, int(workers))
    trials = range(spec.n_trials)
    if workers == 1 or spec.n_trials == 1:
        records = [run_trial(spec, t) for t in trials]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, spec.n_trials)) as pool:
            records = list(pool.map(run_trial, [spec] * spec.n_trials, trials,
                                    chunksize=max(1, spec.n_trials // (4 * workers))))
    redraws = sum(r.redraws for r in records)
    if redraws:
        log.info("%d degenerate channel redraws in total", redraws)
    unconverged = sum(r.unconverged for r in records)
    if unconverged:
        log.warning("%d solver runs stopped before convergence", unconverged)
    return SweepResult(_aggregate(spec, records), list(records))
