"""Command-line entry point: ``python -m bacnoma <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from . import channel_io, selftest
from .config import SystemConfig
from .errors import ConfigError, DataError, DegenerateChannelError, InfeasibleTargetError
from .experiments import FIGURES, SCALES, load_spec, read_config, system_from_entries
from .geometry import (SdmaChannelSet, complex_normal, prewhiten, sample_geometry,
                       sample_sdma_channels)
from .harness import SweepResult, run_experiment
from .legacy import build_beamformers, downlink_rates_sdma, interference_budgets, interference_matrix
from .mac import LOG2E, LogDetObjective, sic_rates
from .sdma import AvgQrObjective, ExcitationRealization, avg_qr_gains, effective_channels
from .solver import FeasibleRegion, maximize
from .specfun import f

log = logging.getLogger("bacnoma")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' experiment file")
    common.add_argument("--seed", type=_seed, default=None, help="root random seed")
    common.add_argument("--trials", type=_positive, default=None, help="Monte Carlo trials")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--scale", choices=SCALES, default="desk")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bacnoma", description="BackCom NOMA link-level simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common], help="self-interference sweep, Case I")
    sub.add_parser("fig2", parents=[common], help="device-count sweep, Cases I and II")
    sub.add_parser("fig3", parents=[common], help="OFDMA device-count sweep")
    sub.add_parser("simulate", parents=[common], help="experiment described by --config")
    sub.add_parser("selftest", parents=[common], help="quick built-in oracle checks")
    rates = sub.add_parser("rates", parents=[common],
                           help="optimized rates for one SDMA channel realization")
    rates.add_argument("--channels", help="channel dump to read (default: draw one)")
    rates.add_argument("--save-channels", help="write the channel realization used")
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n", encoding="ascii") as fh:
        fh.write(text)


def _run_figure(args) -> str:
    base = None
    if args.config:
        entries = read_config(args.config)
        extra = [k for k in entries if k not in SystemConfig.__dataclass_fields__]
        if extra:
            line = entries[extra[0]][0]
            raise ConfigError(f"{args.config}:{line}: key {extra[0]!r} is not a system "
                              f"parameter; figure presets fix the experiment layout")
        base = system_from_entries(entries, source=args.config)
    seed = args.seed if args.seed is not None else (base.rng_seed if base else 0)
    specs = FIGURES[args.command](args.scale, seed, args.trials, base)
    return SweepResult.concat([run_experiment(s) for s in specs]).to_csv()


def _run_simulate(args) -> str:
    if not args.config:
        raise ConfigError("simulate needs --config <path>")
    spec = load_spec(args.config)
    if args.seed is not None:
        spec.config = replace(spec.config, rng_seed=args.seed)
    if args.trials is not None:
        spec.n_trials = args.trials
    return run_experiment(spec).to_csv()


def _run_rates(args) -> str:
    cfg = system_from_entries(read_config(args.config), source=args.config) if args.config \
        else SystemConfig()
    seed = args.seed if args.seed is not None else cfg.rng_seed
    # separate streams so a reloaded dump sees the same legacy symbols
    rng = np.random.default_rng([seed, 0])
    if args.channels:
        ch = channel_io.load(args.channels)
        if not isinstance(ch, SdmaChannelSet):
            raise DataError(f"{args.channels}: rates needs an SDMA dump")
        cfg = replace(cfg, n_antennas=ch.n_antennas, n_downlink=ch.n_downlink,
                      n_devices=ch.n_devices, c_si=ch.c_si)
    else:
        ch = sample_sdma_channels(cfg, sample_geometry(cfg, rng), rng)
    if args.save_channels:
        channel_io.save(ch, args.save_channels)

    w = build_beamformers(ch)
    tau = interference_budgets(ch, w, cfg.tau_policy, cfg.p0, cfg.sigma2)
    region = FeasibleRegion(interference_matrix(ch, w), tau)
    wh = prewhiten(cfg, ch)
    exc = ExcitationRealization.from_symbols(ch.h, w, complex_normal(np.random.default_rng([seed, 1]), ch.n_downlink),
                                             cfg.p0)
    b = effective_channels(wh, exc)
    obj1 = LogDetObjective(b)
    res1 = maximize(obj1.value, obj1.grad, region, curvature=obj1.curvature)
    lines = ["scheme,index,eta,rate_bpcu"]
    rep = sic_rates(b, res1.eta_star)
    lines += [f"ApproachI,{m},{e:.10e},{r:.10e}" for m, (e, r) in
              enumerate(zip(res1.eta_star, rep.per_device))]
    dl = downlink_rates_sdma(ch, w, res1.eta_star, cfg.p0, cfg.sigma2)
    lines += [f"ApproachI_downlink,{k},,{r:.10e}" for k, r in enumerate(dl)]
    if ch.n_devices <= ch.n_antennas:
        obj2 = AvgQrObjective(avg_qr_gains(wh, w, cfg.p0))
        res2 = maximize(obj2.value, obj2.grad, region, curvature=obj2.curvature)
        per = obj2.c * res2.eta_star
        lines += [f"ApproachII_avg,{m},{e:.10e},{LOG2E * f(x):.10e}" for m, (e, x) in
                  enumerate(zip(res2.eta_star, per))]
    return "\n".join(lines) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "selftest":
            ok = selftest.run(args.seed or 0)
            return 0 if ok else 1
        if args.command in FIGURES:
            text = _run_figure(args)
        elif args.command == "simulate":
            text = _run_simulate(args)
        else:
            text = _run_rates(args)
        _emit(text, args.out)
    except (ConfigError, DataError, InfeasibleTargetError, DegenerateChannelError) as exc:
        print(f"bacnoma: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bacnoma: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
