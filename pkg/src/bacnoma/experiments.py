"""Figure presets and the flat ``key = value`` experiment file format."""

from __future__ import annotations

import dataclasses
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from .config import CASE_I, CASE_II, FixedTau, SystemConfig, TargetRate
from .errors import ConfigError
from .harness import (ALL_SCHEMES, OFDMA_SCHEMES, SDMA_SCHEMES, AlphaSweep, DeviceSweep,
                      ExperimentSpec, Fixed)
from .solver import SolverOptions

SCALES = ("desk", "paper")

# (N = K, device counts, trials, excitations)
_FIG1 = {"desk": (4, 4, 200, 10), "paper": (10, 10, 1000, 10)}
_FIG1_ALPHAS = {"desk": (1e-4, 1e-3, 1e-2), "paper": (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)}
_FIG2 = {"desk": (4, tuple(range(1, 9)), 200, 10), "paper": (10, tuple(range(1, 17)), 1000, 10)}
_FIG3 = {"desk": (4, tuple(range(1, 9)), 200), "paper": (16, tuple(range(1, 17)), 1000)}


def _check_scale(scale: str) -> None:
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale!r}")


def fig1_specs(scale: str = "desk", seed: int = 0, trials: Optional[int] = None,
               base: Optional[SystemConfig] = None) -> List[ExperimentSpec]:
    """Self-interference sweep, Case I."""
    _check_scale(scale)
    n, m, n_trials, n_exc = _FIG1[scale]
    cfg = replace(base or SystemConfig(), n_antennas=n, n_downlink=n, n_devices=m,
                  geometry_case=CASE_I, rng_seed=seed)
    return [ExperimentSpec(cfg, AlphaSweep(_FIG1_ALPHAS[scale]), trials or n_trials, n_exc,
                           SDMA_SCHEMES)]


def fig2_specs(scale: str = "desk", seed: int = 0, trials: Optional[int] = None,
               base: Optional[SystemConfig] = None) -> List[ExperimentSpec]:
    """Device-count sweep at alpha = 1e-3 for both user placements.

    Both cases share the seed, so they see the same fading and device draws.
    """
    _check_scale(scale)
    n, ms, n_trials, n_exc = _FIG2[scale]
    specs = []
    for case in (CASE_I, CASE_II):
        cfg = replace(base or SystemConfig(), n_antennas=n, n_downlink=n, alpha=1e-3,
                      geometry_case=case, rng_seed=seed)
        specs.append(ExperimentSpec(cfg, DeviceSweep(ms), trials or n_trials, n_exc,
                                    SDMA_SCHEMES, label=f"@Case{case}"))
    return specs


def fig3_specs(scale: str = "desk", seed: int = 0, trials: Optional[int] = None,
               base: Optional[SystemConfig] = None) -> List[ExperimentSpec]:
    """OFDMA device-count sweep, Case I; rates are normalized by K."""
    _check_scale(scale)
    k, ms, n_trials = _FIG3[scale]
    cfg = replace(base or SystemConfig(), n_antennas=k, n_downlink=k,
                  geometry_case=CASE_I, rng_seed=seed)
    return [ExperimentSpec(cfg, DeviceSweep(ms), trials or n_trials, 1, OFDMA_SCHEMES)]


FIGURES = {"fig1": fig1_specs, "fig2": fig2_specs, "fig3": fig3_specs}


# --- config files ----------------------------------------------------------

_SYSTEM_KEYS = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_SPEC_KEYS = ("sweep", "n_trials", "n_excitations", "schemes", "label")
_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverOptions)}
_UNSUPPORTED = {"c_si"}  # matrices do not fit a flat file


def _parse_tau_policy(text: str):
    kind, _, val = text.partition(" ")
    vals = [float(v) for v in val.replace(",", " ").split()]
    if kind == "fixed" and len(vals) == 1:
        return FixedTau(vals[0])
    if kind == "target" and vals:
        return TargetRate(vals[0] if len(vals) == 1 else tuple(vals))
    raise ValueError("expected 'fixed <tau>' or 'target <rate>[,<rate>...]'")


def _parse_sweep(text: str):
    param, _, vals = text.partition(":")
    param = param.strip()
    if param == "none":
        if vals.strip():
            raise ValueError("sweep 'none' takes no values")
        return Fixed()
    items = [v for v in vals.replace(",", " ").split()]
    if not items:
        raise ValueError("sweep needs values, e.g. 'alpha: 1e-4, 1e-3'")
    if param == "alpha":
        return AlphaSweep(tuple(float(v) for v in items))
    if param == "n_devices":
        return DeviceSweep(tuple(int(v) for v in items))
    raise ValueError(f"unknown sweep parameter {param!r} (alpha, n_devices or none)")


def _convert(key: str, text: str):
    if key == "tau_policy":
        return _parse_tau_policy(text)
    if key == "sweep":
        return _parse_sweep(text)
    if key == "schemes":
        names = tuple(s for s in text.replace(",", " ").split())
        bad = [s for s in names if s not in ALL_SCHEMES]
        if bad or not names:
            raise ValueError(f"unknown schemes {bad}; choose from {', '.join(ALL_SCHEMES)}")
        return names
    if key in ("geometry_case", "interference_norm", "label", "projection"):
        return text
    if key in ("n_antennas", "n_downlink", "n_devices", "rng_seed", "n_trials",
               "n_excitations", "max_iters", "dykstra_max_cycles"):
        return int(text)
    return float(text)


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Tuple[int, object]]:
    """Parse into ``{key: (line, value)}``; errors name the line and key."""
    out: Dict[str, Tuple[int, object]] = {}
    known = set(_SYSTEM_KEYS) | set(_SPEC_KEYS) | _SOLVER_KEYS
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in _UNSUPPORTED:
            raise ConfigError(f"{source}:{lineno}: key {key!r} cannot be set from a config file")
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {out[key][0]})")
        try:
            out[key] = (lineno, _convert(key, val))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def system_from_entries(entries, base: Optional[SystemConfig] = None,
                        source: str = "<config>") -> SystemConfig:
    kw = {k: v for k, (_, v) in entries.items() if k in _SYSTEM_KEYS}
    try:
        return replace(base or SystemConfig(), **kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def spec_from_entries(entries, source: str = "<config>") -> ExperimentSpec:
    cfg = system_from_entries(entries, source=source)
    solver = SolverOptions(**{k: v for k, (_, v) in entries.items() if k in _SOLVER_KEYS})
    kw = {k: v for k, (_, v) in entries.items() if k in _SPEC_KEYS}
    try:
        return ExperimentSpec(cfg, solver=solver, **kw)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_config(path) -> Dict[str, Tuple[int, object]]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def load_spec(path) -> ExperimentSpec:
    return spec_from_entries(read_config(path), str(path))
