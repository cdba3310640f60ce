"""System configuration shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class FixedTau:
    """Same interference budget for every downlink user."""

    tau: float = 0.01


@dataclass(frozen=True)
class TargetRate:
    """Per-user downlink target rate in bits/channel-use (scalar broadcasts)."""

    rate: Union[float, Sequence[float]] = 1.0


TauPolicy = Union[FixedTau, TargetRate]

CASE_I = "I"
CASE_II = "II"

#: Centre of the downlink-user square for each geometry case, metres.
USER_SQUARE_CENTER = {CASE_I: (0.0, 0.0), CASE_II: (3.0, 0.0)}


@dataclass
class SystemConfig:
    n_antennas: int = 4
    n_downlink: int = 4
    n_devices: int = 4
    p0_dbm: float = 20.0
    alpha: float = 1e-3
    noise_dbm: float = -94.0
    path_loss_exp: float = 3.0
    tau_policy: TauPolicy = field(default_factory=FixedTau)
    geometry_case: str = CASE_I
    side_m: float = 6.0
    rng_seed: int = 0
    d_min: float = 1.0
    # None -> identity (trace N); otherwise an N x N Hermitian PSD matrix
    c_si: Optional[np.ndarray] = None
    interference_norm: str = "vector_norm"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_antennas < 1 or self.n_downlink < 1 or self.n_devices < 1:
            raise ConfigError("n_antennas, n_downlink and n_devices must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.side_m <= 0:
            raise ConfigError(f"side_m must be positive, got {self.side_m}")
        if self.geometry_case not in USER_SQUARE_CENTER:
            raise ConfigError(f"geometry_case must be 'I' or 'II', got {self.geometry_case!r}")
        if self.d_min <= 0:
            raise ConfigError("d_min must be positive")
        if self.interference_norm != "vector_norm":
            raise ConfigError("only interference_norm = vector_norm is supported")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be a nonnegative integer")
        if isinstance(self.tau_policy, FixedTau) and self.tau_policy.tau < 0:
            raise ConfigError("FixedTau budget must be nonnegative")

    @property
    def p0(self) -> float:
        """Base-station transmit power in watts."""
        return dbm_to_watts(self.p0_dbm)

    @property
    def sigma2(self) -> float:
        """Noise power in watts."""
        return dbm_to_watts(self.noise_dbm)

    def self_interference_cov(self) -> np.ndarray:
        if self.c_si is None:
            return np.eye(self.n_antennas, dtype=complex)
        c = np.asarray(self.c_si, dtype=complex)
        if c.shape != (self.n_antennas, self.n_antennas):
            raise ConfigError(f"c_si must be {self.n_antennas}x{self.n_antennas}")
        return c
