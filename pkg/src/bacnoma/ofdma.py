"""BackCom NOMA over an OFDMA legacy downlink with one user per subcarrier.

Subcarrier k carries downlink user k.  Every device reflects all K
subcarriers, so at the base station the K whitened observations stack into a
K-dimensional MAC with effective channel matrix ``H_bar`` (K x M).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import FixedTau, SystemConfig, TargetRate, TauPolicy
from .errors import InfeasibleTargetError
from .geometry import Positions, _dist, complex_normal, path_loss, sample_geometry
from .mac import LogDetObjective, RateReport, sic_rates


@dataclass
class OfdmaChannelSet:
    """Scalar per-subcarrier gains.  Matrices are indexed [device m, subcarrier k]."""

    g_dl: np.ndarray  # (K,)   BS -> user k
    h_fwd: np.ndarray  # (M, K) BS -> device m
    g_cross: np.ndarray  # (M, K) device m -> user k
    f_bwd: np.ndarray  # (M, K) device m -> BS
    h_si: np.ndarray  # (K,)   self-interference channel
    positions: Optional[Positions] = None

    @property
    def n_subcarriers(self) -> int:
        return self.g_dl.shape[0]

    @property
    def n_devices(self) -> int:
        return self.h_fwd.shape[0]

    def first_devices(self, m: int) -> "OfdmaChannelSet":
        pos = self.positions
        if pos is not None:
            pos = Positions(pos.bs, pos.users, pos.devices[:m])
        return OfdmaChannelSet(self.g_dl, self.h_fwd[:m], self.g_cross[:m], self.f_bwd[:m],
                               self.h_si, pos)


def sample_ofdma_channels(cfg: SystemConfig, positions: Positions,
                          rng: np.random.Generator) -> OfdmaChannelSet:
    """I.i.d. Rayleigh gains per subcarrier; ``h_si`` is unit-variance.

    The forward and backward device links share a distance but fade
    independently.
    """
    k = positions.users.shape[0]
    m = positions.devices.shape[0]
    bs = positions.bs[None, :]
    pl = lambda d: path_loss(d, cfg.path_loss_exp, cfg.d_min)  # noqa: E731

    var_g = pl(_dist(positions.users, bs))[:, 0]  # (K,)
    var_dev = pl(_dist(positions.devices, bs))  # (M, 1)
    var_cross = pl(_dist(positions.devices, positions.users))  # (M, K)

    g_dl = complex_normal(rng, k, var_g)
    h_fwd = complex_normal(rng, (m, k), var_dev)
    g_cross = complex_normal(rng, (m, k), var_cross)
    f_bwd = complex_normal(rng, (m, k), var_dev)
    h_si = complex_normal(rng, k)
    return OfdmaChannelSet(g_dl, h_fwd, g_cross, f_bwd, h_si, positions)


def draw_ofdma(cfg: SystemConfig, rng: np.random.Generator,
               n_devices: Optional[int] = None) -> OfdmaChannelSet:
    return sample_ofdma_channels(cfg, sample_geometry(cfg, rng, n_devices), rng)


def ofdma_constraint_row(ch: OfdmaChannelSet, k: int) -> np.ndarray:
    """``a_{k,m} = |G_{m,k}|^2 |H_{m,k}|^2``."""
    return np.abs(ch.g_cross[:, k]) ** 2 * np.abs(ch.h_fwd[:, k]) ** 2


def ofdma_constraint_matrix(ch: OfdmaChannelSet) -> np.ndarray:
    """All K rows at once, shape (K, M)."""
    return (np.abs(ch.g_cross) ** 2 * np.abs(ch.h_fwd) ** 2).T


def downlink_rate_ofdma(ch: OfdmaChannelSet, eta, p0: float, sigma2: float, k: int) -> float:
    eta = np.asarray(eta, dtype=float)
    inter = p0 * float(ofdma_constraint_row(ch, k) @ eta)
    return float(np.log2(1.0 + p0 * abs(ch.g_dl[k]) ** 2 / (inter + sigma2)))


def downlink_rates_ofdma(ch: OfdmaChannelSet, eta, p0: float, sigma2: float) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    inter = p0 * (ofdma_constraint_matrix(ch) @ eta)
    return np.log2(1.0 + p0 * np.abs(ch.g_dl) ** 2 / (inter + sigma2))


def ofdma_budgets(ch: OfdmaChannelSet, policy: TauPolicy, p0: float,
                  sigma2: float) -> np.ndarray:
    """Interference budgets; a target rate gives ``tau_k = |G_k|^2 / eps_k - sigma^2 / P0``."""
    k = ch.n_subcarriers
    if isinstance(policy, FixedTau):
        return np.full(k, float(policy.tau))
    if not isinstance(policy, TargetRate):
        raise TypeError(f"unknown tau policy {policy!r}")
    eps = 2.0 ** np.broadcast_to(np.asarray(policy.rate, dtype=float), (k,)) - 1.0
    own = np.abs(ch.g_dl) ** 2 / eps
    tau = own - sigma2 / p0
    slack = 1e-12 * (own + sigma2 / p0)
    if np.any(tau < -slack):
        bad = np.flatnonzero(tau < -slack).tolist()
        raise InfeasibleTargetError(f"target rate unreachable on subcarriers {bad}")
    return np.maximum(tau, 0.0)


@dataclass
class StackedMacModel:
    h_bar: np.ndarray  # (K, M), column m is the effective channel of device m
    h_breve: np.ndarray  # (M, K), column k is the whitened composite gain vector of subcarrier k


def build_stacked_mac(ch: OfdmaChannelSet, x, p0: float, alpha: float,
                      sigma2: float) -> StackedMacModel:
    """Whiten each subcarrier by ``(alpha P0 |h_SI^k|^2 + sigma^2)^(-1/2)`` and stack.

    ``h_breve[:, k] = c_k conj(F_{:,k} H_{:,k})`` and
    ``h_bar = sqrt(P0) diag(x) h_breve^H``.
    """
    x = np.asarray(x, dtype=complex)
    scale = 1.0 / np.sqrt(alpha * p0 * np.abs(ch.h_si) ** 2 + sigma2)  # (K,)
    h_breve = np.conj(ch.f_bwd * ch.h_fwd) * scale[None, :]
    h_bar = np.sqrt(p0) * x[:, None] * h_breve.conj().T
    return StackedMacModel(h_bar, h_breve)


def sum_capacity_ofdma(model: StackedMacModel, eta) -> float:
    return LogDetObjective(model.h_bar).value(eta)


def sic_rates_ofdma(model: StackedMacModel, eta,
                    order: Optional[Sequence[int]] = None) -> RateReport:
    return sic_rates(model.h_bar, eta, order, scheme="OFDMA_NOMA")
