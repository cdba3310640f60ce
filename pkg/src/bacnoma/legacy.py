"""Legacy SDMA downlink: zero-forcing beams, downlink rates, interference budgets."""

from __future__ import annotations

import numpy as np

from .config import FixedTau, TargetRate, TauPolicy
from .errors import DegenerateChannelError, InfeasibleTargetError
from .geometry import SdmaChannelSet

MAX_CONDITION = 1e8


def build_beamformers(channels: SdmaChannelSet) -> np.ndarray:
    """Unit-norm zero-forcing beamformers, returned as the N x K matrix W.

    Column k is proportional to column k of ``G* (G^T G*)^-1`` with
    ``G = [g_1 ... g_K]``, so that ``g_k^T w_i = 0`` for ``i != k``.
    """
    gmat = channels.g.T  # N x K
    n, k = gmat.shape
    if k > n:
        raise DegenerateChannelError(f"zero forcing needs K <= N, got K={k}, N={n}")
    if not np.isfinite(cond := np.linalg.cond(gmat)) or cond > MAX_CONDITION:
        raise DegenerateChannelError("downlink channel matrix is rank deficient")
    gram = gmat.T @ gmat.conj()
    w = gmat.conj() @ np.linalg.inv(gram)
    return w / np.linalg.norm(w, axis=0, keepdims=True)


def hw_norm2(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``||h_m^T W||^2`` for every device row of ``h``."""
    return np.sum(np.abs(h @ w) ** 2, axis=1)


def interference_matrix(channels: SdmaChannelSet, w: np.ndarray) -> np.ndarray:
    """K x M coefficients ``|g_{m,k}|^2 ||h_m^T W||^2`` of the budget constraints."""
    return np.abs(channels.g_cross) ** 2 * hw_norm2(channels.h, w)[None, :]


def backcom_interference_power(channels: SdmaChannelSet, w: np.ndarray, eta, k: int,
                               p0: float) -> float:
    """Average power of the backscattered interference seen by downlink user k."""
    a = interference_matrix(channels, w)[k]
    return float(p0 * a @ np.asarray(eta, dtype=float))


def downlink_rate_sdma(channels: SdmaChannelSet, w: np.ndarray, eta, k: int,
                       p0: float, sigma2: float) -> float:
    gains = np.abs(channels.g[k] @ w) ** 2
    signal = p0 * gains[k]
    inter_user = p0 * (gains.sum() - gains[k])
    backcom = backcom_interference_power(channels, w, eta, k, p0)
    return float(np.log2(1.0 + signal / (inter_user + backcom + sigma2)))


def downlink_rates_sdma(channels: SdmaChannelSet, w: np.ndarray, eta, p0: float,
                        sigma2: float) -> np.ndarray:
    return np.array([downlink_rate_sdma(channels, w, eta, k, p0, sigma2)
                     for k in range(channels.n_downlink)])


def interference_budgets(channels: SdmaChannelSet, w: np.ndarray, policy: TauPolicy,
                         p0: float, sigma2: float) -> np.ndarray:
    """Per-user tolerable interference (normalized by P0).

    ``FixedTau`` broadcasts its constant.  ``TargetRate`` uses
    ``tau_k = (|g_k^T w_k|^2 - eps_k sum_{i!=k} |g_k^T w_i|^2) / eps_k - sigma^2 / P0``
    with ``eps_k = 2^{R_k} - 1`` and raises if any budget is negative beyond
    rounding.
    """
    k = channels.n_downlink
    if isinstance(policy, FixedTau):
        return np.full(k, float(policy.tau))
    if not isinstance(policy, TargetRate):
        raise TypeError(f"unknown tau policy {policy!r}")
    rates = np.broadcast_to(np.asarray(policy.rate, dtype=float), (k,))
    eps = 2.0**rates - 1.0
    gains = np.abs(channels.g @ w) ** 2  # [k, i] = |g_k^T w_i|^2
    own = np.diag(gains)
    others = gains.sum(axis=1) - own
    tau = (own - eps * others) / eps - sigma2 / p0
    # rounding slack so an exactly exhausted budget maps to 0
    slack = 1e-12 * (own / eps + sigma2 / p0)
    if np.any(tau < -slack):
        bad = np.flatnonzero(tau < -slack).tolist()
        raise InfeasibleTargetError(f"target rate unreachable for downlink users {bad}")
    return np.maximum(tau, 0.0)
