"""Node placement, Rayleigh/path-loss channel draws and noise pre-whitening."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import USER_SQUARE_CENTER, SystemConfig
from .errors import DataError


@dataclass
class Positions:
    bs: np.ndarray  # (2,)
    users: np.ndarray  # (K, 2)
    devices: np.ndarray  # (M, 2)


@dataclass
class SdmaChannelSet:
    """One SDMA realization.  Rows are per-node vectors.

    g        (K, N)  base station -> downlink user k
    h        (M, N)  base station <-> device m (same vector both directions)
    g_cross  (K, M)  device m -> downlink user k
    c_si     (N, N)  self-interference covariance
    """

    g: np.ndarray
    h: np.ndarray
    g_cross: np.ndarray
    c_si: np.ndarray
    positions: Optional[Positions] = None

    @property
    def n_antennas(self) -> int:
        return self.g.shape[1]

    @property
    def n_downlink(self) -> int:
        return self.g.shape[0]

    @property
    def n_devices(self) -> int:
        return self.h.shape[0]

    def first_devices(self, m: int) -> "SdmaChannelSet":
        """Sub-realization keeping only the first ``m`` devices."""
        pos = self.positions
        if pos is not None:
            pos = Positions(pos.bs, pos.users, pos.devices[:m])
        return SdmaChannelSet(self.g, self.h[:m], self.g_cross[:, :m], self.c_si, pos)


@dataclass
class WhitenedChannels:
    h_tilde: np.ndarray  # (M, N), row m = whitener @ h_m
    whitener: np.ndarray  # (N, N)
    h: np.ndarray  # (M, N) unwhitened, kept for h_m^T s0 and h_m^T W


def sample_geometry(cfg: SystemConfig, rng: np.random.Generator,
                    n_devices: Optional[int] = None) -> Positions:
    """BS at the origin; devices uniform in a square centred at the origin;
    downlink users uniform in a square whose centre depends on the case."""
    m = cfg.n_devices if n_devices is None else n_devices
    half = cfg.side_m / 2.0
    users = rng.uniform(-half, half, size=(cfg.n_downlink, 2))
    users = users + np.asarray(USER_SQUARE_CENTER[cfg.geometry_case])
    devices = rng.uniform(-half, half, size=(m, 2))
    return Positions(np.zeros(2), users, devices)


def path_loss(d, exponent: float = 3.0, d_min: float = 1.0):
    """Large-scale power gain ``max(d, d_min) ** -exponent``."""
    return np.maximum(np.asarray(d, dtype=float), d_min) ** (-exponent)


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, var) samples; ``var`` broadcasts against shape."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(np.asarray(var, dtype=float) / 2.0)


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def sample_sdma_channels(cfg: SystemConfig, positions: Positions,
                         rng: np.random.Generator) -> SdmaChannelSet:
    n = cfg.n_antennas
    k = positions.users.shape[0]
    m = positions.devices.shape[0]
    bs = positions.bs[None, :]
    pl = lambda d: path_loss(d, cfg.path_loss_exp, cfg.d_min)  # noqa: E731

    var_g = pl(_dist(positions.users, bs))  # (K, 1)
    var_h = pl(_dist(positions.devices, bs))  # (M, 1)
    var_cross = pl(_dist(positions.users, positions.devices))  # (K, M)

    g = complex_normal(rng, (k, n), var_g)
    h = complex_normal(rng, (m, n), var_h)
    g_cross = complex_normal(rng, (k, m), var_cross)
    return SdmaChannelSet(g, h, g_cross, cfg.self_interference_cov(), positions)


def inv_sqrtm_hermitian(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Inverse Hermitian square root via eigendecomposition."""
    a = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(a)
    if np.any(w <= tol * max(1.0, float(np.max(np.abs(w))))):
        raise DataError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


def prewhiten(cfg: SystemConfig, channels: SdmaChannelSet) -> WhitenedChannels:
    """Apply ``(sigma^2 I + alpha P0 C_SI)^(-1/2)`` to every device channel."""
    c = np.asarray(channels.c_si)
    c = 0.5 * (c + c.conj().T)
    eig = np.linalg.eigvalsh(c)
    if eig.size and eig.min() < -1e-10 * max(1.0, float(np.abs(eig).max())):
        raise DataError(f"c_si is not PSD (min eigenvalue {eig.min():.3e})")
    if cfg.sigma2 <= 0:
        raise DataError("noise power must be positive")
    n = channels.n_antennas
    cov = cfg.sigma2 * np.eye(n) + cfg.alpha * cfg.p0 * c
    whitener = inv_sqrtm_hermitian(cov, tol=0.0)
    h_tilde = channels.h @ whitener.T
    return WhitenedChannels(h_tilde, whitener, channels.h)
