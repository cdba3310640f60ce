"""Uplink BackCom NOMA over an SDMA legacy system.

Approach I decodes with MMSE-SIC and attains the MAC sum capacity for the
current legacy symbols ``x``.  Approach II detects with ``Q^H`` from the QR
decomposition of the whitened channel matrix and has a closed-form average
over ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import specfun
from .errors import UnsupportedOverloadError
from .geometry import WhitenedChannels, complex_normal
from .legacy import hw_norm2
from .mac import LOG2E, LogDetObjective, RateReport, sic_rates

QR_RANK_TOL = 1e-10


@dataclass
class ExcitationRealization:
    """Legacy symbols and the resulting per-device excitations ``h_m^T s0``."""

    x: np.ndarray  # (K,)
    s0_gain: np.ndarray  # (M,)

    @classmethod
    def from_symbols(cls, h: np.ndarray, w: np.ndarray, x, p0: float) -> "ExcitationRealization":
        x = np.asarray(x, dtype=complex)
        s0 = np.sqrt(p0) * (w @ x)
        return cls(x, h @ s0)


def draw_excitation(h: np.ndarray, w: np.ndarray, p0: float,
                    rng: np.random.Generator) -> ExcitationRealization:
    x = complex_normal(rng, w.shape[1])
    return ExcitationRealization.from_symbols(h, w, x, p0)


def effective_channels(wh: WhitenedChannels, exc: ExcitationRealization) -> np.ndarray:
    """N x M matrix with columns ``(h_m^T s0) h~_m``.

    The phase of ``h_m^T s0`` is irrelevant to every rate, only its modulus
    enters through ``|h_m^T s0|^2``.
    """
    return (wh.h_tilde * np.abs(exc.s0_gain)[:, None]).T


def sum_capacity_sdma(wh: WhitenedChannels, exc: ExcitationRealization, eta) -> float:
    return LogDetObjective(effective_channels(wh, exc)).value(eta)


def sic_rates_approach1(wh: WhitenedChannels, exc: ExcitationRealization, eta,
                        order: Optional[Sequence[int]] = None) -> RateReport:
    return sic_rates(effective_channels(wh, exc), eta, order, scheme="ApproachI")


def grad_sum_capacity(wh: WhitenedChannels, exc: ExcitationRealization, eta) -> np.ndarray:
    return LogDetObjective(effective_channels(wh, exc)).grad(eta)


def qr_diagonal_sq(wh: WhitenedChannels) -> np.ndarray:
    """``R_{m,m}^2`` of the Householder QR of ``H~ = [h~_1 ... h~_M]`` (no pivoting)."""
    m, n = wh.h_tilde.shape
    if m > n:
        raise UnsupportedOverloadError(f"QR detection needs M <= N, got M={m}, N={n}")
    r = np.linalg.qr(wh.h_tilde.T, mode="r")
    d = np.abs(np.diag(r)) ** 2
    if d.min() <= (QR_RANK_TOL**2) * d.max() or d.max() == 0:
        raise UnsupportedOverloadError("whitened device channel matrix is rank deficient")
    return d


def qr_rates_approach2(wh: WhitenedChannels, exc: ExcitationRealization, eta) -> RateReport:
    eta = np.asarray(eta, dtype=float)
    rates = np.log2(1.0 + qr_diagonal_sq(wh) * eta * np.abs(exc.s0_gain) ** 2)
    return RateReport(rates, float(rates.sum()), "ApproachII")


def avg_qr_gains(wh: WhitenedChannels, w: np.ndarray, p0: float) -> np.ndarray:
    """``c_m = P0 R_{m,m}^2 ||h_m^T W||^2``; the average rate of device m is
    ``log2(e) f(c_m eta_m)``."""
    return p0 * qr_diagonal_sq(wh) * hw_norm2(wh.h, w)


class AvgQrObjective:
    """``sum_m log2(e) f(c_m eta_m)`` with analytic gradient."""

    def __init__(self, c: np.ndarray):
        self.c = np.asarray(c, dtype=float)
        self.m = self.c.size

    def value(self, eta) -> float:
        x = self.c * np.clip(np.asarray(eta, dtype=float), 0.0, None)
        return LOG2E * float(np.sum(specfun.f(x)))

    def grad(self, eta) -> np.ndarray:
        x = self.c * np.asarray(eta, dtype=float)
        fp = np.ones_like(x)
        pos = x > 0
        if np.any(pos):
            fp[pos] = specfun.f_prime(x[pos])
        return LOG2E * fp * self.c

    def curvature(self, eta) -> np.ndarray:
        x = self.c * np.asarray(eta, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        if np.any(pos):
            out[pos] = -specfun.f_second(x[pos])
        return LOG2E * out * self.c**2

    __call__ = value


def avg_qr_sum_rate(wh: WhitenedChannels, w: np.ndarray, eta, p0: float) -> float:
    return AvgQrObjective(avg_qr_gains(wh, w, p0)).value(eta)


def grad_avg_qr_sum_rate(wh: WhitenedChannels, w: np.ndarray, eta, p0: float) -> np.ndarray:
    return AvgQrObjective(avg_qr_gains(wh, w, p0)).grad(eta)
