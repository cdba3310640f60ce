"""Gaussian multiple-access channel with white unit noise.

The received vector is ``y = sum_m sqrt(eta_m) b_m s_m + n`` with unit-power
Gaussian ``s_m`` and ``n ~ CN(0, I)``.  Both the SDMA model (``b_m`` built
from the pre-whitened device channel) and the stacked OFDMA model reduce to
this form, so the rate, capacity and gradient code lives here once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

LOG2E = 1.0 / np.log(2.0)


@dataclass
class RateReport:
    per_device: np.ndarray
    sum: float
    scheme: str
    feasible: bool = True


def _check_eta(eta, m: int) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (m,):
        raise ValueError(f"eta must have shape ({m},), got {eta.shape}")
    return eta


def _logdet_pd(a: np.ndarray) -> float:
    chol = np.linalg.cholesky(a)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))


class LogDetObjective:
    """``log2 det(I + sum_m eta_m b_m b_m^H)`` and its gradient in eta.

    ``b`` is the D x M matrix of effective channels.  When M <= D the
    determinant is evaluated in the M x M Gram domain (Sylvester identity).
    """

    def __init__(self, b: np.ndarray):
        self.b = np.asarray(b, dtype=complex)
        self.dim, self.m = self.b.shape
        self.gram = self.b.conj().T @ self.b
        self._small = self.m <= self.dim

    def value(self, eta) -> float:
        eta = _check_eta(eta, self.m)
        if self._small:
            r = np.sqrt(eta)
            mat = np.eye(self.m) + r[:, None] * self.gram * r[None, :]
        else:
            mat = np.eye(self.dim) + (self.b * eta) @ self.b.conj().T
        return _logdet_pd(mat) * LOG2E

    def _quad_diag(self, eta) -> np.ndarray:
        # diag of B^H S^-1 B with S = I + B diag(eta) B^H
        eta = _check_eta(eta, self.m)
        if self._small:
            # B^H S^-1 B = (I + G E)^-1 G  (push-through identity)
            x = np.linalg.solve(np.eye(self.m) + self.gram * eta[None, :], self.gram)
            return np.real(np.diag(x))
        s = np.eye(self.dim) + (self.b * eta) @ self.b.conj().T
        x = np.linalg.solve(s, self.b)
        return np.real(np.sum(self.b.conj() * x, axis=0))

    def grad(self, eta) -> np.ndarray:
        """``d/d eta_m = log2(e) b_m^H S^-1 b_m``, ``S = I + B diag(eta) B^H``."""
        return LOG2E * self._quad_diag(eta)

    def curvature(self, eta) -> np.ndarray:
        """Minus the Hessian diagonal, ``log2(e) (b_m^H S^-1 b_m)^2``."""
        return LOG2E * self._quad_diag(eta) ** 2

    __call__ = value


def sum_capacity(b: np.ndarray, eta) -> float:
    return LogDetObjective(b).value(eta)


def sic_rates(b: np.ndarray, eta, order: Optional[Sequence[int]] = None,
              scheme: str = "mmse-sic") -> RateReport:
    """Per-device rates of MMSE-SIC decoding in ``order`` (first entry decoded first).

    The device decoded at a given stage sees the not-yet-decoded devices as
    Gaussian interference, so its rate is ``log2(1 + eta_m b_m^H A^-1 b_m)``
    with ``A = I + sum_{later} eta_i b_i b_i^H``.  ``A^-1`` is built up from
    the last-decoded device backwards with Sherman-Morrison updates.
    """
    b = np.asarray(b, dtype=complex)
    dim, m = b.shape
    eta = _check_eta(eta, m)
    order = list(range(m)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(m)):
        raise ValueError(f"order must be a permutation of range({m})")
    a_inv = np.eye(dim, dtype=complex)
    rates = np.zeros(m)
    for idx in reversed(order):
        v = a_inv @ b[:, idx]
        r = eta[idx] * float(np.real(np.vdot(b[:, idx], v)))
        rates[idx] = np.log2(1.0 + r)
        if eta[idx] > 0:
            a_inv = a_inv - (eta[idx] / (1.0 + r)) * np.outer(v, v.conj())
    return RateReport(rates, float(rates.sum()), scheme)
