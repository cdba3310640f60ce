"""Exponential-integral helpers for the average QR-SIC rate.

All public functions accept scalars or numpy arrays and return the same
shape.  The central quantity is

    f(x) = -exp(1/x) * Ei(-1/x) = exp(y) * E1(y),   y = 1/x,

which equals E[ln(1 + x |z|^2)] for z ~ CN(0, 1).  ``exp(y) * E1(y)`` is
evaluated directly (never as a product of an overflowing exponential and an
underflowing integral), so ``f`` is finite for every x >= 0.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

EULER_GAMMA = float(np.euler_gamma)

#: Below this argument f, f' and f'' use the one-term asymptotic form f(x) ~ x.
#: The one-term form has relative error ~x, so the seam jump is ~1e-4 relative.
X_SWITCH = 1e-4

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 1000


def _as_float_array(x, name: str, *, allow_zero: bool) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    bad = arr < 0 if allow_zero else arr <= 0
    if np.any(bad):
        op = ">=" if allow_zero else ">"
        raise DomainError(f"{name} must be {op} 0, got {x!r}")
    return arr


def _return(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def _e1_series(y: np.ndarray) -> np.ndarray:
    # E1(y) = -gamma - ln y - sum_{k>=1} (-y)^k / (k k!), used for y <= 1
    total = np.zeros_like(y)
    term = np.ones_like(y)
    for k in range(1, _MAX_ITER):
        term = term * (-y) / k
        contrib = term / k
        total = total + contrib
        if np.all(np.abs(contrib) <= _EPS * np.maximum(np.abs(total), _TINY)):
            break
    return -EULER_GAMMA - np.log(y) - total


def _scaled_e1_cf(y: np.ndarray) -> np.ndarray:
    # exp(y) E1(y) by modified Lentz on the continued fraction, valid for y > 1.
    # Converged entries are dropped from the working set as they finish.
    b = y + 1.0
    c = np.full_like(y, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    idx = np.arange(y.size)
    out = np.empty_like(y)
    for i in range(1, _MAX_ITER):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        done = np.abs(delta - 1.0) <= _EPS
        if np.any(done):
            out[idx[done]] = h[done]
            keep = ~done
            idx, b, c, d, h = idx[keep], b[keep], c[keep], d[keep], h[keep]
            if idx.size == 0:
                return out
    out[idx] = h
    return out


def scaled_e1(y) -> np.ndarray:
    """Return ``exp(y) * E1(y)`` for ``y > 0`` without overflow."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    small = y <= 1.0
    if np.any(small):
        ys = y[small]
        out[small] = np.exp(ys) * _e1_series(ys)
    if np.any(~small):
        out[~small] = _scaled_e1_cf(y[~small])
    return out


def ei_neg(y):
    """Exponential integral at a negative argument, ``Ei(-y)`` for ``y > 0``.

    Series expansion for ``y <= 1``, continued fraction above.  The result is
    negative and underflows to ``-0.0`` for very large ``y``.
    """
    arr = _as_float_array(y, "y", allow_zero=False)
    flat = np.atleast_1d(arr)
    out = np.empty_like(flat)
    small = flat <= 1.0
    if np.any(small):
        out[small] = -_e1_series(flat[small])
    if np.any(~small):
        big = flat[~small]
        out[~small] = -_scaled_e1_cf(big) * np.exp(-big)
    return _return(out.reshape(arr.shape), y)


def f(x):
    """Average rate kernel ``f(x) = -exp(1/x) Ei(-1/x)`` in nats.

    For ``x < X_SWITCH`` the small-argument form ``f(x) ~ x`` is returned;
    ``f(0) = 0``.
    """
    arr = _as_float_array(x, "x", allow_zero=True)
    flat = np.atleast_1d(arr)
    out = flat.copy()
    big = flat >= X_SWITCH
    if np.any(big):
        out[big] = scaled_e1(1.0 / flat[big])
    return _return(out.reshape(arr.shape), x)


def f_prime(x):
    """First derivative ``f'(x) = exp(1/x) x^-2 Ei(-1/x) + 1/x``.

    Written as ``(x - f(x)) / x^2``; lies in (0, 1] and tends to 1 as x -> 0.
    """
    arr = _as_float_array(x, "x", allow_zero=False)
    flat = np.atleast_1d(arr)
    out = np.ones_like(flat)
    big = flat >= X_SWITCH
    if np.any(big):
        xb = flat[big]
        out[big] = (xb - scaled_e1(1.0 / xb)) / (xb * xb)
    return _return(out.reshape(arr.shape), x)


_F2_SERIES_MAX = 0.02


def _f_second_series(x: np.ndarray) -> np.ndarray:
    # asymptotic sum_{j>=4} (-1)^(j-1) (j-2)! (j-3) x^(j-4), truncated at its
    # smallest term; only used where x < 0.02 so the truncation error is < 1e-15
    total = np.zeros_like(x)
    fact = np.full_like(x, 2.0)  # (j-2)! x^(j-4)
    active = np.ones(x.shape, dtype=bool)
    prev = np.full_like(x, np.inf)
    sign = -1.0
    for j in range(4, 200):
        if j > 4:
            fact = fact * (j - 2) * x
        term = sign * fact * (j - 3)
        mag = np.abs(term)
        active &= mag < prev
        total = np.where(active, total + term, total)
        prev = mag
        sign = -sign
        if not np.any(active & (mag > _EPS)):
            break
    return total


def f_second(x):
    """Second derivative ``f''(x) = exp(1/x) x^-4 u(x)``; never positive.

    Uses ``y^4 [(1 + 2x) f(x) - x - x^2]`` for moderate x and its asymptotic
    expansion ``-2 + 12x - 72x^2 + ...`` for small x, where the closed form
    cancels catastrophically.  Returns 0 below ``X_SWITCH`` (linear branch).
    """
    arr = _as_float_array(x, "x", allow_zero=False)
    flat = np.atleast_1d(arr)
    out = np.zeros_like(flat)
    mid = (flat >= X_SWITCH) & (flat < _F2_SERIES_MAX)
    big = flat >= _F2_SERIES_MAX
    if np.any(mid):
        out[mid] = _f_second_series(flat[mid])
    if np.any(big):
        xb = flat[big]
        s = scaled_e1(1.0 / xb)
        out[big] = ((1.0 + 2.0 * xb) * s - xb - xb * xb) / xb**4
    return _return(out.reshape(arr.shape), x)


def u_appendix(x):
    """``u(x) = -Ei(-1/x) - x e^{-1/x} - 2x Ei(-1/x) - x^2 e^{-1/x}``."""
    arr = _as_float_array(x, "x", allow_zero=False)
    flat = np.atleast_1d(arr)
    s = scaled_e1(1.0 / flat)
    out = np.exp(-1.0 / flat) * ((1.0 + 2.0 * flat) * s - flat - flat * flat)
    return _return(out.reshape(arr.shape), x)


def g_appendix(x):
    """``g(x) = Ei(-1/x) + x e^{-1/x}``; nonnegative, grows like x for large x."""
    arr = _as_float_array(x, "x", allow_zero=False)
    flat = np.atleast_1d(arr)
    s = scaled_e1(1.0 / flat)
    out = np.exp(-1.0 / flat) * (flat - s)
    return _return(out.reshape(arr.shape), x)
