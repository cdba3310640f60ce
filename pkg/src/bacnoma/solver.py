"""Projected-gradient ascent over ``{0 <= eta <= 1, A eta <= tau}``.

Every allocation problem in the package maximizes a concave, coordinate-wise
increasing objective over this polytope, with A >= 0 so that ``eta = 0`` is
always feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleRegionError, OracleError


@dataclass
class FeasibleRegion:
    a: np.ndarray  # (K, M), nonnegative
    tau: np.ndarray  # (K,), nonnegative

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if self.a.shape[0] != self.tau.shape[0]:
            raise ValueError("a and tau disagree on the number of constraints")
        if np.any(self.a < 0) or not np.all(np.isfinite(self.a)):
            raise ValueError("constraint coefficients must be finite and nonnegative")
        if np.any(self.tau < 0):
            raise InfeasibleRegionError(f"negative interference budget: {self.tau}")

    @property
    def m(self) -> int:
        return self.a.shape[1]

    def violation(self, eta) -> float:
        """Largest constraint violation, halfspaces scaled by ``max(1, tau_k)``."""
        eta = np.asarray(eta, dtype=float)
        half = (self.a @ eta - self.tau) / np.maximum(1.0, self.tau)
        box = np.concatenate([-eta, eta - 1.0])
        return float(max(0.0, half.max(initial=0.0), box.max(initial=0.0)))

    def scale_into(self, eta) -> np.ndarray:
        """Clip to the box, then shrink along the ray to 0 until every halfspace holds."""
        eta = np.clip(np.asarray(eta, dtype=float), 0.0, 1.0)
        load = self.a @ eta
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(load > self.tau, self.tau / load, 1.0)
        return eta * float(ratio.min(initial=1.0))

    def solo_optimum(self) -> np.ndarray:
        """Largest feasible ``eta_m`` for each device when it is the only one active."""
        with np.errstate(divide="ignore"):
            caps = np.where(self.a > 0, self.tau[:, None] / self.a, np.inf)
        return np.minimum(1.0, caps.min(axis=0, initial=np.inf))


@dataclass
class SolverOptions:
    tol: float = 1e-7
    max_iters: int = 5000
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    step_min: float = 1e-12
    step_max: float = 1e12
    stall_tol: float = 1e-6
    stall_gain: float = 1e-9
    projection: str = "newton"
    projection_tol: float = 1e-13
    dykstra_max_cycles: int = 100000


@dataclass
class SolverResult:
    eta_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    history: list = field(default_factory=list, repr=False)


def _project_dykstra(a, tau, z, d, tol, max_cycles):
    # Dykstra's alternating projections in the metric diag(d); each set's
    # projection is closed form
    k = a.shape[0]
    a_scaled = a / d[None, :]
    denom = np.einsum("km,km->k", a, a_scaled)
    x = z.copy()
    incr = np.zeros((k + 1, z.size))
    for _ in range(max_cycles):
        x_start = x
        for i in range(k):
            y = x + incr[i]
            excess = a[i] @ y - tau[i]
            x_new = y - (excess / denom[i]) * a_scaled[i] if excess > 0 and denom[i] > 0 else y
            incr[i] = y - x_new
            x = x_new
        y = x + incr[k]
        x_new = np.clip(y, 0.0, 1.0)
        incr[k] = y - x_new
        x = x_new
        if np.max(np.abs(x - x_start)) <= tol:
            return x, True
    return x, False


def _dual_line_search(a, tau, z, d, lam, step):
    # Exact maximization of the piecewise-quadratic dual along lam + t*step,
    # t in [0, t_bound] (t_bound keeps lam >= 0).  The directional derivative
    #   phi'(t) = sum_j c_j clip(u_j - t v_j, 0, 1) - step @ tau
    # is piecewise linear and nonincreasing, so its root is found between
    # consecutive breakpoints.
    c = a.T @ step
    v = c / d
    u = z - (a.T @ lam) / d
    rhs = float(step @ tau)
    neg = step < 0
    t_bound = float(np.min(-lam[neg] / step[neg])) if np.any(neg) else np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        bps = np.concatenate([u / v, (u - 1.0) / v])
    bps = bps[np.isfinite(bps) & (bps > 0.0) & (bps < t_bound)]
    ts = np.concatenate([[0.0], np.sort(bps)])
    if np.isfinite(t_bound):
        ts = np.append(ts, t_bound)
    dphi = np.clip(u[None, :] - ts[:, None] * v[None, :], 0.0, 1.0) @ c - rhs
    if dphi[0] <= 0.0:
        return 0.0
    idx = np.flatnonzero(dphi <= 0.0)
    if idx.size == 0:
        if np.isfinite(t_bound):
            return t_bound
        # derivative stays positive beyond the last breakpoint: linear tail
        t0 = ts[-1]
        slope = -float(c @ np.where((u - t0 * v > 0) & (u - t0 * v < 1), v, 0.0))
        return t0 + dphi[-1] / -slope if slope < 0 else t0
    j = idx[0]
    t0, t1, d0, d1 = ts[j - 1], ts[j], dphi[j - 1], dphi[j]
    return t0 + (t1 - t0) * d0 / (d0 - d1)


def _project_newton(a, tau, z, d, tol, lam0=None, max_iter=100):
    # Active-set Newton on the dual of  min 1/2 (x-z)^T D (x-z)  s.t. box, A x <= tau.
    # For multipliers lam >= 0 the primal minimizer is clip(z - D^-1 A^T lam, 0, 1)
    # and the dual gradient is A x(lam) - tau.  Any lam0 >= 0 is a valid start.
    k = a.shape[0]
    lam = np.zeros(k) if lam0 is None else np.maximum(np.asarray(lam0, dtype=float), 0.0)
    # residual floor set by rounding in A x
    scale = max(1.0, float(np.max(tau, initial=0.0)), float(np.max(a.sum(axis=1), initial=0.0)))
    x = np.clip(z - (a.T @ lam) / d, 0.0, 1.0)
    for _ in range(max_iter):
        g = a @ x - tau
        if np.max(np.abs(lam - np.maximum(0.0, lam + g))) <= tol * scale:
            return x, True, lam
        free_x = (x > 0.0) & (x < 1.0)
        moving = ~((lam <= 0.0) & (g <= 0.0))
        step = np.zeros(k)
        for _retry in range(k):
            am = a[moving][:, free_x]
            hess = (am / d[free_x]) @ am.T
            n_mov = hess.shape[0]
            hess.flat[:: n_mov + 1] += 1e-12 * (1.0 + float(hess.trace()))
            step[:] = 0.0
            step[moving] = np.linalg.solve(hess, g[moving])
            blocked = (lam <= 0.0) & (step < 0.0)
            if not np.any(blocked):
                break
            moving &= ~blocked
        if float(g @ step) <= 0.0 or not np.any(step):
            step = np.where((lam <= 0.0) & (g < 0.0), 0.0, g)
        t = _dual_line_search(a, tau, z, d, lam, step)
        lam_new = lam + t * step
        lam_new[lam_new < 1e-300] = 0.0
        if t <= 0.0 or np.array_equal(lam_new, lam):
            break
        lam = lam_new
        x = np.clip(z - (a.T @ lam) / d, 0.0, 1.0)
    g = a @ x - tau
    # stalled at rounding level: accept a looser residual
    ok = np.max(np.abs(lam - np.maximum(0.0, lam + g))) <= 1e3 * tol * scale
    return x, bool(ok), lam


class Projector:
    """Projection onto box ∩ halfspaces in the norm ``sum_m w_m x_m^2``.

    ``opts.projection`` selects the active-set Newton method on the
    K-dimensional dual (default) or Dykstra's alternating projections; Newton
    falls back to Dykstra if it fails to converge.  Dual multipliers are kept
    per ``key`` and reused as the next starting point, which matters inside
    the ascent loop where consecutive projections share their active set.
    Every result is passed through ``scale_into`` so it is feasible to
    rounding error.
    """

    def __init__(self, region: FeasibleRegion, opts: Optional[SolverOptions] = None):
        self.region = region
        self.opts = opts or SolverOptions()
        if self.opts.projection not in ("newton", "dykstra"):
            raise ValueError(f"unknown projection method {self.opts.projection!r}")
        self._lam: dict = {}

    def __call__(self, z, weights=None, key=None) -> np.ndarray:
        opts = self.opts
        z = np.asarray(z, dtype=float)
        x = np.clip(z, 0.0, 1.0)
        a, tau = self.region.a, self.region.tau
        if np.all(a @ x <= tau):
            return x
        d = np.ones_like(z) if weights is None else np.asarray(weights, dtype=float)
        ok = False
        if opts.projection == "newton":
            x, ok, lam = _project_newton(a, tau, z, d, opts.projection_tol, self._lam.get(key))
            self._lam[key] = lam
        if not ok:
            x, _ = _project_dykstra(a, tau, z, d, opts.projection_tol, opts.dykstra_max_cycles)
        return self.region.scale_into(x)


def project(region: FeasibleRegion, z, opts: Optional[SolverOptions] = None,
            weights=None) -> np.ndarray:
    """One-off projection; see ``Projector``."""
    return Projector(region, opts)(z, weights)


def _checked(value, what: str):
    if not np.all(np.isfinite(value)):
        raise OracleError(f"{what} oracle returned a non-finite value")
    return value


def _armijo(objective, eta, fval, g, d, opts):
    # backtracking along eta + t d; returns (eta, fval) unchanged on failure.
    # A step must raise f strictly: moves the objective cannot resolve are stalls.
    slope = float(g @ d)
    dmax = float(np.max(np.abs(d), initial=0.0))
    t = 1.0
    while t * dmax >= 1e-17:
        cand = eta + t * d
        f_cand = float(_checked(objective(cand), "objective"))
        if f_cand > fval and f_cand >= fval + opts.armijo * t * slope:
            return cand, f_cand
        t *= opts.shrink
    return eta, fval


def maximize(objective: Callable[[np.ndarray], float],
             gradient: Callable[[np.ndarray], np.ndarray],
             region: FeasibleRegion,
             opts: Optional[SolverOptions] = None,
             curvature: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             eta0=None,
             record: bool = False) -> SolverResult:
    """Scaled projected-gradient ascent with Armijo backtracking.

    The trial point is ``P_D(eta + step * D^-1 grad)`` where ``D`` is the
    metric returned by ``curvature`` (minus the Hessian diagonal, floored) or,
    without it, a scalar Barzilai-Borwein metric.  The step along the
    projected direction starts at 1 and is shrunk until the Armijo condition
    holds.  Iteration stops once the Euclidean unit-step projected gradient
    ``||P(eta + grad) - eta||`` is at most ``opts.tol``.  If the line search
    can no longer produce a representable increase along either the scaled
    or the plain direction, the run still counts as converged when that
    residual is at most ``opts.stall_tol`` or the predicted first-order gain
    along the plain or the scaled direction is at most
    ``opts.stall_gain * max(1, |f|)``.
    """
    opts = opts or SolverOptions()
    m = region.m
    proj = Projector(region, opts)
    eta = region.scale_into(np.ones(m)) if eta0 is None else proj(eta0)
    fval = float(_checked(objective(eta), "objective"))
    g = np.asarray(_checked(gradient(eta), "gradient"), dtype=float)
    bb = 1.0 / opts.initial_step
    history = [fval] if record else []
    residual = np.inf
    stalled = False
    it = 0
    for it in range(opts.max_iters + 1):
        d_unit = proj(eta + g, key="unit") - eta
        residual = float(np.linalg.norm(d_unit))
        if residual <= opts.tol or it == opts.max_iters:
            break
        if curvature is not None:
            metric = np.asarray(curvature(eta), dtype=float)
            floor = max(1e-12, 1e-10 * float(np.max(metric, initial=0.0)))
            metric = np.maximum(metric, floor)
        else:
            metric = np.full(m, bb)
        d = proj(eta + opts.initial_step * g / metric, weights=metric, key="scaled") - eta
        cand, f_cand = _armijo(objective, eta, fval, g, d, opts)
        if cand is eta:
            # scaled direction exhausted; the plain projected gradient is
            # still an ascent direction whenever the residual is nonzero
            cand, f_cand = _armijo(objective, eta, fval, g, d_unit, opts)
        s = cand - eta
        if not np.any(s):
            stalled = True
            break
        g_new = np.asarray(_checked(gradient(cand), "gradient"), dtype=float)
        sy = float(s @ (g_new - g))
        bb = min(opts.step_max, max(opts.step_min, -sy / float(s @ s))) if sy < 0 else opts.step_min
        eta, fval, g = cand, f_cand, g_new
        if record:
            history.append(fval)
    # On badly scaled instances a unit-step residual well above tol can
    # correspond to a predicted gain below what the objective can resolve;
    # the scaled direction accounts for curvature along active faces.
    gain = min(float(g @ d_unit), float(g @ d)) if stalled else np.inf
    converged = residual <= opts.tol or (
        stalled and (residual <= opts.stall_tol or gain <= opts.stall_gain * max(1.0, abs(fval))))
    return SolverResult(eta, fval, it, converged, residual, history)


def random_feasible(region: FeasibleRegion, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw on the unit box, scaled once toward 0 until feasible."""
    u = rng.uniform(0.0, 1.0, size=region.m)
    load = region.a @ u
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(load > 0, region.tau / load, np.inf)
    scale = min(1.0, float(ratio.min(initial=np.inf)))
    eta = u * scale
    while np.any(region.a @ eta > region.tau):  # rounding in tau / load
        scale = np.nextafter(scale, 0.0)
        eta = u * scale
    return eta
