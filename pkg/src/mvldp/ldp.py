"""Rate function, optimal tilting, and small-noise verification suite.

The quadratic action ½∫‖φ‖² of a control, minimized over controls whose
skeleton path lands in a terminal-time target set, is the exponential
decay rate of small-noise probabilities. This module provides:

* ``action`` and ``rate_minimize`` — penalty-method minimization of the
  action subject to a terminal ball or halfspace constraint, with exact
  discrete adjoint gradients (finite differences available behind the
  same switch, and as the validation oracle);
* ``estimate_rare_prob`` — Monte Carlo estimation of terminal-event
  probabilities, optionally importance-sampled by shifting the driving
  noise along a control and reweighting with the exponential martingale;
* ``verify_l5`` / ``verify_t2`` — measured scaling in ε of the expected
  sup-distance² between noisy and deterministic paths (slope ≈ 1);
* ``verify_t3`` — uniform convergence of skeletons under an oscillatory
  (weakly vanishing) control family;
* ``verify_l6`` — integrated squared time-increments of the skeleton
  against the left δ-discretization of time. The reported slope is the
  raw log-log fit of the statistic against δ; smooth desk-scale paths
  come out near 2, one order above the linear upper bound.

Every verification report is deterministic given its seed; ε-sweeps use
one master seed so runs are coupled by common random numbers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .dynamics import (Control, TimeGrid, Trajectory, controlled_batch,
                       derive_seed, simulate_limit, simulate_particles,
                       solve_skeleton, time_increment_stat)
from .measure import Ensemble, h_norm_sq_rows
from .models import (ModelSpec, _gains_batch, diffusion_state_vjp,
                     drift_state_vjp)
from .spaces import SpaceSpec, h_inner, h_norm

BALL = "ball"
HALFSPACE = "halfspace"


class OptimizerFailure(RuntimeError):
    """Raised by callers that require a converged rate minimization."""


@dataclass(frozen=True)
class RareEvent:
    """Terminal-time target set: a closed H-ball or a closed halfspace."""

    kind: str
    center: np.ndarray | None = None
    radius: float = 0.0
    direction: np.ndarray | None = None
    level: float = 0.0

    @staticmethod
    def ball(center, radius: float) -> "RareEvent":
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        return RareEvent(BALL, center=np.asarray(center, dtype=float), radius=radius)

    @staticmethod
    def halfspace(direction, level: float) -> "RareEvent":
        """{u: ⟨u, direction⟩_H ≥ level}; direction must have unit H-norm.

        ``level = -inf`` is the whole-space sentinel.
        """
        return RareEvent(HALFSPACE, direction=np.asarray(direction, dtype=float),
                         level=float(level))

    def validate(self, space: SpaceSpec):
        if self.kind == BALL:
            space.check_state(self.center)
        elif self.kind == HALFSPACE:
            space.check_state(self.direction)
            if abs(h_norm(self.direction, space) - 1.0) > 1e-9:
                raise ValueError("halfspace direction must have unit H-norm")
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def distance(self, u, space: SpaceSpec) -> float:
        """H-distance from u to the event set (0 inside)."""
        if self.kind == BALL:
            return max(0.0, h_norm(np.asarray(u) - self.center, space) - self.radius)
        return max(0.0, self.level - h_inner(u, self.direction, space))

    def contains(self, u, space: SpaceSpec) -> bool:
        return self.distance(u, space) <= 0.0

    def contains_batch(self, states: np.ndarray, space: SpaceSpec) -> np.ndarray:
        """Membership of each row of a (P, dim) block."""
        if self.kind == BALL:
            sq = h_norm_sq_rows(states - self.center, space)
            return sq <= self.radius * self.radius
        return states @ (self.direction * space.h_weights) >= self.level


def action(control: Control) -> float:
    """Quadratic control cost ½·Σ_i |φ_i|²·dt."""
    return 0.5 * l2_mass(control)


def l2_mass(control: Control) -> float:
    """∫₀ᵀ ‖φ_s‖² ds; membership in the radius-M ball means this is ≤ M."""
    return float(np.sum(control.values * control.values) * control.grid.dt)


# -- rate-function minimization ------------------------------------------------------

@dataclass(frozen=True)
class RateOptions:
    tol: float = 1e-4             # terminal H-distance required for success
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    max_stages: int = 8
    max_iter: int = 200           # inner iterations per penalty stage
    gradient: str = "adjoint"     # "adjoint" | "fd"
    fd_step: float = 1e-6
    constant_control: bool = False


@dataclass(frozen=True)
class RateReport:
    control: Control
    action_value: float
    terminal_state: np.ndarray
    residual: float
    iterations: int
    converged: bool
    stages: int

    @property
    def rate(self) -> float:
        """The minimized action, or +inf if the event was never reached."""
        return self.action_value if self.converged else math.inf


def _dist_sq_grad(event: RareEvent, u: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Gradient of distance² with respect to the raw state coordinates."""
    if event.kind == BALL:
        diff = u - event.center
        d = h_norm(diff, space)
        r = d - event.radius
        if r <= 0.0 or d == 0.0:
            return np.zeros_like(u)
        return (2.0 * r / d) * (space.h_weights * diff)
    slack = event.level - h_inner(u, event.direction, space)
    if slack <= 0.0:
        return np.zeros_like(u)
    return -2.0 * slack * (space.h_weights * event.direction)


def _adjoint_gradient(model: ModelSpec, grid: TimeGrid, limit: Trajectory,
                      values: np.ndarray, traj: Trajectory, penalty: float,
                      event: RareEvent) -> np.ndarray:
    dt = grid.dt
    lam = penalty * _dist_sq_grad(event, traj.terminal, model.space)
    grad = np.empty_like(values)
    for i in range(grid.steps - 1, -1, -1):
        t = i * dt
        u = traj.states[i]
        ens = Ensemble(limit.states[i][None, :])
        s = _gains_batch(model, t, u[None, :], ens)[0]
        grad[i] = dt * values[i] + dt * s * (model.noise_f @ lam)
        lam = (lam + dt * drift_state_vjp(model, t, u, ens, lam)
               + diffusion_state_vjp(model, t, u, ens, values[i] * dt, lam))
    return grad


def rate_gradient(model: ModelSpec, x0, event: RareEvent, grid: TimeGrid,
                  control: Control, penalty: float, mode: str = "adjoint",
                  fd_step: float = 1e-6, limit: Trajectory | None = None) -> np.ndarray:
    """Gradient of action + penalty·dist²(terminal) in the control values."""
    if limit is None:
        limit = simulate_limit(model, x0, grid)
    if mode == "adjoint":
        traj = solve_skeleton(model, x0, control, limit, grid)
        return _adjoint_gradient(model, grid, limit, control.values, traj,
                                 penalty, event)
    if mode != "fd":
        raise ValueError(f"unknown gradient mode {mode!r}")

    def objective(flat):
        ctl = Control(grid, flat.reshape(control.values.shape))
        traj = solve_skeleton(model, x0, ctl, limit, grid)
        return action(ctl) + penalty * event.distance(traj.terminal, model.space) ** 2

    flat = control.values.ravel()
    grad = np.empty_like(flat)
    for j in range(flat.size):
        h = fd_step * (1.0 + abs(flat[j]))
        up = flat.copy(); up[j] += h
        dn = flat.copy(); dn[j] -= h
        grad[j] = (objective(up) - objective(dn)) / (2.0 * h)
    return grad.reshape(control.values.shape)


def rate_minimize(model: ModelSpec, x0, event: RareEvent, grid: TimeGrid,
                  opts: RateOptions | None = None,
                  initial: Control | None = None) -> RateReport:
    """Minimize the action over controls steering the skeleton into the event.

    Penalty method: minimize action(φ) + penalty·dist²(terminal) with an
    increasing penalty schedule until the terminal residual is within
    tolerance. Controls are piecewise constant on the solver grid (or a
    single constant value when ``constant_control`` is set). A report
    with ``converged = False`` (rate = +inf) is returned when the penalty
    path never reaches the event.
    """
    opts = opts or RateOptions()
    event.validate(model.space)
    x0 = model.space.check_state(x0)
    limit = simulate_limit(model, x0, grid)
    m = model.noise_rank
    shape = (grid.steps, m)

    if initial is not None:
        values = np.array(initial.values, dtype=float)
    else:
        values = np.zeros(shape)

    def expand(theta):
        if opts.constant_control:
            return np.tile(theta.reshape(1, m), (grid.steps, 1))
        return theta.reshape(shape)

    def collapse(values_arr):
        if opts.constant_control:
            return values_arr[0].copy()
        return values_arr.ravel()

    penalty = opts.penalty0
    theta = collapse(values)
    total_iter = 0
    best = None
    for stage in range(1, opts.max_stages + 1):
        def fun(th, pen=penalty):
            vals = expand(th)
            ctl = Control(grid, vals)
            traj = solve_skeleton(model, x0, ctl, limit, grid)
            residual = event.distance(traj.terminal, model.space)
            j = action(ctl) + pen * residual * residual
            if opts.gradient == "adjoint":
                g = _adjoint_gradient(model, grid, limit, vals, traj, pen, event)
            else:
                g = rate_gradient(model, x0, event, grid, ctl, pen,
                                  mode="fd", fd_step=opts.fd_step, limit=limit)
            if opts.constant_control:
                g = g.sum(axis=0)
            return j, g.ravel()

        res = minimize(fun, theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": opts.max_iter})
        theta = res.x
        total_iter += int(res.nit)
        vals = expand(theta)
        ctl = Control(grid, vals)
        traj = solve_skeleton(model, x0, ctl, limit, grid)
        residual = float(event.distance(traj.terminal, model.space))
        best = RateReport(ctl, action(ctl), traj.terminal.copy(), residual,
                          total_iter, bool(residual <= opts.tol), stage)
        if best.converged:
            return best
        penalty *= opts.penalty_growth
    return best


# -- rare-event Monte Carlo ----------------------------------------------------------

@dataclass(frozen=True)
class RareProbEstimate:
    p_hat: float
    std_err: float
    ess: float
    ess_warning: bool
    n_samples: int


def estimate_rare_prob(model: ModelSpec, x0, eps: float, event: RareEvent,
                       n_rep: int, grid: TimeGrid, seed: int,
                       tilt: Control | None = None,
                       n_particles: int = 256) -> RareProbEstimate:
    """Monte Carlo estimate of the terminal-event probability at noise ε.

    Without a tilt, particle runs are aggregated and the event is scored
    on each particle's terminal state. With a tilt φ, paths are driven by
    noise shifted along φ/√ε (the controlled dynamics, consuming the law
    of a separate untilted run) and reweighted by
    exp(-Σ⟨φ_i, ΔW_i⟩/√ε - Σ|φ_i|²dt/(2ε)). The effective sample size is
    computed on the weighted indicator terms; below 10 a warning flag is
    set.
    """
    if n_rep < 1:
        raise ValueError("need at least one replication")
    event.validate(model.space)
    if tilt is None:
        n_batches = math.ceil(n_rep / n_particles)
        vals = []
        for k in range(n_batches):
            law, _ = simulate_particles(model, x0, eps, n_particles, grid,
                                        derive_seed(seed, "rare-untilted", k))
            hits = event.contains_batch(law.points[-1], model.space)
            vals.append(hits.astype(float))
        vals = np.concatenate(vals)
    else:
        if eps <= 0:
            raise ValueError("importance sampling requires eps > 0")
        law, _ = simulate_particles(model, x0, eps, n_particles, grid,
                                    derive_seed(seed, "rare-law", 0))
        terminal, girsanov = controlled_batch(
            model, x0, eps, tilt, law, grid,
            derive_seed(seed, "rare-tilted", 0), n_paths=n_rep, keep_path=False)
        log_w = -girsanov / np.sqrt(eps) - l2_mass(tilt) / (2.0 * eps)
        hits = event.contains_batch(terminal, model.space)
        vals = np.exp(log_w) * hits
    p_hat = float(vals.mean())
    std_err = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    s1 = float(vals.sum())
    s2 = float(np.sum(vals * vals))
    ess = s1 * s1 / s2 if s2 > 0 else 0.0
    return RareProbEstimate(p_hat, std_err, ess, bool(ess < 10.0), int(vals.size))


# -- verification reports -------------------------------------------------------------

@dataclass(frozen=True)
class SlopeReport:
    experiment: str
    x_label: str
    xs: np.ndarray
    statistics: np.ndarray
    std_errs: np.ndarray
    slope: float
    intercept: float


@dataclass(frozen=True)
class ContinuityReport:
    experiment: str
    ns: np.ndarray
    distances: np.ndarray


def _fit_loglog(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    coeffs = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(coeffs[0]), float(coeffs[1])


def _sup_sq_stats(points: np.ndarray, reference: np.ndarray, space: SpaceSpec):
    """Mean and standard error over paths of sup_t ‖X_t - ref_t‖_H²."""
    diff = points - reference[:, None, :]
    sq = np.stack([h_norm_sq_rows(diff[i], space) for i in range(diff.shape[0])])
    sup = sq.max(axis=0)
    n = sup.size
    se = float(sup.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(sup.mean()), se


def _map_indexed(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def verify_l5(model: ModelSpec, x0, eps_list, n_particles: int, grid: TimeGrid,
              seed: int, threads: int = 1) -> SlopeReport:
    """ε-scaling of E sup_t ‖X^ε - X⁰‖_H² by particle averaging.

    One master seed drives every ε (common random numbers), so the
    statistic is monotone along the ε list up to Monte Carlo noise.
    """
    limit = simulate_limit(model, x0, grid)

    def one(eps):
        if eps == 0.0:
            return 0.0, 0.0
        law, _ = simulate_particles(model, x0, eps, n_particles, grid, seed)
        return _sup_sq_stats(law.points, limit.states, model.space)

    rows = _map_indexed(one, list(eps_list), threads)
    stats = np.array([r[0] for r in rows])
    errs = np.array([r[1] for r in rows])
    slope, intercept = _fit_loglog(eps_list, stats)
    return SlopeReport("l5", "eps", np.asarray(eps_list, dtype=float),
                       stats, errs, slope, intercept)


def verify_t2(model: ModelSpec, x0, control: Control, eps_list,
              n_particles: int, grid: TimeGrid, seed: int,
              threads: int = 1) -> SlopeReport:
    """ε-scaling of E sup_t ‖X^{ε,φ} - X̄^φ‖_H² for a fixed control.

    Each ε runs an uncontrolled phase-1 particle system to freeze the law,
    then drives controlled paths against it; the deterministic reference
    is the skeleton of the same control.
    """
    limit = simulate_limit(model, x0, grid)
    skeleton = solve_skeleton(model, x0, control, limit, grid)

    def one(eps):
        if eps == 0.0:
            return 0.0, 0.0
        law, _ = simulate_particles(model, x0, eps, n_particles, grid, seed)
        paths, _ = controlled_batch(model, x0, eps, control, law, grid, seed,
                                    n_paths=n_particles, keep_path=True)
        return _sup_sq_stats(paths, skeleton.states, model.space)

    rows = _map_indexed(one, list(eps_list), threads)
    stats = np.array([r[0] for r in rows])
    errs = np.array([r[1] for r in rows])
    slope, intercept = _fit_loglog(eps_list, stats)
    return SlopeReport("t2", "eps", np.asarray(eps_list, dtype=float),
                       stats, errs, slope, intercept)


def verify_t3(model: ModelSpec, x0, base_control: Control, n_list,
              grid: TimeGrid, amplitude: float = 1.0,
              channel: int = 0) -> ContinuityReport:
    """Uniform skeleton convergence under base + amplitude·sin(2πnt) controls.

    The oscillatory family converges weakly (not strongly) to the base
    control as n grows; the reported sup-distances should shrink.
    """
    limit = simulate_limit(model, x0, grid)
    base_traj = solve_skeleton(model, x0, base_control, limit, grid)
    distances = []
    for n in n_list:
        osc = Control.sinusoid(grid, model.noise_rank, amplitude, float(n),
                               channel=channel, base=None)
        ctl = Control(grid, base_control.values + osc.values)
        traj = solve_skeleton(model, x0, ctl, limit, grid)
        sq = h_norm_sq_rows(traj.states - base_traj.states, model.space)
        distances.append(float(np.sqrt(sq.max())))
    return ContinuityReport("t3", np.asarray(list(n_list), dtype=float),
                            np.asarray(distances))


def verify_l6(model: ModelSpec, x0, control: Control, delta_list,
              grid: TimeGrid) -> SlopeReport:
    """Integrated squared time-increments of the skeleton across δ values.

    The raw log-log slope of the statistic against δ is reported; smooth
    paths give about 2, exceeding the linear-in-δ upper bound by one.
    """
    limit = simulate_limit(model, x0, grid)
    skeleton = solve_skeleton(model, x0, control, limit, grid)
    deltas = np.asarray(list(delta_list), dtype=float)
    stats = np.array([time_increment_stat(skeleton, d, model.space) for d in deltas])
    slope, intercept = _fit_loglog(deltas, stats)
    return SlopeReport("l6", "delta", deltas, stats, np.zeros_like(stats),
                       slope, intercept)
