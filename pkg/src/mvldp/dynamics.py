"""Explicit time-stepping for the four dynamical objects.

One Euler (Euler-Maruyama) engine drives everything:

* the noisy interacting-particle system, whose empirical ensemble is the
  law plugged into the coefficients at every step;
* the deterministic zero-noise limit (a single particle whose own state
  is the Dirac law);
* the skeleton equation, a deterministic path driven by a control through
  the diffusion operator, with the law frozen at the Dirac path of the
  limit;
* the controlled equation, which adds scaled noise on top of the control
  and reads its (frozen) law path from a separate uncontrolled phase-1
  run — the law is never recomputed from the controlled path itself.

Noise increments are counter-based: a Philox stream keyed by the seed
with the (purpose, step) pair in the counter yields each step's block of
standard normals, so particle i's increment at step k is a fixed function
of (seed, purpose, k, i) — independent of the particle count above i and
of any scheduling or worker layout.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.random import Generator, Philox

from .measure import Ensemble, h_norm_sq_rows
from .models import (BlowupError, ModelSpec, apply_diffusion_batch,
                     drift_batch, explicit_step_rate)

#: purpose tags separating the noise streams of the two stochastic engines
NOISE_PARTICLES = 0
NOISE_CONTROLLED = 1

_MASK64 = (1 << 64) - 1


class StabilityError(RuntimeError):
    """Raised when the explicit-step stiffness guard trips."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with nodes t_i = i·dt, dt = T/steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("time horizon must be positive")
        if self.steps < 1:
            raise ValueError("need at least one time step")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class Control:
    """Piecewise-constant deterministic control: one R^m value per step."""

    grid: TimeGrid
    values: np.ndarray  # (steps, m)

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.shape[0] != self.grid.steps:
            raise ValueError("control needs one value row per time step")
        object.__setattr__(self, "values", vals)

    @property
    def rank(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def zero(grid: TimeGrid, rank: int) -> "Control":
        return Control(grid, np.zeros((grid.steps, rank)))

    @staticmethod
    def constant(grid: TimeGrid, value) -> "Control":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return Control(grid, np.tile(value, (grid.steps, 1)))

    @staticmethod
    def sinusoid(grid: TimeGrid, rank: int, amplitude: float, cycles: float,
                 channel: int = 0, base=None) -> "Control":
        """base + amplitude·sin(2π·cycles·t) on one channel, sampled at t_i."""
        vals = np.zeros((grid.steps, rank)) if base is None \
            else np.tile(np.atleast_1d(np.asarray(base, dtype=float)), (grid.steps, 1))
        t = grid.times[:-1]
        vals[:, channel] += amplitude * np.sin(2.0 * np.pi * cycles * t)
        return Control(grid, vals)


@dataclass(frozen=True)
class Trajectory:
    """Time-gridded state path; states[0] is the initial value."""

    grid: TimeGrid
    states: np.ndarray  # (steps + 1, dim)

    def __post_init__(self):
        st = np.asarray(self.states, dtype=float)
        if st.ndim != 2 or st.shape[0] != self.grid.steps + 1:
            raise ValueError("trajectory needs steps+1 state rows")
        object.__setattr__(self, "states", st)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class LawPath:
    """Time-gridded empirical law: one N-point ensemble per node."""

    grid: TimeGrid
    points: np.ndarray  # (steps + 1, N, dim)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[0] != self.grid.steps + 1 or pts.shape[1] < 1:
            raise ValueError("law path needs (steps+1, N, dim) points")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    def law_at(self, i: int) -> Ensemble:
        return Ensemble(self.points[i])

    @staticmethod
    def dirac(traj: Trajectory) -> "LawPath":
        """The Dirac law path δ_{X_t} of a deterministic trajectory."""
        return LawPath(traj.grid, traj.states[:, None, :])


def step_normals(seed: int, purpose: int, step: int, n: int, rank: int) -> np.ndarray:
    """The (n, rank) standard-normal block of one (seed, purpose, step)."""
    bits = Philox(key=int(seed) & _MASK64, counter=[0, 0, purpose, step])
    return Generator(bits).standard_normal((n, rank))


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """Sub-seed spawned by hashing (master, purpose tag, replica index).

    Adding replicas or purposes never perturbs existing streams.
    """
    digest = hashlib.sha256(f"{master}:{tag}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _check_grids(grid: TimeGrid, *others: TimeGrid):
    for g in others:
        if g != grid:
            raise ValueError("time grids do not match")


def _guard_and_check(model: ModelSpec, t: float, states: np.ndarray,
                     ens: Ensemble, dt: float, step: int):
    rate = explicit_step_rate(model, t, states, ens)
    if not dt * rate <= 1.0:
        raise StabilityError(
            f"explicit step unstable at step {step}: dt*lambda_max*|psi'| = "
            f"{dt * rate:.3g} > 1; reduce dt or the spectral mode count")


def _run_free(model: ModelSpec, x0, eps: float, n: int, grid: TimeGrid,
              seed: int) -> np.ndarray:
    """Forward run of n coupled particles; returns (steps+1, n, dim) states."""
    x0 = model.space.check_state(x0)
    dt = grid.dt
    out = np.empty((grid.steps + 1, n, model.space.dim))
    out[0] = np.tile(x0, (n, 1))
    sq_eps = np.sqrt(eps)
    for i in range(grid.steps):
        t = i * dt
        states = out[i]
        ens = Ensemble(states)
        _guard_and_check(model, t, states, ens, dt, i)
        incr = dt * drift_batch(model, t, states, ens)
        if eps > 0:
            dw = np.sqrt(dt) * step_normals(seed, NOISE_PARTICLES, i, n, model.noise_rank)
            incr = incr + sq_eps * apply_diffusion_batch(model, t, states, ens, dw)
        nxt = states + incr
        if not np.isfinite(nxt).all():
            raise BlowupError(f"state blow-up at step {i + 1} (t = {(i + 1) * dt:.6g})")
        out[i + 1] = nxt
    return out


def controlled_batch(model: ModelSpec, x0, eps: float, control: Control,
                     law: LawPath, grid: TimeGrid, seed: int, n_paths: int,
                     keep_path: bool = True):
    """n_paths controlled runs sharing one frozen law path.

    Each path follows X ← X + A·dt + B·(φ_i·dt) + √ε·B·ΔW with all
    coefficients read at the pre-step state and the supplied law. Returns
    (states, girsanov) where states is (steps+1, n_paths, dim) when
    ``keep_path`` else the (n_paths, dim) terminal block, and girsanov
    holds Σ_i ⟨φ_i, ΔW_i⟩ per path (zero when ε = 0).
    """
    x0 = model.space.check_state(x0)
    _check_grids(grid, control.grid, law.grid)
    if eps < 0:
        raise ValueError("noise intensity must be nonnegative")
    dt = grid.dt
    sq_eps = np.sqrt(eps)
    states = np.tile(x0, (n_paths, 1))
    out = None
    if keep_path:
        out = np.empty((grid.steps + 1, n_paths, model.space.dim))
        out[0] = states
    girsanov = np.zeros(n_paths)
    for i in range(grid.steps):
        t = i * dt
        ens = law.law_at(i)
        _guard_and_check(model, t, states, ens, dt, i)
        incr = dt * drift_batch(model, t, states, ens)
        d_ctrl = apply_diffusion_batch(model, t, states, ens, control.values[i] * dt)
        if d_ctrl.any():
            incr = incr + d_ctrl
        if eps > 0:
            dw = np.sqrt(dt) * step_normals(seed, NOISE_CONTROLLED, i, n_paths,
                                            model.noise_rank)
            girsanov += dw @ control.values[i]
            incr = incr + sq_eps * apply_diffusion_batch(model, t, states, ens, dw)
        states = states + incr
        if not np.isfinite(states).all():
            raise BlowupError(f"state blow-up at step {i + 1} (t = {(i + 1) * dt:.6g})")
        if keep_path:
            out[i + 1] = states
    return (out if keep_path else states), girsanov


def simulate_limit(model: ModelSpec, x0, grid: TimeGrid) -> Trajectory:
    """Zero-noise limit path: explicit Euler with the own-state Dirac law."""
    arr = _run_free(model, x0, 0.0, 1, grid, seed=0)
    return Trajectory(grid, arr[:, 0, :])


def simulate_particles(model: ModelSpec, x0, eps: float, n_particles: int,
                       grid: TimeGrid, seed: int):
    """N coupled noisy particles; the law path records every node's ensemble.

    Returns (LawPath, [Trajectory]); both view one (steps+1, N, dim) array.
    Deterministic given (model, x0, eps, N, grid, seed).
    """
    if eps < 0:
        raise ValueError("noise intensity must be nonnegative")
    if n_particles < 1:
        raise ValueError("need at least one particle")
    arr = _run_free(model, x0, eps, n_particles, grid, seed)
    law = LawPath(grid, arr)
    trajectories = [Trajectory(grid, arr[:, i, :]) for i in range(n_particles)]
    return law, trajectories


def solve_skeleton(model: ModelSpec, x0, control: Control, limit: Trajectory,
                   grid: TimeGrid) -> Trajectory:
    """Deterministic controlled path with the law frozen at δ_{limit}."""
    _check_grids(grid, control.grid, limit.grid)
    arr, _ = controlled_batch(model, x0, 0.0, control, LawPath.dirac(limit),
                              grid, seed=0, n_paths=1)
    return Trajectory(grid, arr[:, 0, :])


def simulate_controlled(model: ModelSpec, x0, eps: float, control: Control,
                        law: LawPath, grid: TimeGrid, seed: int) -> Trajectory:
    """One controlled path consuming a frozen law; see :func:`controlled_batch`."""
    arr, _ = controlled_batch(model, x0, eps, control, law, grid, seed, n_paths=1)
    return Trajectory(grid, arr[:, 0, :])


def time_increment_stat(traj: Trajectory, delta: float, space) -> float:
    """∫₀ᵀ ‖X_t - X_{t(δ)}‖_H² dt with t(δ) = ⌊t/δ⌋·δ, left Riemann sum.

    ``delta`` must be a positive integer multiple of the grid step.
    """
    dt = traj.grid.dt
    ratio = delta / dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError("delta must be a positive multiple of the grid step")
    idx = np.arange(traj.grid.steps)
    floor_idx = (idx // k) * k
    diff = traj.states[idx] - traj.states[floor_idx]
    return float(dt * np.sum(h_norm_sq_rows(diff, space)))
