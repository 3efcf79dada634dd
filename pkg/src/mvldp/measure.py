"""Empirical probability measures on the discretized state space.

An :class:`Ensemble` is a uniform atomic measure on N points of H. It
stands in for every measure the solvers touch: the law of a particle
system at one time node, the Dirac at a deterministic state (N = 1), and
the test measures fed to the coefficient audits. Only equal-N uniform
ensembles are supported; the simulators always produce them, which keeps
the quadratic-transport distance an exact, cheap assignment problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .spaces import SpaceSpec

#: largest point count accepted by the exact assignment solver
W2_MAX_POINTS = 512


@dataclass(frozen=True)
class Ensemble:
    """Uniform empirical measure (1/N)·Σ δ_{x_i} on the state space.

    ``points`` has shape (N, dim); weights are implicitly 1/N.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("ensemble points must be a (N, dim) array")
        if pts.shape[0] < 1:
            raise ValueError("ensemble needs at least one point")
        object.__setattr__(self, "points", pts)

    @staticmethod
    def dirac(x) -> "Ensemble":
        """Point mass δ_x."""
        x = np.asarray(x, dtype=float)
        return Ensemble(x.reshape(1, -1))

    @staticmethod
    def from_points(points) -> "Ensemble":
        return Ensemble(np.atleast_2d(np.asarray(points, dtype=float)))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _check_dim(ens: Ensemble, space: SpaceSpec):
    if ens.dim != space.dim:
        raise ValueError(f"ensemble dim {ens.dim} does not match space dim {space.dim}")


def _anchored_mean(values: np.ndarray) -> np.ndarray:
    # mean computed as v0 + mean(v - v0): exact when all rows coincide,
    # so a Dirac-like ensemble reproduces its point bit-for-bit
    return values[0] + np.mean(values - values[0], axis=0)


def mean(ens: Ensemble) -> np.ndarray:
    """Coordinate-wise average of the ensemble points."""
    return _anchored_mean(ens.points)


def second_moment(ens: Ensemble, space: SpaceSpec) -> float:
    """μ(‖·‖_H²) = (1/N)·Σ ‖x_i‖_H² with the space's H-norm."""
    _check_dim(ens, space)
    sq = h_norm_sq_rows(ens.points, space)
    return float(max(sq[0] + np.mean(sq - sq[0]), 0.0))


def h_norm_sq_rows(points: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Squared H-norm of each row of a (P, dim) block."""
    if space.kind == "grid_dirichlet":
        return np.sum(points * points, axis=1) / (space.dim + 1)
    return np.sum(points * points * space.h_weights, axis=1)


def w2(mu: Ensemble, nu: Ensemble, space: SpaceSpec, method: str = "auto") -> float:
    """Quadratic Wasserstein distance between two equal-N ensembles in H.

    The distance is the minimum over point matchings σ of
    sqrt((1/N)·Σ ‖x_{σ(i)} - y_i‖_H²). For one-dimensional state spaces
    the monotone (sorted) coupling is optimal and used as a fast path;
    otherwise an exact assignment problem is solved (O(N³), N ≤ 512).

    Parameters
    ----------
    method : {"auto", "sorted", "assignment"}
        "auto" picks sorted for dim-1 spaces and assignment otherwise.
        The two must agree to 1e-12 where both apply.
    """
    _check_dim(mu, space)
    _check_dim(nu, space)
    if mu.n_points != nu.n_points:
        raise ValueError("w2 requires equal point counts (uniform weights only)")
    n = mu.n_points
    if n > W2_MAX_POINTS:
        raise ValueError(
            f"w2 supports at most {W2_MAX_POINTS} points (exact assignment); got {n}"
        )
    if method == "auto":
        method = "sorted" if space.dim == 1 else "assignment"
    if method == "sorted":
        if space.dim != 1:
            raise ValueError("sorted coupling applies to one-dimensional states only")
        w = float(space.h_weights[0])
        dx = np.sort(mu.points[:, 0]) - np.sort(nu.points[:, 0])
        return float(np.sqrt(max(w * np.mean(dx * dx), 0.0)))
    if method != "assignment":
        raise ValueError(f"unknown w2 method {method!r}")
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    if space.kind == "grid_dirichlet":
        cost = np.sum(diff * diff, axis=2) / (space.dim + 1)
    else:
        cost = np.sum(diff * diff * space.h_weights, axis=2)
    rows, cols = linear_sum_assignment(cost)
    # average matched costs indexed by nu's points: (1/N)·Σ_i ‖x_{σ(i)} - y_i‖²,
    # the same summation order a permutation oracle uses
    order = np.argsort(cols)
    matched = cost[rows[order], cols[order]]
    return float(np.sqrt(max(matched.mean(), 0.0)))
