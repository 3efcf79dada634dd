"""Discretized Gelfand triples: norms and pairing conventions.

Three state-space discretizations are supported. Each fixes a concrete
triple V ⊂ H ⊂ V* on a single coordinate basis:

``euclidean(d)``
    V = H = V* = R^d with the standard inner product.

``spectral_dirichlet(K)``
    Sine-spectral truncation on (0,1) with zero boundary values. States
    are coefficients against the L²-orthonormal modes √2·sin(kπx),
    k = 1..K, with eigenvalues λ_k = (kπ)². H is the dual of W₀^{1,2};
    its inner product weights mode k by 1/λ_k. V = L^r(0,1), evaluated
    by midpoint quadrature on Q = 4K points (≥ 4 points per wavelength
    of the highest mode, and exactly orthonormal for the retained modes).

``grid_dirichlet(n)``
    n interior nodes on (0,1) with spacing h = 1/(n+1) and zero boundary
    (ghost) values. H = L²(0,1) via the h-weighted dot product;
    V = W₀^{1,p} via the discrete gradient over the n+1 edges.

Every vector — state, drift value, noise profile — is stored in the one
per-space basis. V*-valued vectors share the H coordinate convention and
the pairing formula absorbs the triple's geometry, so ``dual_pair``
coincides with ``h_inner`` whenever its first argument is a genuine
H-vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

EUCLIDEAN = "euclidean"
SPECTRAL = "spectral_dirichlet"
GRID = "grid_dirichlet"


@dataclass(frozen=True)
class SpaceSpec:
    """Immutable description of one discretized triple.

    Parameters
    ----------
    kind : str
        One of ``euclidean``, ``spectral_dirichlet``, ``grid_dirichlet``.
    dim : int
        Number of stored coordinates (d, K, or n).
    v_exponent : float
        Integrability/growth exponent of the V-norm (2, r, or p for the
        three model families). Must exceed 1.
    """

    kind: str
    dim: int
    v_exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, SPECTRAL, GRID):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("space dimension must be >= 1")
        if not self.v_exponent > 1.0:
            raise ValueError("v_exponent must be > 1")

    # -- constructors ---------------------------------------------------------
    @staticmethod
    def euclidean(d: int, v_exponent: float = 2.0) -> "SpaceSpec":
        return SpaceSpec(EUCLIDEAN, d, v_exponent)

    @staticmethod
    def spectral_dirichlet(modes: int, r: float) -> "SpaceSpec":
        return SpaceSpec(SPECTRAL, modes, r)

    @staticmethod
    def grid_dirichlet(nodes: int, p: float) -> "SpaceSpec":
        return SpaceSpec(GRID, nodes, p)

    # -- derived geometry -----------------------------------------------------
    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Dirichlet Laplacian eigenvalues λ_k = (kπ)², spectral spaces only."""
        if self.kind != SPECTRAL:
            raise AttributeError("eigenvalues are defined for spectral spaces only")
        k = np.arange(1, self.dim + 1, dtype=float)
        return (k * np.pi) ** 2

    @property
    def h(self) -> float:
        """Mesh width 1/(n+1), grid spaces only."""
        if self.kind != GRID:
            raise AttributeError("h is defined for grid spaces only")
        return 1.0 / (self.dim + 1)

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Midpoint quadrature nodes on (0,1), Q = 4K of them."""
        if self.kind != SPECTRAL:
            raise AttributeError("quad_points are defined for spectral spaces only")
        q = 4 * self.dim
        return (np.arange(q) + 0.5) / q

    @cached_property
    def synthesis(self) -> np.ndarray:
        """(Q, K) matrix of mode values √2·sin(kπx_q) at the quadrature nodes.

        Row q holds the K mode values at x_q, so ``synthesis @ u`` evaluates
        the sine series on the quadrature grid and ``synthesis.T @ vals / Q``
        projects grid values back onto coefficients. With Q = 4K these two
        maps compose to the identity exactly.
        """
        k = np.arange(1, self.dim + 1)
        return np.sqrt(2.0) * np.sin(np.pi * np.outer(self.quad_points, k))

    @cached_property
    def h_weights(self) -> np.ndarray:
        """Diagonal weights w with ⟨u,v⟩_H = Σ w_l u_l v_l."""
        if self.kind == EUCLIDEAN:
            return np.ones(self.dim)
        if self.kind == SPECTRAL:
            return 1.0 / self.eigenvalues
        return np.full(self.dim, self.h)

    def grid_nodes(self) -> np.ndarray:
        """Interior node positions i·h, grid spaces only."""
        return np.arange(1, self.dim + 1) * self.h

    def check_state(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"state of shape {u.shape} does not match space dim {self.dim}")
        return u


# -- inner products and norms -------------------------------------------------

def h_inner(u, v, space: SpaceSpec) -> float:
    """Inner product of H.

    Euclidean: Σ u_l v_l. Spectral (H = dual of W₀^{1,2}): Σ λ_k^{-1} u_k v_k.
    Grid (H = L²): h·Σ u_i v_i, computed as Σ u_i v_i / (n+1) so that the
    implicit h·(n+1) = 1 holds exactly.
    """
    u = space.check_state(u)
    v = space.check_state(v)
    if space.kind == EUCLIDEAN:
        return float(np.dot(u, v))
    if space.kind == SPECTRAL:
        return float(np.dot(u / space.eigenvalues, v))
    return float(np.dot(u, v)) / (space.dim + 1)


def h_norm_sq(u, space: SpaceSpec) -> float:
    return h_inner(u, u, space)


def h_norm(u, space: SpaceSpec) -> float:
    return float(np.sqrt(max(h_norm_sq(u, space), 0.0)))


def v_norm(u, space: SpaceSpec) -> float:
    """Norm of V at the space's exponent.

    Euclidean: |u|. Spectral: the L^r(0,1) norm of the sine reconstruction
    via midpoint quadrature. Grid: the discrete W₀^{1,p} seminorm
    (Σ_edges h·|Δu/h|^p)^{1/p} with zero ghost values at both ends.
    """
    u = space.check_state(u)
    p = space.v_exponent
    if space.kind == EUCLIDEAN:
        return float(np.linalg.norm(u))
    if space.kind == SPECTRAL:
        vals = space.synthesis @ u
        return float(np.mean(np.abs(vals) ** p) ** (1.0 / p))
    g = np.diff(u, prepend=0.0, append=0.0) / space.h
    return float((np.sum(np.abs(g) ** p) * space.h) ** (1.0 / p))


def dual_pair(a, v, space: SpaceSpec) -> float:
    """Duality pairing between V* and V.

    V*-vectors are stored in the same coordinates as H-vectors, so the
    formula is the one of ``h_inner``; restricted to H × V the pairing is
    the H inner product by construction.
    """
    return h_inner(a, v, space)


def vstar_norm(a, space: SpaceSpec) -> float:
    """Dual norm of V* at the space's exponent, for growth diagnostics.

    Euclidean: |a|. Spectral: V = L^r, and coordinates a_k = -λ_k ψ_k
    identify a with the function ψ through the Laplacian isometry, so the
    dual norm is the L^{r'} quadrature norm of the reconstruction of
    ψ_k = -a_k/λ_k. Grid: V = W₀^{1,p}; by discrete summation by parts
    ⟨a, v⟩ = h·Σ_e ψ_e g_e with ψ the reversed cumulative sum of -h·a and
    g the edge gradient of v constrained to Σ g_e = 0, hence
    ‖a‖_{V*} = min_c ‖ψ - c‖_{ℓ^{p'}(h)}, a scalar convex minimization.
    """
    a = space.check_state(a)
    p = space.v_exponent
    q = p / (p - 1.0)
    if space.kind == EUCLIDEAN:
        return float(np.linalg.norm(a))
    if space.kind == SPECTRAL:
        psi = -a / space.eigenvalues
        vals = space.synthesis @ psi
        return float(np.mean(np.abs(vals) ** q) ** (1.0 / q))
    h = space.h
    # ψ_e = h · Σ_{i > e} a_i over the n+1 edges (last edge pairs with nothing)
    psi = h * np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])

    def dual_q(c):
        return np.sum(np.abs(psi - c) ** q) * h

    res = minimize_scalar(dual_q, bounds=(float(psi.min()), float(psi.max())),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(dual_q(res.x), dual_q(psi.min()), dual_q(psi.max())) ** (1.0 / q))
