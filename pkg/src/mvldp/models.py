"""Coefficient families for the state equation and a sampling auditor.

A :class:`ModelSpec` packages the drift A(t, u, μ) (V*-valued) and the
finite-rank diffusion B(t, u, μ) (H-valued per noise channel) of one of
three families:

``mvsde``
    Finite-dimensional linear mean-field drift a·u + b̄·mean(μ) on R^d.

``porous_media``
    Sine-spectral porous-medium operator: component k of the drift is
    -λ_k·(Ψ(u, μ))_k with Ψ(u, μ) = |u|^{r-2}u + κ·μ(‖·‖_H²)·u evaluated
    pointwise on the quadrature grid and projected back to coefficients.
    The sign convention fixes pairing(drift(u), u) = -∫ Ψ(u)·u, making
    the operator dissipative with margin θ = 2 for the leading term.

``p_laplace``
    Grid p-Laplacian div(|∇u|^{p-2}∇u) by flux differencing with zero
    ghost nodes, plus the mean-field reaction
    F(t, u, μ) = c0 + c1·u + c2·(mean over μ of node averages).

Diffusion is a sum of m channels against fixed H-profiles f_j with scalar
gains s_j(t, u, μ) = c_γ(t)·(β0_j + β1_j·⟨u, f_j⟩_H + β2_j·√μ(‖·‖_H²)),
where c_γ(t) = 1 + t^γ when a Hölder exponent γ > 0 is configured and 1
otherwise. Finite rank keeps the operator Hilbert-Schmidt (and compact)
by construction.

``audit_hypotheses`` samples states, measures and times, and checks the
structural conditions the solvers rely on — coercivity, one-sided
Lipschitz monotonicity (in state and quadratic-transport distance),
dual-norm growth, and time Hölder continuity of the diffusion — by
fitting the smallest empirical constant and flagging configurations whose
required constant exceeds an admissible cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .measure import Ensemble, mean, second_moment, w2
from .spaces import (EUCLIDEAN, GRID, SPECTRAL, SpaceSpec, dual_pair, h_norm,
                     h_norm_sq, v_norm, vstar_norm)

MVSDE = "mvsde"
POROUS = "porous_media"
PLAPLACE = "p_laplace"


class BlowupError(RuntimeError):
    """Raised when a coefficient or state evaluates to NaN/Inf."""


@dataclass(frozen=True)
class ModelSpec:
    family: str
    space: SpaceSpec
    theta: float
    noise_f: np.ndarray            # (m, dim) channel profiles in H
    beta0: np.ndarray              # (m,) constant gains
    beta1: np.ndarray              # (m,) state-coupling gains
    beta2: np.ndarray              # (m,) measure-coupling gains
    hoelder_gamma: float = 0.0
    a: float = 0.0                 # mvsde drift slope
    b_bar: float = 0.0             # mvsde mean-field weight
    kappa: float = 0.0             # porous-media mean-field weight
    c0: float = 0.0                # p-laplace reaction constants
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if self.family not in (MVSDE, POROUS, PLAPLACE):
            raise ValueError(f"unknown model family {self.family!r}")
        if not self.theta > 0:
            raise ValueError("coercivity constant theta must be > 0")
        expected = {MVSDE: EUCLIDEAN, POROUS: SPECTRAL, PLAPLACE: GRID}[self.family]
        if self.space.kind != expected:
            raise ValueError(f"family {self.family} requires a {expected} space")
        if self.family in (POROUS, PLAPLACE) and self.space.v_exponent < 2:
            raise ValueError("porous_media/p_laplace require exponent >= 2")
        if self.kappa < 0:
            raise ValueError("mean-field weight kappa must be >= 0")
        if not 0.0 <= self.hoelder_gamma <= 1.0:
            raise ValueError("hoelder_gamma must lie in [0, 1]")
        f = np.atleast_2d(np.asarray(self.noise_f, dtype=float))
        if f.shape[1] != self.space.dim:
            raise ValueError("noise profiles must match the space dimension")
        object.__setattr__(self, "noise_f", f)
        m = f.shape[0]
        for name in ("beta0", "beta1", "beta2"):
            b = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (m,)).copy()
            object.__setattr__(self, name, b)

    @property
    def alpha(self) -> float:
        """Coercivity exponent: 2, r, or p depending on the family."""
        return 2.0 if self.family == MVSDE else self.space.v_exponent

    @property
    def noise_rank(self) -> int:
        return self.noise_f.shape[0]

    @cached_property
    def _channel_h_sq(self) -> np.ndarray:
        return np.array([h_norm_sq(f, self.space) for f in self.noise_f])

    @cached_property
    def _channel_h_weighted(self) -> np.ndarray:
        # rows f_j scaled by the H weights, so ⟨u, f_j⟩_H = u · row_j
        return self.noise_f * self.space.h_weights


def time_gain(model: ModelSpec, t: float) -> float:
    """Hölder-γ time factor of the diffusion gains: 1 + t^γ, or 1 if γ = 0."""
    if model.hoelder_gamma <= 0.0:
        return 1.0
    return 1.0 + float(t) ** model.hoelder_gamma


# -- factories ------------------------------------------------------------------

def _channel_profiles(space: SpaceSpec, modes) -> np.ndarray:
    """Unit-H-norm noise profiles: coordinate axes or low sine modes."""
    out = np.zeros((len(modes), space.dim))
    if space.kind == EUCLIDEAN:
        for j, k in enumerate(modes):
            if not 1 <= k <= space.dim:
                raise ValueError("euclidean noise axis out of range")
            out[j, k - 1] = 1.0
        return out
    if space.kind == SPECTRAL:
        for j, k in enumerate(modes):
            if not 1 <= k <= space.dim:
                raise ValueError("spectral noise mode out of range")
            out[j, k - 1] = k * np.pi  # unit H-norm: ‖e_k‖_H = 1/(kπ)
        return out
    x = space.grid_nodes()
    for j, k in enumerate(modes):
        prof = np.sin(k * np.pi * x)
        out[j] = prof / h_norm(prof, space)
    return out


def mvsde_model(d: int = 1, a: float = -1.0, b_bar: float = 0.5, *,
                theta: float = 1.0, noise_rank: int | None = None,
                beta0=1.0, beta1=0.0, beta2=0.0,
                hoelder_gamma: float = 0.0) -> ModelSpec:
    m = d if noise_rank is None else noise_rank
    space = SpaceSpec.euclidean(d)
    f = _channel_profiles(space, [1 + (j % d) for j in range(m)])
    return ModelSpec(MVSDE, space, theta, f, beta0, beta1, beta2,
                     hoelder_gamma, a=a, b_bar=b_bar)


def lin1d(a: float = -1.0, b_bar: float = 0.5, sigma: float = 1.0) -> ModelSpec:
    """The 1-d linear mean-field benchmark with additive noise."""
    return mvsde_model(1, a, b_bar, beta0=sigma)


def porous_media_model(modes: int = 16, r: float = 4.0, kappa: float = 0.1, *,
                       theta: float = 2.0, noise_modes=(1,),
                       beta0=0.1, beta1=0.0, beta2=0.0,
                       hoelder_gamma: float = 0.0) -> ModelSpec:
    space = SpaceSpec.spectral_dirichlet(modes, r)
    f = _channel_profiles(space, list(noise_modes))
    return ModelSpec(POROUS, space, theta, f, beta0, beta1, beta2,
                     hoelder_gamma, kappa=kappa)


def p_laplace_model(nodes: int = 64, p: float = 4.0, *,
                    c0: float = 0.0, c1: float = -0.5, c2: float = 0.25,
                    theta: float = 2.0, noise_modes=(1,),
                    beta0=0.1, beta1=0.0, beta2=0.0,
                    hoelder_gamma: float = 0.0) -> ModelSpec:
    space = SpaceSpec.grid_dirichlet(nodes, p)
    f = _channel_profiles(space, list(noise_modes))
    return ModelSpec(PLAPLACE, space, theta, f, beta0, beta1, beta2,
                     hoelder_gamma, c0=c0, c1=c1, c2=c2)


# -- drift ------------------------------------------------------------------------

def _require_finite(arr: np.ndarray, what: str):
    if not np.isfinite(arr).all():
        raise BlowupError(f"non-finite {what}: state blow-up")


def drift_batch(model: ModelSpec, t: float, states: np.ndarray, mu: Ensemble) -> np.ndarray:
    """Drift A(t, ·, μ) applied to a (P, dim) batch of states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    space = model.space
    if states.shape[1] != space.dim:
        raise ValueError("state batch does not match the model's space")
    if mu.dim != space.dim:
        raise ValueError("measure does not match the model's space")
    if model.family == MVSDE:
        return model.a * states + model.b_bar * mean(mu)
    if model.family == POROUS:
        r = space.v_exponent
        with np.errstate(all="ignore"):
            m2 = second_moment(mu, space)
            vals = states @ space.synthesis.T
            psi = vals if r == 2.0 else np.abs(vals) ** (r - 2.0) * vals
            if model.kappa != 0.0:
                psi = psi + (model.kappa * m2) * vals
            out = -space.eigenvalues * (psi @ space.synthesis) / space.quad_points.size
        _require_finite(out, "porous-media drift")
        return out
    p = space.v_exponent
    h = space.h
    with np.errstate(all="ignore"):
        g = np.diff(states, axis=1, prepend=0.0, append=0.0) / h
        flux = g if p == 2.0 else np.abs(g) ** (p - 2.0) * g
        out = np.diff(flux, axis=1) / h
        out = out + model.c0 + model.c1 * states + model.c2 * _mean_node_average(mu)
    _require_finite(out, "p-laplace drift")
    return out


def _mean_node_average(mu: Ensemble) -> float:
    return float(np.mean(mean(mu)))


def drift(model: ModelSpec, t: float, u, mu: Ensemble) -> np.ndarray:
    """Drift at a single state; see :func:`drift_batch`."""
    return drift_batch(model, t, np.asarray(u, dtype=float)[None, :], mu)[0]


def explicit_step_rate(model: ModelSpec, t: float, states: np.ndarray, mu: Ensemble) -> float:
    """Local stiffness estimate λ_max·max|Ψ'| for the explicit-step guard.

    Nonzero only for the spectral porous-medium family, whose top mode
    constrains the stable step: the caller must keep dt·rate ≤ 1.
    """
    if model.family != POROUS:
        return 0.0
    space = model.space
    r = space.v_exponent
    vals = np.atleast_2d(states) @ space.synthesis.T
    psi_slope = (r - 1.0) * float(np.max(np.abs(vals)) ** (r - 2.0))
    psi_slope += model.kappa * second_moment(mu, space)
    return float(space.eigenvalues[-1]) * psi_slope


# -- diffusion --------------------------------------------------------------------

def _gains_batch(model: ModelSpec, t: float, states: np.ndarray, mu: Ensemble) -> np.ndarray:
    """Per-channel scalar gains s_j(t, u, μ) for a (P, dim) batch → (P, m)."""
    m2 = second_moment(mu, model.space)
    s = model.beta0 + states @ model._channel_h_weighted.T * model.beta1
    s = s + model.beta2 * np.sqrt(m2)
    return s * time_gain(model, t)


def apply_diffusion_batch(model: ModelSpec, t: float, states: np.ndarray,
                          mu: Ensemble, w: np.ndarray) -> np.ndarray:
    """Σ_j s_j(t, u, μ)·w_j·f_j for each row of a (P, dim) batch.

    ``w`` is a (P, m) array of channel coordinates (or (m,) to broadcast):
    a Brownian increment, or a control value times dt.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    s = _gains_batch(model, t, states, mu)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, s.shape)
    return (s * w) @ model.noise_f


def apply_diffusion(model: ModelSpec, t: float, u, mu: Ensemble, w) -> np.ndarray:
    """Diffusion at a single state; see :func:`apply_diffusion_batch`."""
    u = np.asarray(u, dtype=float)[None, :]
    w = np.asarray(w, dtype=float)[None, :]
    return apply_diffusion_batch(model, t, u, mu, w)[0]


def hs_norm_sq(model: ModelSpec, t: float, u, mu: Ensemble) -> float:
    """Squared Hilbert-Schmidt norm Σ_j s_j²·‖f_j‖_H² of the diffusion."""
    u = np.asarray(u, dtype=float)[None, :]
    s = _gains_batch(model, t, u, mu)[0]
    return float(np.sum(s * s * model._channel_h_sq))


# -- adjoint building blocks --------------------------------------------------------

def drift_state_vjp(model: ModelSpec, t: float, u: np.ndarray, mu: Ensemble,
                    lam: np.ndarray) -> np.ndarray:
    """(∂A/∂u)ᵀ·lam at state u with the measure held frozen."""
    space = model.space
    if model.family == MVSDE:
        return model.a * lam
    if model.family == POROUS:
        r = space.v_exponent
        vals = space.synthesis @ u
        slope = (1.0 if r == 2.0 else (r - 1.0) * np.abs(vals) ** (r - 2.0))
        slope = slope + model.kappa * second_moment(mu, space)
        inner = space.synthesis @ (space.eigenvalues * lam)
        return -(space.synthesis.T @ (slope * inner)) / space.quad_points.size
    p = space.v_exponent
    h = space.h
    g = np.diff(u, prepend=0.0, append=0.0) / h
    slope = (1.0 if p == 2.0 else (p - 1.0) * np.abs(g) ** (p - 2.0))
    glam = np.diff(lam, prepend=0.0, append=0.0) / h
    # the flux-differenced operator is symmetric, so vjp = jvp
    return np.diff(slope * glam) / h + model.c1 * lam


def diffusion_state_vjp(model: ModelSpec, t: float, u: np.ndarray, mu: Ensemble,
                        w: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """(∂/∂u [B(t, u, μ)·w])ᵀ·lam with the measure held frozen."""
    coeff = time_gain(model, t) * model.beta1 * w * (model.noise_f @ lam)
    return coeff @ model._channel_h_weighted


# -- hypothesis audit ----------------------------------------------------------------

@dataclass(frozen=True)
class SamplerSpec:
    """Random test-point generator settings for the coefficient audit."""
    state_scale: float = 1.0
    max_points: int = 4
    horizon: float = 1.0


@dataclass(frozen=True)
class AuditOptions:
    constant_cap: float = 1e3   # largest admissible empirical constant
    tol: float = 1e-9           # defect tolerance at the fitted constant


@dataclass(frozen=True)
class HypothesisResult:
    name: str
    fitted_constant: float
    defect: float
    passed: bool
    n_samples: int


@dataclass(frozen=True)
class AuditReport:
    family: str
    trials: int
    seed: int
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def __getitem__(self, name: str) -> HypothesisResult:
        return self.results[name]


def _smooth_direction(space: SpaceSpec) -> np.ndarray:
    """Lowest-frequency unit direction: the probe for one-sided Lipschitz
    violations that rough (high-gradient) perturbations would mask."""
    if space.kind == GRID:
        d = np.sin(np.pi * space.grid_nodes())
    else:
        d = np.zeros(space.dim)
        d[0] = 1.0
    return d / np.linalg.norm(d)


def _fit_and_judge(name, lhs, rhs, opts: AuditOptions) -> HypothesisResult:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.size == 0:
        return HypothesisResult(name, 0.0, 0.0, True, 0)
    fitted = float(max(0.0, np.max(lhs / rhs)))
    c_used = min(fitted, opts.constant_cap)
    # violation per unit of the structural right-hand side: the amount the
    # admissible constant would have to grow; scale-free, so the tolerance
    # is meaningful for samples of any magnitude
    defect = float(np.max((lhs - c_used * rhs) / np.maximum(1.0, rhs)))
    return HypothesisResult(name, fitted, defect, defect <= opts.tol, lhs.size)


def audit_hypotheses(model: ModelSpec, sampler: SamplerSpec | None = None,
                     trials: int = 500, seed: int = 0,
                     options: AuditOptions | None = None) -> AuditReport:
    """Sample-based audit of the structural coefficient hypotheses.

    For each hypothesis the auditor records the left-hand side and the
    structural right-hand side on every sample, fits the smallest constant
    C that dominates all samples, and evaluates the worst defect
    (lhs - min(C, cap)·rhs) / max(1, rhs) — the amount by which the
    admissible constant would have to grow. A hypothesis passes when that
    defect is within tolerance; configurations whose required constant
    exceeds the cap are flagged FAIL.

    H1 is probed as a local continuity modulus of the drift pairing along
    shrinking state perturbations; H2 is the coercivity balance
    2·⟨A(u), u⟩ + ‖B‖²_HS + θ‖u‖_V^α; H3 combines the one-sided
    monotonicity of A and the Lipschitz bound of B against
    ‖u-v‖_H² + W₂(μ,ν)²; H4 is the V*-growth ‖A‖^{α/(α-1)}; H5 is the
    time Hölder ratio of B (identically zero gains when homogeneous).
    """
    if trials < 1:
        raise ValueError("audit needs at least one trial")
    sampler = sampler or SamplerSpec()
    opts = options or AuditOptions()
    rng = np.random.default_rng(seed)
    space = model.space
    dim = space.dim
    alpha = model.alpha
    conj = alpha / (alpha - 1.0)

    rows = {k: ([], []) for k in ("H1", "H2", "H3", "H4", "H5")}

    def push(key, lhs, rhs):
        rows[key][0].append(lhs)
        rows[key][1].append(rhs)

    smooth = _smooth_direction(space)
    for i in range(trials):
        t = rng.uniform(0.0, sampler.horizon)
        s = rng.uniform(0.0, sampler.horizon)
        su = sampler.state_scale * 10.0 ** rng.uniform(-2.0, 0.5)
        u = su * rng.standard_normal(dim)
        if i % 4 == 3:
            v = sampler.state_scale * 10.0 ** rng.uniform(-2.0, 0.5) * rng.standard_normal(dim)
        else:
            dv = sampler.state_scale * 10.0 ** rng.uniform(-3.0, 0.0)
            direction = smooth if i % 2 == 0 else rng.standard_normal(dim)
            v = u + dv * direction
        n_pts = int(rng.integers(1, sampler.max_points + 1))
        mu = Ensemble(sampler.state_scale * rng.standard_normal((n_pts, dim)))
        if i % 3 == 0:
            nu = mu
        elif i % 3 == 1:
            nu = Ensemble(mu.points + sampler.state_scale
                          * 10.0 ** rng.uniform(-3.0, 0.0) * rng.standard_normal((n_pts, dim)))
        else:
            nu = Ensemble(sampler.state_scale * rng.standard_normal((n_pts, dim)))

        m2_mu = second_moment(mu, space)
        vn_u = v_norm(u, space)
        a_u = drift(model, t, u, mu)
        a_v = drift(model, t, v, nu)

        # H1: difference quotient of the drift pairing along a small perturbation
        eps = 1e-4 * max(sampler.state_scale, 1e-12)
        du = rng.standard_normal(dim)
        du /= max(np.linalg.norm(du), 1e-300)
        wv = rng.standard_normal(dim)
        wv /= max(np.linalg.norm(wv), 1e-300)
        pair_diff = abs(dual_pair(drift(model, t, u + eps * du, mu) - a_u, wv, space))
        push("H1", pair_diff, eps * (1.0 + vn_u ** alpha + m2_mu))

        # H2: coercivity balance at the model's claimed (θ, α)
        lhs2 = (2.0 * dual_pair(a_u, u, space) + hs_norm_sq(model, t, u, mu)
                + model.theta * vn_u ** alpha)
        push("H2", lhs2, h_norm_sq(u, space) + m2_mu + 1.0)

        # H3: one-sided monotonicity of A and Lipschitz bound of B
        dist_sq = h_norm_sq(u - v, space) + w2(mu, nu, space) ** 2
        if dist_sq > 1e-30:
            push("H3", 2.0 * dual_pair(a_u - a_v, u - v, space), dist_sq)
            su_g = _gains_batch(model, t, u[None, :], mu)[0]
            sv_g = _gains_batch(model, t, v[None, :], nu)[0]
            b_diff_sq = float(np.sum((su_g - sv_g) ** 2 * model._channel_h_sq))
            push("H3", b_diff_sq, dist_sq)

        # H4: V*-growth of the drift
        push("H4", vstar_norm(a_u, space) ** conj, 1.0 + vn_u ** alpha + m2_mu)

        # H5: time Hölder ratio of B (exponent γ; zero numerator if homogeneous)
        dt_pow = abs(t - s) ** model.hoelder_gamma if model.hoelder_gamma > 0 else 1.0
        if dt_pow > 1e-12:
            st_g = _gains_batch(model, t, u[None, :], mu)[0]
            ss_g = _gains_batch(model, s, u[None, :], mu)[0]
            b_t_diff = float(np.sqrt(np.sum((st_g - ss_g) ** 2 * model._channel_h_sq)))
            push("H5", b_t_diff, (1.0 + h_norm(u, space) + np.sqrt(m2_mu)) * dt_pow)

    results = {k: _fit_and_judge(k, lhs, rhs, opts) for k, (lhs, rhs) in rows.items()}
    return AuditReport(model.family, trials, seed, results)
