"""Small-noise McKean-Vlasov evolution toolkit.

Simulates the interacting-particle, zero-noise limit, skeleton, and
controlled dynamics of measure-dependent evolution equations in a
discretized Gelfand triple, evaluates and minimizes the quadratic-action
rate functional for terminal rare events, and verifies the small-noise
convergence statements numerically.
"""
from .dynamics import (Control, LawPath, StabilityError, TimeGrid, Trajectory,
                       derive_seed, simulate_controlled, simulate_limit,
                       simulate_particles, solve_skeleton, time_increment_stat)
from .ldp import (ContinuityReport, RareEvent, RareProbEstimate, RateOptions,
                  RateReport, SlopeReport, action, estimate_rare_prob, l2_mass,
                  rate_gradient, rate_minimize, verify_l5, verify_l6,
                  verify_t2, verify_t3)
from .measure import Ensemble, mean, second_moment, w2
from .models import (AuditOptions, AuditReport, BlowupError, ModelSpec,
                     SamplerSpec, apply_diffusion, audit_hypotheses, drift,
                     hs_norm_sq, lin1d, mvsde_model, p_laplace_model,
                     porous_media_model)
from .spaces import SpaceSpec, dual_pair, h_inner, h_norm, v_norm, vstar_norm

__version__ = "0.1.0"

__all__ = [
    "AuditOptions", "AuditReport", "BlowupError", "ContinuityReport",
    "Control", "Ensemble", "LawPath", "ModelSpec", "RareEvent",
    "RareProbEstimate", "RateOptions", "RateReport", "SamplerSpec",
    "SlopeReport", "SpaceSpec", "StabilityError", "TimeGrid", "Trajectory",
    "action", "apply_diffusion", "audit_hypotheses", "derive_seed", "drift",
    "dual_pair", "estimate_rare_prob", "h_inner", "h_norm", "hs_norm_sq",
    "l2_mass", "lin1d", "mean", "mvsde_model", "p_laplace_model",
    "porous_media_model", "rate_gradient", "rate_minimize", "second_moment",
    "simulate_controlled", "simulate_limit", "simulate_particles",
    "solve_skeleton", "time_increment_stat", "v_norm", "verify_l5",
    "verify_l6", "verify_t2", "verify_t3", "vstar_norm", "w2",
]
