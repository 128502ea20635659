"""Online bidding decision: budget pass-through with ROI-driven correction.

With no ROI target the decision is simply the coefficient curve evaluated at
the remaining budget.  With a target, the ROI slack

    delta_roi = hist_value + f_value(C_target) - r_target * (hist_cost + C_target)

is checked at C_target = remaining budget; when negative, the spend target is
iterated by gradient steps g = f_value'(C_target) - r_target (the exact
derivative of the slack), scaled by an adaptive step size: the step doubles
while the slack stays negative and a step that overshoots past the tolerance
band is undone and halved.  The final coefficient is the coefficient curve at
the corrected spend target, never above the pass-through coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .auction import EpisodeState
from .hindsight import StateFeatures
from .policy import Checkpoint
from .spline import eval_curve, eval_derivative


class ControllerError(RuntimeError):
    """Spline produced non-finite output; carries a state dump."""


@dataclass(frozen=True)
class ControllerConfig:
    """Correction loop knobs.  None fields resolve per decision:

    lambda_: 0.05 * checkpoint b_scale, c_floor: 1e-9 * b_scale,
    roi_tolerance: 1e-6 * (hist_cost + remaining_budget).
    """

    lambda_: Optional[float] = None
    max_iters: int = 50
    c_floor: Optional[float] = None
    roi_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.lambda_ is not None and not self.lambda_ > 0:
            raise ValueError("lambda_ must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.c_floor is not None and not self.c_floor > 0:
            raise ValueError("c_floor must be positive")
        if self.roi_tolerance is not None and self.roi_tolerance < 0:
            raise ValueError("roi_tolerance must be nonnegative")


BCB_PASSTHROUGH = "bcb_passthrough"
ROI_CORRECTED = "roi_corrected"
ROI_INFEASIBLE = "roi_infeasible"


@dataclass(frozen=True)
class Decision:
    beta_opt: float
    case: str
    alpha: float
    iterations_used: int
    c_target_final: float
    delta_roi: float
    step: int = 0


def decide(
    state: EpisodeState,
    features: StateFeatures,
    checkpoint: Checkpoint,
    r_target: Optional[float],
    cfg: ControllerConfig = ControllerConfig(),
) -> Decision:
    """One bidding decision for the current step."""
    theta_curve, phi_curve = checkpoint.curves(features.vector)
    b_scale = checkpoint.b_scale
    beta_scale = checkpoint.beta_scale
    v_scale = checkpoint.value_scale

    def f_theta(c):
        return beta_scale * eval_curve(theta_curve, c / b_scale)

    def f_phi(c):
        return v_scale * eval_curve(phi_curve, c / b_scale)

    def f_phi_prime(c):
        return (v_scale / b_scale) * eval_derivative(phi_curve, c / b_scale)

    b_tau = state.remaining_budget
    beta_pass = f_theta(b_tau)
    if not np.isfinite(beta_pass):
        raise ControllerError(f"non-finite coefficient at state {state!r}")
    beta_pass = max(0.0, beta_pass)

    if r_target is None:
        return Decision(
            beta_opt=beta_pass,
            case=BCB_PASSTHROUGH,
            alpha=1.0,
            iterations_used=0,
            c_target_final=b_tau,
            delta_roi=float("nan"),
            step=state.step,
        )

    tol = cfg.roi_tolerance if cfg.roi_tolerance is not None else 1e-6 * (state.hist_cost + b_tau)
    lam = cfg.lambda_ if cfg.lambda_ is not None else 0.05 * b_scale
    c_floor = cfg.c_floor if cfg.c_floor is not None else 1e-9 * b_scale
    c_floor = min(c_floor, b_tau) if b_tau > 0 else c_floor

    def delta_roi(c):
        d = state.hist_value + f_phi(c) - r_target * (state.hist_cost + c)
        if not np.isfinite(d):
            raise ControllerError(f"non-finite ROI slack at C_target={c}, state {state!r}")
        return d

    c = b_tau
    d = delta_roi(c)
    if d >= -tol:
        return Decision(
            beta_opt=beta_pass,
            case=BCB_PASSTHROUGH,
            alpha=1.0,
            iterations_used=0,
            c_target_final=b_tau,
            delta_roi=d,
            step=state.step,
        )

    best_feasible = None  # (c, delta) with the smallest feasible slack seen
    iters = 0
    converged = False
    while iters < cfg.max_iters:
        iters += 1
        g = f_phi_prime(c) - r_target
        c_new = min(max(c + lam * g, c_floor), b_tau)
        d_new = delta_roi(c_new)
        if d_new >= -tol:
            if d_new <= tol:
                c, d = c_new, d_new
                converged = True
                break
            # overshot past the band: remember, undo, shrink the step
            if best_feasible is None or d_new < best_feasible[1]:
                best_feasible = (c_new, d_new)
            lam *= 0.5
            continue
        if c_new == c:
            break  # clamped with no progress
        c, d = c_new, d_new
        lam *= 2.0

    if not converged and best_feasible is not None:
        c, d = best_feasible
        converged = True

    beta_corr = f_theta(c)
    if not np.isfinite(beta_corr):
        raise ControllerError(f"non-finite coefficient at C_target={c}, state {state!r}")
    beta_opt = min(max(0.0, beta_corr), beta_pass)  # correction never raises the bid
    alpha = beta_opt / beta_pass if beta_pass > 0 else 1.0
    return Decision(
        beta_opt=beta_opt,
        case=ROI_CORRECTED if converged else ROI_INFEASIBLE,
        alpha=alpha,
        iterations_used=iters,
        c_target_final=c,
        delta_roi=d,
        step=state.step,
    )


@dataclass(frozen=True)
class AlphaTrace:
    rows: list  # (step, alpha, delta_roi)
    roi_realized: float
    roi_ratio: float  # realized ROI over target (inf when target absent or no spend)


def alpha_trace(decisions, result, r_target: Optional[float]) -> AlphaTrace:
    """Per-step correction trace and the final realized-ROI/target ratio."""
    rows = [(d.step, d.alpha, d.delta_roi) for d in decisions]
    final = result.final_state
    realized = final.hist_value / final.hist_cost if final.hist_cost > 0 else float("inf")
    ratio = realized / r_target if r_target else float("inf")
    return AlphaTrace(rows=rows, roi_realized=realized, roi_ratio=ratio)


class ControllerPolicy:
    """run_campaign callback around decide(); records every Decision."""

    def __init__(self, checkpoint: Checkpoint, r_target=None, cfg: ControllerConfig = ControllerConfig(), context=None):
        from .hindsight import TrajectoryContext, compute_features

        self.checkpoint = checkpoint
        self.r_target = r_target
        self.cfg = cfg
        self.context = context if context is not None else TrajectoryContext()
        self.decisions: list[Decision] = []
        self._compute_features = compute_features

    def __call__(self, state: EpisodeState, view) -> float:
        features = self._compute_features(
            [rec.values for rec in view.records],
            [rec.won_prices for rec in view.records],
            view.current_values,
            view.T,
            self.context,
        )
        decision = decide(state, features, self.checkpoint, self.r_target, self.cfg)
        self.decisions.append(decision)
        return decision.beta_opt
