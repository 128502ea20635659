"""Rule-based comparison policies sharing the campaign callback interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .auction import EpisodeState
from .oracle import SelectionInstance, greedy_fcs

SPEND_PACING = "spend_pacing"
ROI_ERROR = "roi_error"


@dataclass(frozen=True)
class PidConfig:
    kp: float = 1.0
    ki: float = 0.1
    kd: float = 0.0
    mode: str = SPEND_PACING
    beta_min: float = 0.0
    beta_max: float = 10.0
    beta_init: float = 1.0

    def __post_init__(self):
        if self.mode not in (SPEND_PACING, ROI_ERROR):
            raise ValueError(f"unknown mode {self.mode}")
        if not self.beta_min <= self.beta_init <= self.beta_max:
            raise ValueError("beta_init must sit inside the clamp bounds")


def uniform_plan(step: int, T: int) -> float:
    """Planned cumulative spend fraction by the start of `step` (uniform pacing)."""
    return (step - 1) / T


class PidPolicy:
    """Proportional-integral-derivative coefficient adjustment.

    spend_pacing mode: error = planned cumulative spend fraction - actual
    fraction, so persistent underspend pushes beta up.  roi_error mode:
    error = realized ROI - target, so an ROI shortfall pulls beta down.
    State (integral, last error) is campaign-local.
    """

    def __init__(self, cfg: PidConfig = PidConfig(), plan: Callable = uniform_plan, roi_target: Optional[float] = None):
        self.cfg = cfg
        self.plan = plan
        self.roi_target = roi_target
        self.beta = cfg.beta_init
        self.integral = 0.0
        self.last_error: Optional[float] = None

    def _error(self, state: EpisodeState, view) -> float:
        if self.cfg.mode == SPEND_PACING:
            planned = self.plan(state.step, view.T)
            actual = state.hist_cost / view.budget
            return planned - actual
        target = self.roi_target if self.roi_target is not None else (view.roi_target or 0.0)
        realized = state.hist_value / state.hist_cost if state.hist_cost > 0 else target
        return realized - target

    def __call__(self, state: EpisodeState, view) -> float:
        err = self._error(state, view)
        self.integral += err
        deriv = err - self.last_error if self.last_error is not None else 0.0
        self.last_error = err
        self.beta += self.cfg.kp * err + self.cfg.ki * self.integral + self.cfg.kd * deriv
        self.beta = min(max(self.beta, self.cfg.beta_min), self.cfg.beta_max)
        return self.beta


class LpReplanPolicy:
    """Replans a threshold coefficient each step from the observed supply.

    History impressions stand in for the remaining supply; the remaining
    budget is rescaled to history volume (equivalently the history is scaled
    to the remaining steps) and the greedy threshold of that instance is bid.
    No history yet -> the configured prior; exhausted budget -> zero.
    """

    def __init__(self, prior_beta: float = 1.0, roi_target: Optional[float] = None):
        if prior_beta < 0:
            raise ValueError("prior_beta must be nonnegative")
        self.prior_beta = prior_beta
        self.roi_target = roi_target

    def __call__(self, state: EpisodeState, view) -> float:
        if state.remaining_budget <= 0:
            return 0.0
        past = [rec for rec in view.records if len(rec.values)]
        if not past:
            return self.prior_beta
        values = np.concatenate([rec.values for rec in past])
        prices = np.concatenate([rec.prices for rec in past])
        steps_done = len(view.records)
        steps_left = view.T - state.step + 1
        equiv_budget = state.remaining_budget * steps_done / steps_left
        roi = self.roi_target if self.roi_target is not None else view.roi_target
        instance = SelectionInstance(values, prices, budget=equiv_budget, roi_target=roi)
        result = greedy_fcs(instance)
        return result.beta_star if result.beta_star is not None else self.prior_beta
