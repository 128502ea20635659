"""Offline selection solvers: exact optimum, greedy threshold, LP relaxation.

These are the ground-truth side of the package.  Given items (value, cost), a
budget, and optionally a minimum ROI, they answer: what is the best achievable
value (exact, by branch and bound), what does a single-threshold strategy get
(greedy in efficiency order), and what does the continuous relaxation allow.
The greedy solution also yields the threshold coefficient beta* = c/v of its
marginal item, and exhaust_beta inverts a realized-cost curve back to the
smallest coefficient that attains it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .auction import ImpressionStream


class InstanceTooLargeError(ValueError):
    """Exact solve refused: item count above the configured limit."""


@dataclass(frozen=True)
class SelectionInstance:
    """Items as parallel (value, cost) arrays plus the constraint set."""

    values: np.ndarray
    costs: np.ndarray
    budget: float
    roi_target: Optional[float] = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        costs = np.ascontiguousarray(self.costs, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "costs", costs)
        if values.shape != costs.shape or values.ndim != 1:
            raise ValueError("values/costs must be 1-d arrays of equal length")
        if len(values) and (values.min() <= 0 or costs.min() <= 0):
            raise ValueError("item values and costs must be positive")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @classmethod
    def from_items(cls, items: Sequence[Tuple[float, float]], budget: float, roi_target: Optional[float] = None):
        values = np.asarray([v for v, _ in items], dtype=np.float64)
        costs = np.asarray([c for _, c in items], dtype=np.float64)
        return cls(values, costs, budget, roi_target)

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SelectionResult:
    total_value: float
    total_cost: float
    chosen: np.ndarray  # uint8 indicator vector over input order
    beta_star: Optional[float] = None


def _efficiency_order(instance: SelectionInstance) -> np.ndarray:
    """Indices sorted by efficiency v/c descending; ties: lower cost, then input index."""
    eff = instance.values / instance.costs
    return np.lexsort((np.arange(instance.n), instance.costs, -eff))


def greedy_fcs(instance: SelectionInstance, stop_on_violation: bool = False) -> SelectionResult:
    """Greedy fixed-coefficient selection in efficiency order.

    Scans items by efficiency descending and keeps every item whose addition
    preserves both the budget and (when present) the running-prefix ROI.  By
    default an infeasible item is skipped and scanning continues; with
    stop_on_violation=True the scan ends at the first violation instead.
    beta_star is c/v of the last kept item (None if nothing fits).
    """
    order = _efficiency_order(instance)
    r = instance.roi_target
    chosen = np.zeros(instance.n, dtype=np.uint8)
    total_v = 0.0
    total_c = 0.0
    beta_star = None
    for i in order:
        v = instance.values[i]
        c = instance.costs[i]
        new_v = total_v + v
        new_c = total_c + c
        if new_c <= instance.budget and (r is None or new_v >= r * new_c):
            total_v, total_c = new_v, new_c
            chosen[i] = 1
            beta_star = c / v
        elif stop_on_violation:
            break
    return SelectionResult(total_value=total_v, total_cost=total_c, chosen=chosen, beta_star=beta_star)


def fractional_relaxation(instance: SelectionInstance) -> float:
    """Optimal value when items may be taken fractionally (0 <= y_i <= 1).

    Efficiency-ordered prefix plus a fraction of the first item that no longer
    fits; the fraction is limited by whichever constraint binds first (budget,
    or ROI when the marginal item sits below the target).  Upper-bounds the
    exact binary optimum on every instance.
    """
    order = _efficiency_order(instance)
    r = instance.roi_target
    total_v = 0.0
    total_c = 0.0
    for pos, i in enumerate(order):
        v = instance.values[i]
        c = instance.costs[i]
        new_v = total_v + v
        new_c = total_c + c
        if new_c <= instance.budget and (r is None or new_v >= r * new_c):
            total_v, total_c = new_v, new_c
            continue
        # marginal item: largest fraction keeping both constraints
        frac = (instance.budget - total_c) / c
        if r is not None and v < r * c:
            slack = total_v - r * total_c
            frac = min(frac, slack / (r * c - v))
        frac = min(1.0, max(0.0, frac))
        return total_v + frac * v
    return total_v


def _fractional_knapsack_bound(values, costs, eff_order, decided, start_rank, remaining_budget):
    """Budget-only fractional bound over the undecided items (ROI ignored)."""
    bound = 0.0
    rem = remaining_budget
    for rank in range(start_rank, len(eff_order)):
        i = eff_order[rank]
        if decided[i]:
            continue
        c = costs[i]
        if c <= rem:
            bound += values[i]
            rem -= c
        else:
            if rem > 0:
                bound += values[i] * (rem / c)
            break
    return bound


def milp_oracle(instance: SelectionInstance, limit: int = 25) -> SelectionResult:
    """Exact binary optimum by depth-first branch and bound.

    Items are branched in input order, exclude-first, so the first incumbent
    at the optimal value is the lexicographically smallest chosen vector.
    The bound is the budget-only fractional knapsack over undecided items;
    ROI feasibility is pruned via the maximum attainable positive slack.
    Raises InstanceTooLargeError above `limit` items.  An instance whose only
    feasible selection is empty returns V=0 with nothing chosen.
    """
    n = instance.n
    if n > limit:
        raise InstanceTooLargeError(f"{n} items exceeds exact-solver limit {limit}")
    values = instance.values
    costs = instance.costs
    budget = instance.budget
    r = instance.roi_target
    eff_order = _efficiency_order(instance)

    slack_gain = None
    suffix_gain = np.zeros(n + 1)
    if r is not None:
        slack_gain = values - r * costs
        suffix_gain[:n] = np.cumsum(np.maximum(slack_gain, 0.0)[::-1])[::-1]

    decided = np.zeros(n, dtype=bool)
    chosen = np.zeros(n, dtype=np.uint8)
    best = {"value": 0.0, "cost": 0.0, "chosen": np.zeros(n, dtype=np.uint8)}

    def dfs(i, cur_v, cur_c, cur_slack):
        if i == n:
            if (r is None or cur_slack >= 0.0) and cur_v > best["value"]:
                best["value"] = cur_v
                best["cost"] = cur_c
                best["chosen"] = chosen.copy()
            return
        if r is not None and cur_slack + suffix_gain[i] < 0.0:
            return
        bound = cur_v + _fractional_knapsack_bound(values, costs, eff_order, decided, 0, budget - cur_c)
        if bound <= best["value"]:
            return
        decided[i] = True
        # exclude first: lexicographically smallest optimum is found first
        dfs(i + 1, cur_v, cur_c, cur_slack)
        if cur_c + costs[i] <= budget:
            chosen[i] = 1
            gain = slack_gain[i] if r is not None else 0.0
            dfs(i + 1, cur_v + values[i], cur_c + costs[i], cur_slack + gain)
            chosen[i] = 0
        decided[i] = False

    dfs(0, 0.0, 0.0, 0.0)
    return SelectionResult(total_value=best["value"], total_cost=best["cost"], chosen=best["chosen"])


@dataclass(frozen=True)
class ExhaustResult:
    beta: float
    cost: float
    value: float
    no_spend: bool = False


def _tail_arrays(source: Union[ImpressionStream, SelectionInstance], from_step: int):
    if isinstance(source, ImpressionStream):
        start = from_step - 1
        if not 1 <= from_step <= source.T:
            raise ValueError(f"from_step {from_step} outside [1, {source.T}]")
        return source.values, source.prices, source.offsets, start
    offsets = np.asarray([0, source.n], dtype=np.int64)
    return source.values, source.costs, offsets, 0


def exhaust_beta(source: Union[ImpressionStream, SelectionInstance], budget: float, from_step: int = 1) -> ExhaustResult:
    """Smallest coefficient whose uncapped realized cost is the largest attainable cost <= budget.

    The cost curve is a step function jumping only at the breakpoints c/v, so
    the search is a binary search over the sorted unique breakpoints, with the
    cost at each probe evaluated by the same rollout kernel the simulator uses
    (the returned beta therefore reproduces its cost exactly under run_fixed).
    Returns beta=0 with no_spend=True when even the cheapest win exceeds the
    budget.
    """
    values, prices, offsets, start = _tail_arrays(source, from_step)
    tail_values = values[offsets[start] :]
    tail_prices = prices[offsets[start] :]
    if len(tail_values) == 0:
        return ExhaustResult(beta=0.0, cost=0.0, value=0.0, no_spend=True)
    breakpoints = np.unique(tail_prices / tail_values)

    def tail_at(beta):
        c, v, _ = _kernels.run_tail(values, prices, offsets, start, float(beta), 0.0, False)
        return c, v

    c_lo, v_lo = tail_at(breakpoints[0])
    if c_lo > budget:
        return ExhaustResult(beta=0.0, cost=0.0, value=0.0, no_spend=True)
    lo, hi = 0, len(breakpoints) - 1
    cost_lo, value_lo = c_lo, v_lo
    while lo < hi:
        mid = (lo + hi + 1) // 2
        c, v = tail_at(breakpoints[mid])
        if c <= budget:
            lo = mid
            cost_lo, value_lo = c, v
        else:
            hi = mid - 1
    return ExhaustResult(beta=float(breakpoints[lo]), cost=cost_lo, value=value_lo, no_spend=False)
