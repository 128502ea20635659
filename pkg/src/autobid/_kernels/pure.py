"""Pure-Python auction kernels; fallback twin of the compiled module.

Uncapped paths are vectorised with numpy.  Capped paths have to walk
impressions in arrival order (whether a bid can be charged depends on the
spend accumulated so far in the step) and therefore run as plain loops.
Totals are accumulated per step and then folded across steps, so a multi-step
rollout equals the sum of its single-step outcomes.
"""

import numpy as np

BACKEND = "pure"


def run_bucket(values, prices, beta, cap, use_cap, mask_out=None):
    """One decision step: bid beta*value on every impression in order.

    A bid wins when beta*value >= price and, under a cap, when the price still
    fits into cap minus the spend already charged within this call.
    Returns (cost, value, wins).
    """
    if use_cap:
        cost = 0.0
        value = 0.0
        wins = 0
        n = len(values)
        for i in range(n):
            p = prices[i]
            if beta * values[i] >= p and p <= cap - cost:
                cost += p
                value += values[i]
                wins += 1
                if mask_out is not None:
                    mask_out[i] = 1
        return cost, value, wins
    won = beta * np.asarray(values) >= np.asarray(prices)
    if mask_out is not None:
        mask_out[: len(values)] = won
    cost = float(np.asarray(prices)[won].sum())
    value = float(np.asarray(values)[won].sum())
    return cost, value, int(np.count_nonzero(won))


def run_tail(values, prices, offsets, start_step, beta, cap, use_cap):
    """Fixed-coefficient rollout over step buckets start_step..end.

    The cap is threaded across steps: step t sees cap minus everything spent
    in earlier steps.  Returns (cost, value, wins).
    """
    total_cost = 0.0
    total_value = 0.0
    wins = 0
    for t in range(start_step, len(offsets) - 1):
        lo, hi = offsets[t], offsets[t + 1]
        c, v, w = run_bucket(values[lo:hi], prices[lo:hi], beta, cap - total_cost, use_cap)
        total_cost += c
        total_value += v
        wins += w
    return total_cost, total_value, wins


def run_tail_many(values, prices, offsets, start_step, betas, cap, use_cap):
    """run_tail for a grid of coefficients; returns (costs, values, wins) arrays."""
    m = len(betas)
    costs = np.empty(m)
    vals = np.empty(m)
    wins = np.empty(m, dtype=np.int64)
    for j, b in enumerate(betas):
        costs[j], vals[j], wins[j] = run_tail(values, prices, offsets, start_step, b, cap, use_cap)
    return costs, vals, wins
