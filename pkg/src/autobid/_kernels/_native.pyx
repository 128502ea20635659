# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled auction kernels: the hot inner loops of every rollout.

Semantics mirror autobid._kernels.pure exactly: wins use >=, caps are checked
against the spend accumulated so far within the step, and multi-step totals
are folded per step.
"""

import numpy as np

BACKEND = "native"


def run_bucket(double[::1] values, double[::1] prices, double beta, double cap,
               bint use_cap, unsigned char[::1] mask_out=None):
    cdef Py_ssize_t i, n = values.shape[0]
    cdef double cost = 0.0, value = 0.0, p
    cdef long wins = 0
    cdef bint want_mask = mask_out is not None
    for i in range(n):
        p = prices[i]
        if beta * values[i] >= p:
            if use_cap and p > cap - cost:
                continue
            cost += p
            value += values[i]
            wins += 1
            if want_mask:
                mask_out[i] = 1
    return cost, value, int(wins)


def run_tail(double[::1] values, double[::1] prices, long long[::1] offsets,
             Py_ssize_t start_step, double beta, double cap, bint use_cap):
    cdef Py_ssize_t t, i, nsteps = offsets.shape[0] - 1
    cdef double total_cost = 0.0, total_value = 0.0
    cdef double step_cost, step_value, step_cap, p
    cdef long wins = 0
    for t in range(start_step, nsteps):
        step_cap = cap - total_cost
        step_cost = 0.0
        step_value = 0.0
        for i in range(offsets[t], offsets[t + 1]):
            p = prices[i]
            if beta * values[i] >= p:
                if use_cap and p > step_cap - step_cost:
                    continue
                step_cost += p
                step_value += values[i]
                wins += 1
        total_cost += step_cost
        total_value += step_value
    return total_cost, total_value, int(wins)


def run_tail_many(double[::1] values, double[::1] prices, long long[::1] offsets,
                  Py_ssize_t start_step, double[::1] betas, double cap, bint use_cap):
    cdef Py_ssize_t j, m = betas.shape[0]
    costs = np.empty(m)
    vals = np.empty(m)
    wins = np.empty(m, dtype=np.int64)
    cdef double[::1] costs_v = costs
    cdef double[::1] vals_v = vals
    cdef long long[::1] wins_v = wins
    cdef double c, v
    cdef long w
    for j in range(m):
        c, v, w = run_tail(values, prices, offsets, start_step, betas[j], cap, use_cap)
        costs_v[j] = c
        vals_v[j] = v
        wins_v[j] = w
    return costs, vals, wins
