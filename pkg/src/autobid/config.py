"""Shared structured configuration for the CLI.

A single JSON file can override any default below; unknown keys are rejected
so typos fail loudly.  The default seed can also come from the AUTOBID_SEED
environment variable (the file value, when present, wins).
"""

from __future__ import annotations

import json
import os

SEED_ENV_VAR = "AUTOBID_SEED"

DEFAULTS = {
    # generator
    "T": 48,
    "mean_imps_per_step": 40.0,
    "imps_amplitude": 0.3,
    "value_mu": -1.0,
    "value_sigma": 0.5,
    "price_gamma": 0.7,
    "price_noise_sigma": 0.45,
    "price_level_amplitude": 0.25,
    "n_advertisers": 4,
    "n_categories": 2,
    "advertiser_scale_sigma": 0.4,
    "days": 21,
    "train_days": 14,
    # hindsight collection
    "l_draws": 10,
    "beta_lo": None,  # None -> per-stream default [0, 2 * exhaust-all breakpoint]
    "beta_hi": None,
    "log_uniform": False,
    # training
    "learning_rate": 1e-2,
    "epochs": 200,
    "batch_size": 32,
    "hidden": 128,
    "val_fraction": 0.1,
    "spline_degree": 3,
    "spline_num": 16,
    # controller
    "lambda": None,  # None -> 0.05 * checkpoint b_scale
    "max_iters": 50,
    "c_floor": None,  # None -> 1e-9 * checkpoint b_scale
    "roi_tolerance": None,  # None -> 1e-6 * (hist cost + remaining budget)
    # evaluation
    "budget_fraction": 0.2,
    "budget_scales": [0.5, 0.75, 1.0, 1.25, 1.5],
    "roi_scales": [0.8, 0.9, 1.0, 1.1, 1.2],
    # oracle
    "exact_limit": 25,
    # shared
    "seed": 0,
}


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR, "").strip()
    return int(raw) if raw else DEFAULTS["seed"]


def load_config(path=None) -> dict:
    cfg = dict(DEFAULTS)
    cfg["seed"] = default_seed()
    if path is not None:
        with open(path) as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)
    return cfg
