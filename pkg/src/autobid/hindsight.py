"""Hindsight experience collection and the campaign state features.

Every fixed-coefficient rollout over a tail [tau, T] is kept: its realized
cost becomes the budget for which the sampled coefficient was optimal, so the
tuple (state, sampled beta, realized cost, realized value) is a perfect
training sample for that budget.  Nothing is discarded; a collection run
yields exactly L*T tuples per trajectory.

The state feature vector has 39 entries:

    [0:2]    temporal: day of week, decision steps left (incl. current)
    [2:4]    advertiser identity: id index, category index (normalized)
    [4:12]   current step values: mean, percentiles 10/25/40/55/70/85, count
    [12:24]  historical values: mean; last-1 mean + p10/50/90;
             last-3 mean + p10/50/90; all-time p10/50/90
    [24:36]  winning costs (prices of won impressions): same layout
    [36:39]  volume: total / last-1 / last-3 impression counts

Monetary entries are divided by a running scale (mean price of impressions
won so far, 1.0 before the first win); the raw, unscaled vector is kept
alongside for audit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auction import ImpressionStream, run_fixed, run_step

N_FEATURES = 39

CURRENT_PCTS = (10.0, 25.0, 40.0, 55.0, 70.0, 85.0)
HIST_PCTS = (10.0, 50.0, 90.0)


@dataclass(frozen=True)
class TrajectoryContext:
    """Static context of one recorded trajectory."""

    advertiser_id: int = 0
    n_advertisers: int = 1
    category: int = 0
    n_categories: int = 1
    day_of_week: int = 0
    traj_id: str = "traj-0"


@dataclass(frozen=True)
class StateFeatures:
    """Normalized model-input vector plus the raw audit copy."""

    vector: np.ndarray
    raw: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.vector) != N_FEATURES:
            raise ValueError(f"feature vector must have {N_FEATURES} entries, got {len(self.vector)}")


def _stats_block(population: np.ndarray, pcts) -> list:
    """mean followed by the requested percentiles; zeros for empty populations."""
    if len(population) == 0:
        return [0.0] * (1 + len(pcts))
    return [float(population.mean())] + [float(p) for p in np.percentile(population, pcts)]


def _pcts_only(population: np.ndarray, pcts) -> list:
    if len(population) == 0:
        return [0.0] * len(pcts)
    return [float(p) for p in np.percentile(population, pcts)]


def compute_features(
    history_values: Sequence[np.ndarray],
    history_won_prices: Sequence[np.ndarray],
    current_values: np.ndarray,
    T: int,
    context: TrajectoryContext,
) -> StateFeatures:
    """Build the 39-entry state vector at step tau = len(history)+1.

    history_values[t] holds all impression values seen at past step t+1,
    history_won_prices[t] the prices of the impressions won there.  Degenerate
    inputs (empty steps, no history) produce zeros, never failures.
    """
    tau = len(history_values) + 1
    current_values = np.asarray(current_values, dtype=np.float64)

    raw = np.zeros(N_FEATURES)
    raw[0] = float(context.day_of_week)
    raw[1] = float(T - tau + 1)
    raw[2] = float(context.advertiser_id)
    raw[3] = float(context.category)

    raw[4:11] = _stats_block(current_values, CURRENT_PCTS)
    raw[11] = float(len(current_values))

    all_hist = np.concatenate(history_values) if history_values else np.empty(0)
    last1 = history_values[-1] if history_values else np.empty(0)
    last3 = np.concatenate(history_values[-3:]) if history_values else np.empty(0)
    raw[12] = float(all_hist.mean()) if len(all_hist) else 0.0
    raw[13:17] = _stats_block(last1, HIST_PCTS)
    raw[17:21] = _stats_block(last3, HIST_PCTS)
    raw[21:24] = _pcts_only(all_hist, HIST_PCTS)

    all_won = np.concatenate(history_won_prices) if history_won_prices else np.empty(0)
    wlast1 = history_won_prices[-1] if history_won_prices else np.empty(0)
    wlast3 = np.concatenate(history_won_prices[-3:]) if history_won_prices else np.empty(0)
    raw[24] = float(all_won.mean()) if len(all_won) else 0.0
    raw[25:29] = _stats_block(wlast1, HIST_PCTS)
    raw[29:33] = _stats_block(wlast3, HIST_PCTS)
    raw[33:36] = _pcts_only(all_won, HIST_PCTS)

    raw[36] = float(len(all_hist))
    raw[37] = float(len(last1))
    raw[38] = float(len(last3))

    scale = float(all_won.mean()) if len(all_won) else 1.0
    vec = raw.copy()
    vec[0] = raw[0] / 6.0
    vec[1] = raw[1] / max(T, 1)
    vec[2] = raw[2] / max(context.n_advertisers, 1)
    vec[3] = raw[3] / max(context.n_categories, 1)
    monetary = np.r_[np.arange(4, 11), np.arange(12, 36)]
    vec[monetary] = raw[monetary] / scale
    return StateFeatures(vector=vec, raw=raw)


@dataclass(frozen=True)
class HindsightTuple:
    features: StateFeatures
    beta_hat: float
    realized_cost: float
    realized_value: float
    step: int
    traj_id: str = "traj-0"


@dataclass
class HindsightDataset:
    tuples: list
    manifest: dict = field(default_factory=dict)

    def groups(self) -> dict:
        """(traj_id, step) -> list of tuples, insertion-ordered."""
        out: dict = {}
        for t in self.tuples:
            out.setdefault((t.traj_id, t.step), []).append(t)
        return out


def default_beta_range(stream: ImpressionStream, log_uniform: bool = False) -> tuple:
    """[0, 2 * beta_full]: twice the breakpoint that exhausts the whole stream.

    For log-uniform sampling (the sane choice under heavy-tailed price/value
    ratios, where beta_full is an outlier and uniform draws pile up in the
    saturated region) the lower end moves to beta_full / 100.
    """
    if stream.n_impressions == 0:
        return (0.0, 1.0) if not log_uniform else (0.01, 1.0)
    beta_full = float(np.max(stream.prices / stream.values))
    lo = 0.01 * beta_full if log_uniform else 0.0
    return (lo, 2.0 * beta_full)


def _behavior_history(stream: ImpressionStream, behavior_beta: float):
    """Per-step values and won prices under an uncapped fixed behavior coefficient."""
    history_values = []
    history_won = []
    for t in range(1, stream.T + 1):
        v = stream.bucket_values(t)
        p = stream.bucket_prices(t)
        won = behavior_beta * v >= p
        history_values.append(v)
        history_won.append(p[won])
    return history_values, history_won


def collect(
    stream: ImpressionStream,
    context: TrajectoryContext,
    L: int,
    beta_range: Optional[tuple] = None,
    seed: int = 0,
    log_uniform: bool = False,
) -> HindsightDataset:
    """Relabeled fixed-coefficient rollouts: L uniform draws per step, uncapped.

    For each step tau and each draw, the coefficient is applied over [tau, T]
    with no budget cap (the realized cost itself becomes the budget label).
    Features at tau come from a behavior rollout of the same stream, so the L
    draws of a step share one state.  Fully seeded and deterministic.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if beta_range is None:
        beta_range = default_beta_range(stream, log_uniform)
    lo, hi = beta_range
    if not (lo >= 0 and hi > 0 and hi >= lo):
        raise ValueError(f"invalid beta range [{lo}, {hi}]")
    if log_uniform and lo <= 0:
        raise ValueError("log-uniform sampling needs a positive lower bound")
    rng = np.random.default_rng(seed)

    behavior_beta = float(rng.uniform(lo, hi)) if not log_uniform else float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    history_values, history_won = _behavior_history(stream, behavior_beta)

    tuples = []
    for tau in range(1, stream.T + 1):
        feats = compute_features(history_values[: tau - 1], history_won[: tau - 1], stream.bucket_values(tau), stream.T, context)
        if log_uniform:
            draws = np.exp(rng.uniform(np.log(lo), np.log(hi), size=L))
        else:
            draws = rng.uniform(lo, hi, size=L)
        for beta_hat in draws:
            cost, value = run_fixed(stream, tau, float(beta_hat))
            tuples.append(
                HindsightTuple(
                    features=feats,
                    beta_hat=float(beta_hat),
                    realized_cost=cost,
                    realized_value=value,
                    step=tau,
                    traj_id=context.traj_id,
                )
            )
    manifest = {
        "seed": seed,
        "beta_range": [lo, hi],
        "L": L,
        "T": stream.T,
        "log_uniform": log_uniform,
        "behavior_beta": behavior_beta,
        "traj_id": context.traj_id,
        "feature_norm": "monetary entries / running mean won price",
        "normalization_scale": float(np.concatenate(history_won).mean()) if any(len(w) for w in history_won) else 1.0,
    }
    return HindsightDataset(tuples=tuples, manifest={"trajectories": [manifest]})


def merge(datasets: Sequence[HindsightDataset]) -> HindsightDataset:
    tuples = []
    trajs = []
    for ds in datasets:
        tuples.extend(ds.tuples)
        trajs.extend(ds.manifest.get("trajectories", []))
    return HindsightDataset(tuples=tuples, manifest={"trajectories": trajs})


@dataclass(frozen=True)
class SupervisionGroup:
    """One state with its anchor budgets and coefficient/value targets."""

    features: StateFeatures
    anchors: np.ndarray
    beta_targets: np.ndarray
    value_targets: np.ndarray
    traj_id: str
    step: int


def relabel_as_supervision(dataset: HindsightDataset) -> list:
    """Group tuples per state; anchors are the realized costs, sorted ascending.

    Duplicate anchors (flat stretches of the step cost function) collapse to
    the smallest coefficient that attains them.
    """
    groups = []
    for (traj_id, step), tuples in dataset.groups().items():
        by_cost: dict = {}
        for t in tuples:
            prev = by_cost.get(t.realized_cost)
            if prev is None or t.beta_hat < prev.beta_hat:
                by_cost[t.realized_cost] = t
        anchors = np.asarray(sorted(by_cost), dtype=np.float64)
        kept = [by_cost[a] for a in anchors]
        groups.append(
            SupervisionGroup(
                features=tuples[0].features,
                anchors=anchors,
                beta_targets=np.asarray([t.beta_hat for t in kept]),
                value_targets=np.asarray([t.realized_value for t in kept]),
                traj_id=traj_id,
                step=step,
            )
        )
    return groups


DATASET_HEADER = ["traj_id", "step", "beta_hat", "realized_cost", "realized_value"] + [f"f{i}" for i in range(N_FEATURES)]


def write_dataset_csv(dataset: HindsightDataset, path, manifest_path=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for t in dataset.tuples:
            writer.writerow(
                [t.traj_id, t.step, repr(t.beta_hat), repr(t.realized_cost), repr(t.realized_value)]
                + [repr(float(x)) for x in t.features.vector]
            )
    if manifest_path is not None:
        with open(manifest_path, "w") as fh:
            json.dump(dataset.manifest, fh, indent=2)


def read_dataset_csv(path, manifest_path=None) -> HindsightDataset:
    tuples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise ValueError("unexpected dataset header")
        for row in reader:
            if not row:
                continue
            vec = np.asarray([float(x) for x in row[5:]], dtype=np.float64)
            tuples.append(
                HindsightTuple(
                    features=StateFeatures(vector=vec),
                    beta_hat=float(row[2]),
                    realized_cost=float(row[3]),
                    realized_value=float(row[4]),
                    step=int(row[1]),
                    traj_id=row[0],
                )
            )
    manifest = {}
    if manifest_path is not None:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    return HindsightDataset(tuples=tuples, manifest=manifest)
