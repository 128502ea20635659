"""Second-price auction environment over discrete decision steps.

A bidding period is a sequence of T step buckets of impressions.  Bidding with
coefficient beta submits beta*value for each impression; the impression is won
when the bid reaches the competing price (ties win, so a threshold coefficient
c/v actually wins its own impression) and the charge is the competing price.
Budget truncation is greedy in arrival order: an impression whose price no
longer fits the remaining cap is skipped, later cheaper ones may still win.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Impression:
    """One auction opportunity: private value and highest competing bid."""

    value: float
    price: float

    def __post_init__(self):
        if not (self.value > 0 and self.price > 0):
            raise ValueError(f"impression needs positive value/price, got {self.value}, {self.price}")


class ImpressionStream:
    """T step buckets of impressions, stored columnar for the kernels."""

    def __init__(self, values: np.ndarray, prices: np.ndarray, offsets: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        prices = np.ascontiguousarray(prices, dtype=np.float64)
        offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        if values.shape != prices.shape or values.ndim != 1:
            raise ValueError("values/prices must be 1-d arrays of equal length")
        if offsets.ndim != 1 or len(offsets) < 2 or offsets[0] != 0 or offsets[-1] != len(values):
            raise ValueError("offsets must run from 0 to len(values)")
        if np.any(np.diff(offsets) < 0):
            raise ValueError("offsets must be nondecreasing")
        if len(values) and (values.min() <= 0 or prices.min() <= 0):
            raise ValueError("impression values and prices must be positive")
        self.values = values
        self.prices = prices
        self.offsets = offsets

    @classmethod
    def from_buckets(cls, buckets: Sequence[Sequence[Impression]]) -> "ImpressionStream":
        values, prices, offsets = [], [], [0]
        for bucket in buckets:
            for imp in bucket:
                values.append(imp.value)
                prices.append(imp.price)
            offsets.append(len(values))
        return cls(np.asarray(values, dtype=np.float64), np.asarray(prices, dtype=np.float64), np.asarray(offsets))

    @property
    def T(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_impressions(self) -> int:
        return len(self.values)

    def bucket_values(self, step: int) -> np.ndarray:
        """Values of the 1-based step bucket."""
        self._check_step(step)
        return self.values[self.offsets[step - 1] : self.offsets[step]]

    def bucket_prices(self, step: int) -> np.ndarray:
        self._check_step(step)
        return self.prices[self.offsets[step - 1] : self.offsets[step]]

    def _check_step(self, step: int):
        if not 1 <= step <= self.T:
            raise ValueError(f"step {step} outside [1, {self.T}]")

    def __eq__(self, other):
        return (
            isinstance(other, ImpressionStream)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.prices, other.prices)
            and np.array_equal(self.offsets, other.offsets)
        )


@dataclass(frozen=True)
class ConstraintConfig:
    """Campaign constraints: a hard budget, and optionally a minimum ROI."""

    budget: float
    roi_target: Optional[float] = None

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.roi_target is not None and not self.roi_target > 0:
            raise ValueError("roi_target, when present, must be positive")


@dataclass(frozen=True)
class EpisodeState:
    """Running campaign ledger at the start of a step."""

    step: int
    remaining_budget: float
    hist_cost: float
    hist_value: float


@dataclass(frozen=True)
class StepOutcome:
    cost: float
    value: float
    wins: int


@dataclass(frozen=True)
class StepRecord:
    """Observable log of one executed step: all seen impressions + won prices."""

    values: np.ndarray
    prices: np.ndarray
    won_prices: np.ndarray
    outcome: StepOutcome


@dataclass(frozen=True)
class StepView:
    """What a per-step policy may look at before choosing beta.

    Past steps are fully observable (the simulator's log); for the current
    step only the private values are visible, prices are revealed by the
    auction itself.
    """

    step: int
    T: int
    budget: float
    roi_target: Optional[float]
    current_values: np.ndarray
    records: tuple  # tuple[StepRecord, ...] for steps 1..step-1


@dataclass
class CampaignResult:
    final_state: EpisodeState
    steps: list  # list[tuple[float, StepOutcome]]
    records: list = field(default_factory=list)  # list[StepRecord]


class CampaignError(RuntimeError):
    """A policy callback failed or returned an unusable coefficient."""


def _as_bucket_arrays(bucket):
    if isinstance(bucket, tuple) and len(bucket) == 2 and isinstance(bucket[0], np.ndarray):
        return np.ascontiguousarray(bucket[0], dtype=np.float64), np.ascontiguousarray(bucket[1], dtype=np.float64)
    values = np.asarray([imp.value for imp in bucket], dtype=np.float64)
    prices = np.asarray([imp.price for imp in bucket], dtype=np.float64)
    return values, prices


def run_step(bucket, beta: float, budget_cap: Optional[float] = None, mask_out: Optional[np.ndarray] = None) -> StepOutcome:
    """Execute one step bucket at a fixed coefficient.

    bucket is a sequence of Impression or a (values, prices) array pair.
    budget_cap=None means no truncation.  mask_out, when given, must be a
    zeroed uint8 array of bucket length; it receives the win indicators.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    values, prices = _as_bucket_arrays(bucket)
    use_cap = budget_cap is not None
    cap = float(budget_cap) if use_cap else 0.0
    cost, value, wins = _kernels.run_bucket(values, prices, float(beta), cap, use_cap, mask_out)
    return StepOutcome(cost=cost, value=value, wins=wins)


def run_fixed(stream: ImpressionStream, from_step: int, beta: float, budget_cap: Optional[float] = None):
    """Fixed-coefficient rollout over steps [from_step, T]; returns (cost, value).

    Equals the sum of run_step over the tail, with the cap threaded across
    steps.  Deterministic for identical inputs.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if not 1 <= from_step <= stream.T:
        raise ValueError(f"from_step {from_step} outside [1, {stream.T}]")
    use_cap = budget_cap is not None
    cap = float(budget_cap) if use_cap else 0.0
    cost, value, _ = _kernels.run_tail(stream.values, stream.prices, stream.offsets, from_step - 1, float(beta), cap, use_cap)
    return cost, value


def run_campaign(stream: ImpressionStream, config: ConstraintConfig, decide: Callable) -> CampaignResult:
    """Run a full budget-capped campaign, asking `decide(state, view)` for each step's beta."""
    budget = config.budget
    hist_cost = 0.0
    hist_value = 0.0
    steps = []
    records: list[StepRecord] = []
    state = EpisodeState(step=1, remaining_budget=budget, hist_cost=0.0, hist_value=0.0)
    for tau in range(1, stream.T + 1):
        values = stream.bucket_values(tau)
        prices = stream.bucket_prices(tau)
        view = StepView(
            step=tau,
            T=stream.T,
            budget=budget,
            roi_target=config.roi_target,
            current_values=values,
            records=tuple(records),
        )
        try:
            beta = float(decide(state, view))
        except Exception as exc:
            raise CampaignError(f"policy callback failed at step {tau}: {exc!r}") from exc
        if not np.isfinite(beta) or beta < 0:
            raise CampaignError(f"policy returned invalid beta {beta} at step {tau}")
        mask = np.zeros(len(values), dtype=np.uint8)
        outcome = run_step((values, prices), beta, budget_cap=state.remaining_budget, mask_out=mask)
        hist_cost += outcome.cost
        hist_value += outcome.value
        steps.append((beta, outcome))
        records.append(StepRecord(values=values, prices=prices, won_prices=prices[mask.astype(bool)], outcome=outcome))
        state = EpisodeState(step=tau + 1, remaining_budget=budget - hist_cost, hist_cost=hist_cost, hist_value=hist_value)
    return CampaignResult(final_state=state, steps=steps, records=records)


STREAM_CSV_HEADER = ["step", "value", "price"]


def write_stream_csv(stream: ImpressionStream, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STREAM_CSV_HEADER)
        for t in range(1, stream.T + 1):
            for v, p in zip(stream.bucket_values(t), stream.bucket_prices(t)):
                writer.writerow([t, repr(float(v)), repr(float(p))])


def read_stream_csv(path, T: Optional[int] = None) -> ImpressionStream:
    """Load the `step,value,price` impression-log format (1-based, nondecreasing steps)."""
    steps, values, prices = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != STREAM_CSV_HEADER:
            raise ValueError(f"bad header {header!r}, expected {STREAM_CSV_HEADER}")
        last = 1
        for row in reader:
            if not row:
                continue
            step = int(row[0])
            if step < last:
                raise ValueError(f"steps must be nondecreasing, saw {step} after {last}")
            if step < 1:
                raise ValueError("steps are 1-based")
            last = step
            steps.append(step)
            values.append(float(row[1]))
            prices.append(float(row[2]))
    n_steps = T if T is not None else (max(steps) if steps else 1)
    offsets = np.zeros(n_steps + 1, dtype=np.int64)
    for s in steps:
        offsets[s] += 1
    offsets = np.concatenate([[0], np.cumsum(offsets[1:])])
    return ImpressionStream(np.asarray(values), np.asarray(prices), offsets)
