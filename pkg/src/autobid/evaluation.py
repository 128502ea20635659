"""Synthetic stream generation, grid evaluation, and report emission.

Streams mimic the shape of a real bidding day: T decision steps, per-step
impression counts and price levels drifting over the day, values log-normal
with a per-advertiser scale, and prices correlated with values (price =
noise * value^gamma) so that efficiency genuinely varies across impressions.

Metrics follow the usual compliance accounting: an episode is compliant when
its realized ROI reaches the target; violating episodes contribute zero
conversions but stay in every denominator.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .auction import ConstraintConfig, ImpressionStream, run_campaign, write_stream_csv
from .hindsight import TrajectoryContext

BUDGET_SCALES = (0.5, 0.75, 1.0, 1.25, 1.5)
ROI_SCALES = (0.8, 0.9, 1.0, 1.1, 1.2)


@dataclass(frozen=True)
class GeneratorConfig:
    T: int = 48
    mean_imps_per_step: float = 40.0
    imps_amplitude: float = 0.3
    value_mu: float = -1.0
    value_sigma: float = 0.5
    price_gamma: float = 0.7
    price_noise_sigma: float = 0.45
    price_level_amplitude: float = 0.25
    n_advertisers: int = 4
    n_categories: int = 2
    advertiser_scale_sigma: float = 0.4
    days: int = 21
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.days < 1 or self.n_advertisers < 1:
            raise ValueError("T, days, n_advertisers must be >= 1")
        if self.mean_imps_per_step <= 0 or self.value_sigma < 0 or self.price_noise_sigma < 0:
            raise ValueError("distribution parameters must yield positive samples")


@dataclass(frozen=True)
class GeneratedStream:
    stream: ImpressionStream
    context: TrajectoryContext
    day: int

    @property
    def name(self) -> str:
        return f"adv{self.context.advertiser_id}_day{self.day}"


def generate(cfg: GeneratorConfig) -> list:
    """Seeded synthetic streams, one per (advertiser, day)."""
    rng = np.random.default_rng(cfg.seed)
    adv_scale = np.exp(rng.normal(0.0, cfg.advertiser_scale_sigma, size=cfg.n_advertisers))
    out = []
    for day in range(cfg.days):
        day_phase = rng.uniform(0, 2 * math.pi)
        for adv in range(cfg.n_advertisers):
            values_all, prices_all, offsets = [], [], [0]
            for t in range(cfg.T):
                lam = cfg.mean_imps_per_step * (1.0 + cfg.imps_amplitude * math.sin(2 * math.pi * t / cfg.T + day_phase))
                n = int(rng.poisson(max(lam, 1.0)))
                vals = adv_scale[adv] * np.exp(rng.normal(cfg.value_mu, cfg.value_sigma, size=n))
                level = 1.0 + cfg.price_level_amplitude * math.sin(2 * math.pi * t / cfg.T + day_phase + math.pi / 3)
                noise = np.exp(rng.normal(0.0, cfg.price_noise_sigma, size=n))
                prices = level * noise * vals**cfg.price_gamma
                values_all.append(vals)
                prices_all.append(prices)
                offsets.append(offsets[-1] + n)
            stream = ImpressionStream(
                np.concatenate(values_all) if values_all else np.empty(0),
                np.concatenate(prices_all) if prices_all else np.empty(0),
                np.asarray(offsets, dtype=np.int64),
            )
            context = TrajectoryContext(
                advertiser_id=adv,
                n_advertisers=cfg.n_advertisers,
                category=adv % cfg.n_categories,
                n_categories=cfg.n_categories,
                day_of_week=day % 7,
                traj_id=f"adv{adv}_day{day}",
            )
            out.append(GeneratedStream(stream=stream, context=context, day=day))
    return out


def write_streams(streams: Sequence[GeneratedStream], outdir, cfg: Optional[GeneratorConfig] = None):
    os.makedirs(outdir, exist_ok=True)
    manifest = {"streams": [], "generator": asdict(cfg) if cfg else None}
    for gs in streams:
        path = os.path.join(outdir, f"{gs.name}.csv")
        write_stream_csv(gs.stream, path)
        manifest["streams"].append(
            {
                "file": os.path.basename(path),
                "traj_id": gs.context.traj_id,
                "advertiser_id": gs.context.advertiser_id,
                "n_advertisers": gs.context.n_advertisers,
                "category": gs.context.category,
                "n_categories": gs.context.n_categories,
                "day_of_week": gs.context.day_of_week,
                "day": gs.day,
                "T": gs.stream.T,
            }
        )
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def read_streams(indir) -> list:
    from .auction import read_stream_csv

    with open(os.path.join(indir, "manifest.json")) as fh:
        manifest = json.load(fh)
    out = []
    for entry in manifest["streams"]:
        stream = read_stream_csv(os.path.join(indir, entry["file"]), T=entry.get("T"))
        context = TrajectoryContext(
            advertiser_id=entry["advertiser_id"],
            n_advertisers=entry["n_advertisers"],
            category=entry["category"],
            n_categories=entry["n_categories"],
            day_of_week=entry["day_of_week"],
            traj_id=entry["traj_id"],
        )
        out.append(GeneratedStream(stream=stream, context=context, day=entry["day"]))
    return out


def split_days(streams: Sequence[GeneratedStream], train_days: int = 14):
    """Whole-day train/test split (14/7 by default)."""
    train = [s for s in streams if s.day < train_days]
    test = [s for s in streams if s.day >= train_days]
    return train, test


@dataclass
class EpisodeRow:
    policy: str
    stream: str
    budget_scale: float
    roi_scale: Optional[float]
    budget: float
    roi_target: Optional[float]
    cost: float
    value: float
    compliant: bool
    mean_beta: float


@dataclass
class MetricsReport:
    policy: str
    budget_scale: float
    roi_scale: Optional[float]
    conv: float
    compliance_rate: float
    cost_over_budget: float
    mean_beta: float
    rows: list = field(default_factory=list)


def base_budget(stream: ImpressionStream, fraction: float = 0.2) -> float:
    """Reference budget at scale 1.0: a fraction of the stream's total spend supply."""
    return fraction * float(stream.prices.sum())


def base_roi_target(stream: ImpressionStream, budget: float) -> float:
    """Reference target at scale 1.0: the realized ROI when the budget is exhausted greedily."""
    from .oracle import exhaust_beta

    res = exhaust_beta(stream, budget)
    if res.no_spend or res.cost <= 0:
        return 1.0
    return res.value / res.cost


def summarize(rows: Sequence[EpisodeRow], policy: str, budget_scale: float, roi_scale) -> MetricsReport:
    n = len(rows)
    conv = sum(r.value for r in rows if r.compliant) / n if n else 0.0
    compliance = sum(1 for r in rows if r.compliant) / n if n else 0.0
    cb = float(np.mean([r.cost / r.budget for r in rows])) if n else 0.0
    mean_beta = float(np.mean([r.mean_beta for r in rows])) if n else 0.0
    return MetricsReport(
        policy=policy,
        budget_scale=budget_scale,
        roi_scale=roi_scale,
        conv=conv,
        compliance_rate=compliance,
        cost_over_budget=cb,
        mean_beta=mean_beta,
        rows=list(rows),
    )


def evaluate(
    policies: Dict[str, Callable],
    streams: Sequence[GeneratedStream],
    budget_scales: Sequence[float] = BUDGET_SCALES,
    roi_scales: Optional[Sequence[float]] = None,
    budget_fraction: float = 0.2,
) -> list:
    """Run every policy over the budget (and optional ROI) grid.

    `policies` maps a name to a factory: factory(gs, budget, roi_target) must
    return a fresh decide callback for that episode.  Returns one
    MetricsReport per (policy, budget_scale[, roi_scale]) cell.
    """
    base_b = {gs.name: base_budget(gs.stream, budget_fraction) for gs in streams}
    base_r = {gs.name: base_roi_target(gs.stream, base_b[gs.name]) for gs in streams} if roi_scales else {}
    reports = []
    for policy_name, factory in policies.items():
        for bs in budget_scales:
            for rs in roi_scales if roi_scales else [None]:
                rows = []
                for gs in streams:
                    budget = bs * base_b[gs.name]
                    roi_target = rs * base_r[gs.name] if rs is not None else None
                    config = ConstraintConfig(budget=budget, roi_target=roi_target)
                    decide = factory(gs, budget, roi_target)
                    result = run_campaign(gs.stream, config, decide)
                    final = result.final_state
                    compliant = roi_target is None or final.hist_value >= roi_target * final.hist_cost
                    rows.append(
                        EpisodeRow(
                            policy=policy_name,
                            stream=gs.name,
                            budget_scale=bs,
                            roi_scale=rs,
                            budget=budget,
                            roi_target=roi_target,
                            cost=final.hist_cost,
                            value=final.hist_value,
                            compliant=bool(compliant),
                            mean_beta=float(np.mean([b for b, _ in result.steps])),
                        )
                    )
                reports.append(summarize(rows, policy_name, bs, rs))
    return reports


REPORT_COLUMNS = ["policy", "budget_scale", "roi_scale", "conv", "compliance_rate", "cost_over_budget", "mean_beta"]


def report(reports: Sequence[MetricsReport], outdir, alpha_traces: Optional[dict] = None):
    """Emit plot-ready CSV/markdown tables; returns the paths written.

    surface.csv holds the (budget_scale, roi_scale, mean_beta) grid for the
    cells that carry an ROI scale; alpha traces, when given, land one file per
    campaign.
    """
    os.makedirs(outdir, exist_ok=True)
    paths = {}

    table_path = os.path.join(outdir, "metrics.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([r.policy, r.budget_scale, r.roi_scale if r.roi_scale is not None else "", r.conv, r.compliance_rate, r.cost_over_budget, r.mean_beta])
    paths["metrics"] = table_path

    md_path = os.path.join(outdir, "metrics.md")
    with open(md_path, "w") as fh:
        fh.write("| " + " | ".join(REPORT_COLUMNS) + " |\n")
        fh.write("|" + "---|" * len(REPORT_COLUMNS) + "\n")
        for r in reports:
            fh.write(
                f"| {r.policy} | {r.budget_scale} | {r.roi_scale if r.roi_scale is not None else ''} "
                f"| {r.conv:.4f} | {r.compliance_rate:.4f} | {r.cost_over_budget:.4f} | {r.mean_beta:.6f} |\n"
            )
    paths["markdown"] = md_path

    surface_rows = [r for r in reports if r.roi_scale is not None]
    surface_path = os.path.join(outdir, "surface.csv")
    with open(surface_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "budget_scale", "roi_scale", "mean_beta"])
        for r in surface_rows:
            writer.writerow([r.policy, r.budget_scale, r.roi_scale, r.mean_beta])
    paths["surface"] = surface_path

    if alpha_traces:
        for name, trace in alpha_traces.items():
            p = os.path.join(outdir, f"alpha_{name}.csv")
            with open(p, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["step", "alpha", "delta_roi"])
                for row in trace.rows:
                    writer.writerow(row)
            paths[f"alpha_{name}"] = p
    return paths


def episode_log_csv(result, decisions, path):
    """Campaign log: step,beta,alpha,cost,value,remaining_budget,delta_roi."""
    by_step = {d.step: d for d in decisions} if decisions else {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "beta", "alpha", "cost", "value", "remaining_budget", "delta_roi"])
        remaining = result.final_state.hist_cost + result.final_state.remaining_budget
        for i, (beta, outcome) in enumerate(result.steps, start=1):
            remaining -= outcome.cost
            d = by_step.get(i)
            writer.writerow(
                [
                    i,
                    repr(beta),
                    repr(d.alpha) if d else 1.0,
                    repr(outcome.cost),
                    repr(outcome.value),
                    repr(remaining),
                    repr(d.delta_roi) if d else "",
                ]
            )
