"""Command-line entry points: gen-data, collect, train, bid, oracle, evaluate, report."""

from __future__ import annotations

import json
import os

import click
import numpy as np

from . import config as cfgmod
from .auction import ConstraintConfig, read_stream_csv, run_campaign


@click.group()
def main():
    """Constrained auto-bidding toolkit."""


def _load(cfg_path, **overrides):
    cfg = cfgmod.load_config(cfg_path)
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    return cfg


@main.command("gen-data")
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None, help="JSON config overriding defaults.")
@click.option("--out", required=True, type=click.Path(), help="Output directory for stream CSVs + manifest.")
@click.option("--seed", type=int, default=None)
@click.option("--days", type=int, default=None)
def gen_data(cfg_path, out, seed, days):
    """Generate synthetic impression streams."""
    from .evaluation import GeneratorConfig, generate, write_streams

    cfg = _load(cfg_path, seed=seed, days=days)
    gen_cfg = GeneratorConfig(
        T=cfg["T"],
        mean_imps_per_step=cfg["mean_imps_per_step"],
        imps_amplitude=cfg["imps_amplitude"],
        value_mu=cfg["value_mu"],
        value_sigma=cfg["value_sigma"],
        price_gamma=cfg["price_gamma"],
        price_noise_sigma=cfg["price_noise_sigma"],
        price_level_amplitude=cfg["price_level_amplitude"],
        n_advertisers=cfg["n_advertisers"],
        n_categories=cfg["n_categories"],
        advertiser_scale_sigma=cfg["advertiser_scale_sigma"],
        days=cfg["days"],
        seed=cfg["seed"],
    )
    streams = generate(gen_cfg)
    write_streams(streams, out, gen_cfg)
    click.echo(f"wrote {len(streams)} streams to {out}")


@main.command("collect")
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None)
@click.option("--streams", "streams_dir", required=True, type=click.Path(exists=True), help="Directory from gen-data.")
@click.option("--out", required=True, type=click.Path(), help="Output dataset CSV (manifest JSON written alongside).")
@click.option("--l-draws", type=int, default=None)
@click.option("--beta-lo", type=float, default=None)
@click.option("--beta-hi", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--train-only/--all-days", default=True, help="Collect only from the training-day split.")
def collect_cmd(cfg_path, streams_dir, out, l_draws, beta_lo, beta_hi, seed, train_only):
    """Collect relabeled fixed-coefficient experience."""
    from .evaluation import read_streams, split_days
    from .hindsight import collect, merge, write_dataset_csv

    cfg = _load(cfg_path, l_draws=l_draws, beta_lo=beta_lo, beta_hi=beta_hi, seed=seed)
    streams = read_streams(streams_dir)
    if train_only:
        streams, _ = split_days(streams, cfg["train_days"])
    beta_range = None
    if cfg["beta_lo"] is not None and cfg["beta_hi"] is not None:
        beta_range = (cfg["beta_lo"], cfg["beta_hi"])
    datasets = []
    for i, gs in enumerate(streams):
        datasets.append(
            collect(gs.stream, gs.context, L=cfg["l_draws"], beta_range=beta_range, seed=cfg["seed"] + i, log_uniform=cfg["log_uniform"])
        )
    dataset = merge(datasets)
    manifest_path = os.path.splitext(out)[0] + ".manifest.json"
    write_dataset_csv(dataset, out, manifest_path)
    click.echo(f"wrote {len(dataset.tuples)} tuples to {out}")


@main.command("train")
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None)
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Checkpoint JSON path.")
@click.option("--log", "log_path", type=click.Path(), default=None, help="Training log CSV.")
@click.option("--epochs", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
def train_cmd(cfg_path, dataset, out, log_path, epochs, learning_rate, batch_size, seed):
    """Train the dual-spline policy on a collected dataset."""
    from .hindsight import read_dataset_csv
    from .policy import SplineConfig, TrainConfig, train

    cfg = _load(cfg_path, epochs=epochs, learning_rate=learning_rate, batch_size=batch_size, seed=seed)
    ds = read_dataset_csv(dataset)
    checkpoint, log = train(
        ds,
        TrainConfig(
            learning_rate=cfg["learning_rate"],
            epochs=cfg["epochs"],
            batch_size=cfg["batch_size"],
            seed=cfg["seed"],
            hidden=cfg["hidden"],
            val_fraction=cfg["val_fraction"],
        ),
        SplineConfig(degree=cfg["spline_degree"], num=cfg["spline_num"]),
    )
    checkpoint.save(out)
    if log_path:
        log.write_csv(log_path)
    click.echo(f"final train loss {log.rows[-1][1]:.6f}, val loss {log.rows[-1][2]:.6f}; checkpoint at {out}")


@main.command("bid")
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--stream", "stream_path", required=True, type=click.Path(exists=True))
@click.option("--budget", required=True, type=float)
@click.option("--roi-target", type=float, default=None)
@click.option("--lambda", "lambda_", type=float, default=None)
@click.option("--max-iters", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Campaign log CSV.")
def bid_cmd(cfg_path, checkpoint, stream_path, budget, roi_target, lambda_, max_iters, seed, out_path):
    """Run one budget-capped campaign with the trained controller."""
    from .controller import ControllerConfig, ControllerPolicy, alpha_trace
    from .evaluation import episode_log_csv
    from .hindsight import TrajectoryContext
    from .policy import Checkpoint

    cfg = _load(cfg_path, seed=seed)
    cfg["lambda"] = lambda_ if lambda_ is not None else cfg["lambda"]
    cfg["max_iters"] = max_iters if max_iters is not None else cfg["max_iters"]
    ckpt = Checkpoint.load(checkpoint)
    stream = read_stream_csv(stream_path)

    context = TrajectoryContext()
    meta_path = os.path.splitext(stream_path)[0] + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            context = TrajectoryContext(**json.load(fh))

    policy = ControllerPolicy(
        ckpt,
        r_target=roi_target,
        cfg=ControllerConfig(lambda_=cfg["lambda"], max_iters=cfg["max_iters"], c_floor=cfg["c_floor"], roi_tolerance=cfg["roi_tolerance"]),
        context=context,
    )
    result = run_campaign(stream, ConstraintConfig(budget=budget, roi_target=roi_target), policy)
    final = result.final_state
    trace = alpha_trace(policy.decisions, result, roi_target)
    if out_path:
        episode_log_csv(result, policy.decisions, out_path)
    click.echo(f"cost {final.hist_cost:.4f} / budget {budget:.4f} (C/B {final.hist_cost / budget:.4f})")
    click.echo(f"value {final.hist_value:.4f}, realized ROI {trace.roi_realized:.4f}")
    if roi_target is not None:
        click.echo(f"ROI ratio vs target: {trace.roi_ratio:.4f}")


@main.command("oracle")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True), help="CSV with header value,cost.")
@click.option("--budget", required=True, type=float)
@click.option("--roi-target", type=float, default=None)
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None)
def oracle_cmd(items_path, budget, roi_target, cfg_path):
    """Exact vs greedy vs fractional value for one selection instance."""
    import csv as _csv

    from .oracle import SelectionInstance, exhaust_beta, fractional_relaxation, greedy_fcs, milp_oracle

    cfg = _load(cfg_path)
    values, costs = [], []
    with open(items_path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header != ["value", "cost"]:
            raise click.ClickException(f"bad header {header!r}, expected ['value', 'cost']")
        for row in reader:
            if not row:
                continue
            values.append(float(row[0]))
            costs.append(float(row[1]))
    instance = SelectionInstance(np.asarray(values), np.asarray(costs), budget=budget, roi_target=roi_target)
    exact = milp_oracle(instance, limit=cfg["exact_limit"])
    greedy = greedy_fcs(instance)
    frac = fractional_relaxation(instance)
    exhaust = exhaust_beta(instance, budget)
    click.echo(f"V_oracle  = {exact.total_value:.6f} (cost {exact.total_cost:.6f})")
    click.echo(f"V_fixed   = {greedy.total_value:.6f} (cost {greedy.total_cost:.6f})")
    click.echo(f"V_frac    = {frac:.6f}")
    click.echo(f"beta_star = {greedy.beta_star if greedy.beta_star is not None else 'n/a'} (exhaust: {exhaust.beta:.6f})")
    click.echo(f"bound gap V_oracle - V_fixed = {exact.total_value - greedy.total_value:.6f}")


@main.command("evaluate")
@click.option("--config", "cfg_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--streams", "streams_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Directory for rows.json.")
@click.option("--mode", type=click.Choice(["bcb", "mcb"]), default="bcb")
@click.option("--test-only/--all-days", default=True)
def evaluate_cmd(cfg_path, checkpoint, streams_dir, out, mode, test_only):
    """Grid-evaluate the trained policy against the rule-based baselines."""
    from .baselines import LpReplanPolicy, PidConfig, PidPolicy
    from .controller import ControllerConfig, ControllerPolicy
    from .evaluation import evaluate, read_streams, split_days
    from .policy import Checkpoint

    cfg = _load(cfg_path)
    ckpt = Checkpoint.load(checkpoint)
    streams = read_streams(streams_dir)
    if test_only:
        _, streams = split_days(streams, cfg["train_days"])
    ctrl_cfg = ControllerConfig(lambda_=cfg["lambda"], max_iters=cfg["max_iters"], c_floor=cfg["c_floor"], roi_tolerance=cfg["roi_tolerance"])

    policies = {
        "trained": lambda gs, b, r: ControllerPolicy(ckpt, r_target=r, cfg=ctrl_cfg, context=gs.context),
        "pid": lambda gs, b, r: PidPolicy(PidConfig(), roi_target=r),
        "lp": lambda gs, b, r: LpReplanPolicy(prior_beta=1.0, roi_target=r),
    }
    reports = evaluate(
        policies,
        streams,
        budget_scales=cfg["budget_scales"],
        roi_scales=cfg["roi_scales"] if mode == "mcb" else None,
        budget_fraction=cfg["budget_fraction"],
    )
    os.makedirs(out, exist_ok=True)
    rows_path = os.path.join(out, "rows.json")
    with open(rows_path, "w") as fh:
        json.dump(
            [
                {
                    "policy": r.policy,
                    "budget_scale": r.budget_scale,
                    "roi_scale": r.roi_scale,
                    "conv": r.conv,
                    "compliance_rate": r.compliance_rate,
                    "cost_over_budget": r.cost_over_budget,
                    "mean_beta": r.mean_beta,
                }
                for r in reports
            ],
            fh,
            indent=2,
        )
    click.echo(f"wrote {len(reports)} report rows to {rows_path}")


@main.command("report")
@click.option("--in", "indir", required=True, type=click.Path(exists=True), help="Directory holding rows.json from evaluate.")
@click.option("--out", required=True, type=click.Path())
def report_cmd(indir, out):
    """Render metric tables and the (budget, ROI, mean beta) surface grid."""
    from .evaluation import MetricsReport, report

    with open(os.path.join(indir, "rows.json")) as fh:
        rows = json.load(fh)
    reports = [
        MetricsReport(
            policy=r["policy"],
            budget_scale=r["budget_scale"],
            roi_scale=r["roi_scale"],
            conv=r["conv"],
            compliance_rate=r["compliance_rate"],
            cost_over_budget=r["cost_over_budget"],
            mean_beta=r["mean_beta"],
        )
        for r in rows
    ]
    paths = report(reports, out)
    for name, p in paths.items():
        click.echo(f"{name}: {p}")


if __name__ == "__main__":
    main()
