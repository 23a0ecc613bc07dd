"""Command-line entry point: train, eval, compare.

Exit codes: 0 success, 2 configuration/usage error, 3 numeric or runtime
failure. Every output file embeds the config fingerprint and the seed(s)
that produced it.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from nrsched import dqn, kpi, sandbox, sched, simnr
from nrsched.config import ExperimentConfig, apply_overrides, load_config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrsched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent in the sandbox")
    _add_common(p_train)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--checkpoint", default=None, help="checkpoint output path")

    p_eval = sub.add_parser("eval", help="run the simulator for one scheduler")
    _add_common(p_eval)
    p_eval.add_argument("--scheduler", default=None, help="scheduler name")
    p_eval.add_argument("--frames", type=int, default=None)
    p_eval.add_argument("--seeds", default=None, help="seed count or comma list")
    p_eval.add_argument("--checkpoint", default=None, help="agent checkpoint (for leasch)")
    p_eval.add_argument("--jobs", type=int, default=None)

    p_cmp = sub.add_parser("compare", help="run several schedulers on paired seeds")
    _add_common(p_cmp)
    p_cmp.add_argument("--scheduler", default=None, help="comma-separated scheduler names")
    p_cmp.add_argument("--frames", type=int, default=None)
    p_cmp.add_argument("--seeds", default=None)
    p_cmp.add_argument("--checkpoint", default=None)
    p_cmp.add_argument("--jobs", type=int, default=None)
    return parser


def _write_curve_csv(curve, path, fingerprint: str, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema=learning-curve-v1 fingerprint={fingerprint} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["episode", "mean_reward", "moving_avg_5", "eligible_selection_prob", "mean_positive_reward"]
        )
        for pt in curve:
            writer.writerow(
                [
                    pt.episode,
                    repr(pt.mean_reward),
                    repr(pt.moving_avg_5),
                    repr(pt.eligible_selection_prob),
                    repr(pt.mean_positive_reward),
                ]
            )


def cmd_train(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    fp = cfg.fingerprint()
    agent, curve = sandbox.train(cfg.sandbox, cfg.dqn, n_episodes=cfg.episodes)
    ckpt_path = cfg.checkpoint or os.path.join(cfg.out_dir, "checkpoint.json")
    dqn.save_checkpoint(agent, cfg.dqn, ckpt_path, fingerprint=fp)
    curve_path = os.path.join(cfg.out_dir, "learning_curve.csv")
    _write_curve_csv(curve, curve_path, fp, cfg.sandbox.seed)
    print(f"trained {cfg.episodes} episodes (seed {cfg.sandbox.seed}, fingerprint {fp})")
    print(f"checkpoint: {ckpt_path}")
    print(f"learning curve: {curve_path}")
    return 0


def _load_leasch_params(cfg: ExperimentConfig):
    if cfg.checkpoint is None:
        raise ValueError("scheduler 'leasch' needs --checkpoint (or [experiment] checkpoint)")
    if not os.path.exists(cfg.checkpoint):
        raise ValueError(f"checkpoint not found: {cfg.checkpoint}")
    agent, _ = dqn.load_checkpoint(cfg.checkpoint)
    return agent.online


def _run_one(cell_cfg: simnr.CellConfig, name: str, params, seed: int) -> kpi.KpiRecord:
    scheduler = sched.make_scheduler(name, cell_cfg.n_ue, params)
    return simnr.run_simulation(cell_cfg, scheduler, seed=seed)


def _run_campaign(cfg: ExperimentConfig, name: str, params) -> list[kpi.KpiRecord]:
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_one, cfg.cell, name, params, s) for s in cfg.seeds]
            records = [f.result() for f in futures]
    else:
        records = [_run_one(cfg.cell, name, params, s) for s in cfg.seeds]
    return records


def _unique_labels(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    labels = []
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        labels.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
    return labels


def _evaluate(cfg: ExperimentConfig, names: list[str]) -> tuple[list[kpi.RunSummary], dict]:
    """Run every scheduler over the shared seed list; returns summaries and
    one quantized curve set (first seed of each scheduler)."""
    params = None
    if any(n == "leasch" for n in names):
        params = _load_leasch_params(cfg)
    for name in names:  # validate names before any long run
        sched.make_scheduler(name, cfg.cell.n_ue, params)

    fp = cfg.fingerprint()
    os.makedirs(cfg.out_dir, exist_ok=True)
    runs_dir = os.path.join(cfg.out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)

    summaries: list[kpi.RunSummary] = []
    curve_sets: dict[str, tuple[int, kpi.QuantizedCurves]] = {}
    for label, name in zip(_unique_labels(names), names):
        records = _run_campaign(cfg, name, params)
        for rec, seed in zip(records, cfg.seeds):
            rec.fingerprint = fp
            rec.scheduler = label
            kpi.write_run_csv(rec, os.path.join(runs_dir, f"{label.replace('#', '_')}_seed{seed}.csv"))
            summaries.append(kpi.summarize_run(rec))
        if records and records[0].n_slots >= 10:
            curve_sets[label] = (cfg.seeds[0], kpi.quantize_curves(records[0]))
    if curve_sets:
        kpi.write_curves_csv(curve_sets, os.path.join(cfg.out_dir, "curves.csv"), fingerprint=fp)
    return summaries, curve_sets


def cmd_eval(cfg: ExperimentConfig) -> int:
    if len(cfg.schedulers) != 1:
        raise ValueError("eval runs exactly one scheduler; use compare for several")
    summaries, _ = _evaluate(cfg, cfg.schedulers)
    aggregate = kpi.aggregate_runs(summaries)
    path = os.path.join(cfg.out_dir, "summary.json")
    kpi.write_summary_json(summaries, aggregate, path, fingerprint=cfg.fingerprint())
    stats = aggregate["schedulers"][cfg.schedulers[0]]
    print(
        f"{cfg.schedulers[0]}: throughput {stats['throughput_bps']['mean']:.0f} bps, "
        f"goodput {stats['goodput_bps']['mean']:.0f} bps, "
        f"JFI {stats['jfi_throughput']['mean']:.4f} over {stats['n_runs']} runs"
    )
    print(f"summary: {path}")
    return 0


def cmd_compare(cfg: ExperimentConfig) -> int:
    if len(cfg.schedulers) < 2:
        raise ValueError("compare needs at least two schedulers")
    labels = _unique_labels(cfg.schedulers)
    summaries, _ = _evaluate(cfg, cfg.schedulers)
    aggregate = kpi.aggregate_runs(summaries, baseline=labels[0])
    fp = cfg.fingerprint()
    json_path = os.path.join(cfg.out_dir, "comparison.json")
    kpi.write_summary_json(summaries, aggregate, json_path, fingerprint=fp)

    csv_path = os.path.join(cfg.out_dir, "comparison.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# schema=comparison-v1 fingerprint={fp} seeds={','.join(map(str, cfg.seeds))}\n")
        writer = csv.writer(fh)
        writer.writerow(["scheduler", "kpi", "mean", "std", "delta_pct_vs_" + labels[0]])
        deltas = aggregate.get("deltas_vs_baseline_pct", {})
        for label in labels:
            stats = aggregate["schedulers"][label]
            for kpi_name in ("throughput_bps", "goodput_bps", "jfi_throughput", "invalid_rate"):
                if label == labels[0]:
                    delta = ""
                else:
                    v = deltas[label][kpi_name + "_pct"]
                    delta = "" if v is None else repr(v)
                writer.writerow(
                    [label, kpi_name, repr(stats[kpi_name]["mean"]), repr(stats[kpi_name]["std"]), delta]
                )

    def fmt(v):
        return "n/a" if v is None else f"{v:+.2f}%"

    for label in labels[1:]:
        d = aggregate["deltas_vs_baseline_pct"][label]
        print(
            f"{label} vs {labels[0]}: throughput {fmt(d['throughput_bps_pct'])}, "
            f"goodput {fmt(d['goodput_bps_pct'])}, JFI {fmt(d['jfi_throughput_pct'])}"
        )
    print(f"comparison: {json_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        return cmd_compare(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
