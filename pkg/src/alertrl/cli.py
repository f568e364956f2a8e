"""Command-line orchestration: generate -> train -> evaluate -> report.

Each stage consumes and produces documented file formats, so stages can run
independently or all at once via ``alertrl all``.  Per-seed artifacts live in
``<out>/seed_<s>/``; aggregated report tables, figures and the manifest live
in ``<out>/``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, nn
from .agent import greedy_policy, train_on_stream
from .config import (
    ExperimentConfig,
    config_hash,
    config_to_dict,
    default_experiment_config,
    load_config,
    resolve_env_config,
)
from .errors import TrainingDiverged
from .metrics import (
    DYNAMIC_POLICY,
    cnfs,
    month_of_day,
    over_under_totals,
    policy_heatmap,
    read_episode_metrics_csv,
    relative_improvement,
    run_policy,
    static_name,
    write_episode_metrics_csv,
    write_heatmap_csv,
    write_step_log,
)
from .stream import TransactionStream, generate_stream, split_stream, with_seed

STAGES = ("generate", "train", "evaluate", "report", "all")


def _seed_dir(config: ExperimentConfig, seed: int) -> Path:
    return Path(config.output_dir) / f"seed_{seed}"


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(
            f"missing input file {path}; run the '{produced_by}' stage first"
        )
    return path


def _load_manifest(config: ExperimentConfig) -> dict:
    path = Path(config.output_dir) / "manifest.json"
    if path.exists():
        with open(path) as fh:
            return json.load(fh)
    return {
        "config_hash": config_hash(config),
        "config": config_to_dict(config),
        "seeds": list(config.seeds),
        "version": __version__,
        "files": {},
        "divergences": {},
    }


def _record(config: ExperimentConfig, stage: str, files) -> None:
    manifest = _load_manifest(config)
    manifest["config_hash"] = config_hash(config)
    manifest["seeds"] = list(config.seeds)
    rel = sorted(str(Path(f).relative_to(config.output_dir)) for f in files)
    manifest["files"][stage] = rel
    out = Path(config.output_dir) / "manifest.json"
    with open(out, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _record_divergence(config: ExperimentConfig, seed: int, message: str) -> None:
    manifest = _load_manifest(config)
    manifest.setdefault("divergences", {})[str(seed)] = message
    with open(Path(config.output_dir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def stage_generate(config: ExperimentConfig) -> list:
    written = []
    for seed in config.seeds:
        sdir = _seed_dir(config, seed)
        sdir.mkdir(parents=True, exist_ok=True)
        stream = generate_stream(with_seed(config.stream, seed))
        path = sdir / "stream.csv"
        stream.to_csv(path)
        written.append(path)
    _record(config, "generate", written)
    return written


def _load_partitions(config: ExperimentConfig, seed: int):
    path = _require(_seed_dir(config, seed) / "stream.csv", "generate")
    stream = TransactionStream.from_csv(path)
    train, test = split_stream(stream, *config.split)
    return train, test


def stage_train(config: ExperimentConfig) -> list:
    written = []
    for seed in config.seeds:
        sdir = _seed_dir(config, seed)
        train_part, _ = _load_partitions(config, seed)
        env_config = resolve_env_config(config, train_part)
        try:
            params, log = train_on_stream(train_part, env_config, config.train, seed)
        except TrainingDiverged as exc:
            print(f"seed {seed}: training diverged: {exc}", file=sys.stderr)
            _record_divergence(config, seed, str(exc))
            continue
        ckpt = sdir / "checkpoint.npz"
        nn.save_checkpoint(ckpt, params, seed=seed)
        log_path = sdir / "training_log.csv"
        log.to_csv(log_path)
        written += [ckpt, log_path]
    _record(config, "train", written)
    return written


def stage_evaluate(config: ExperimentConfig, static_only=None) -> list:
    written = []
    for seed in config.seeds:
        sdir = _seed_dir(config, seed)
        train_part, test_part = _load_partitions(config, seed)
        env_config = resolve_env_config(config, train_part)

        if static_only is not None:
            metrics = run_policy(int(static_only), test_part, env_config, seed)
            path = sdir / f"eval_{static_name(int(static_only))}.csv"
            write_episode_metrics_csv(metrics, path)
            written.append(path)
            continue

        for k in range(env_config.num_actions):
            metrics = run_policy(k, test_part, env_config, seed)
            path = sdir / f"eval_{static_name(k)}.csv"
            write_episode_metrics_csv(metrics, path)
            written.append(path)

        ckpt = _seed_dir(config, seed) / "checkpoint.npz"
        if not ckpt.exists():
            print(f"seed {seed}: no checkpoint, skipping dynamic policy",
                  file=sys.stderr)
            continue
        params, _, _ = nn.load_checkpoint(ckpt)
        policy = greedy_policy(params)
        step_rows = []
        metrics = run_policy(policy, test_part, env_config, seed, step_log=step_rows)
        path = sdir / f"eval_{DYNAMIC_POLICY}.csv"
        write_episode_metrics_csv(metrics, path)
        steps_path = sdir / "steps_dynamic.csv"
        write_step_log(step_rows, steps_path)
        heat = policy_heatmap(policy, test_part, env_config, seed)
        heat_path = sdir / "heatmap_dynamic.csv"
        write_heatmap_csv(heat, env_config, heat_path)
        written += [path, steps_path, heat_path]
    _record(config, "evaluate", written)
    return written


def _median_over_seeds(values_by_seed: dict) -> float:
    return float(np.median(list(values_by_seed.values())))


def stage_report(config: ExperimentConfig) -> list:
    from . import plots  # deferred; matplotlib import is slow

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    k_actions = config.env.num_actions
    policy_names = [static_name(k) for k in range(k_actions)] + [DYNAMIC_POLICY]

    # Per-seed episode metrics, keyed [policy][seed].
    per_policy: dict = {name: {} for name in policy_names}
    for seed in config.seeds:
        sdir = _seed_dir(config, seed)
        for name in policy_names:
            path = sdir / f"eval_{name}.csv"
            if name == DYNAMIC_POLICY and not path.exists():
                continue  # diverged or untrained seed
            _require(path, "evaluate")
            per_policy[name][seed] = read_episode_metrics_csv(path)
    if not per_policy[DYNAMIC_POLICY]:
        per_policy.pop(DYNAMIC_POLICY)
        policy_names.remove(DYNAMIC_POLICY)

    some_metrics = next(iter(per_policy[policy_names[0]].values()))
    months = sorted({month_of_day(m.day) for m in some_metrics})
    month_last_day = {
        m: max(x.day for x in some_metrics if month_of_day(x.day) == m) for m in months
    }
    baseline = static_name(k_actions - 1)

    monthly_cnfs = {
        name: {
            m: _median_over_seeds(
                {s: cnfs(mx, up_to_day=month_last_day[m])
                 for s, mx in per_policy[name].items()}
            )
            for m in months
        }
        for name in policy_names
    }
    improvements = {
        name: {
            m: (0.0 if name == baseline else relative_improvement(
                monthly_cnfs[name][m], monthly_cnfs[baseline][m]))
            for m in months
        }
        for name in policy_names
    }
    over_under = {
        name: {
            m: _median_over_seeds(
                {
                    s: over_under_totals(
                        [x for x in mx if month_of_day(x.day) == m]
                    )["sum"]
                    for s, mx in per_policy[name].items()
                }
            )
            for m in months
        }
        for name in policy_names
    }

    total_cnfs = {
        name: _median_over_seeds(
            {s: cnfs(mx) for s, mx in per_policy[name].items()}
        )
        for name in policy_names
    }
    total_over_under = {
        name: _median_over_seeds(
            {s: over_under_totals(mx)["sum"] for s, mx in per_policy[name].items()}
        )
        for name in policy_names
    }
    statics = [static_name(k) for k in range(k_actions)]
    best_static = max(statics, key=lambda n: total_cnfs[n])
    worst_static = min(statics, key=lambda n: total_cnfs[n])

    # Per-seed monthly best-static winners from the stored evaluations
    # (identical to re-simulating: run_policy is deterministic per seed).
    best_static_rows = []
    for seed in config.seeds:
        for month in months:
            nets = {
                k: sum(x.net for x in per_policy[static_name(k)][seed]
                       if month_of_day(x.day) == month)
                for k in range(k_actions)
            }
            winner = max(range(k_actions), key=lambda k: (nets[k], -k))
            best_static_rows.append((seed, month, winner))

    written = []

    cnfs_table = out / "comparison_cnfs.csv"
    with open(cnfs_table, "w") as fh:
        header = ["policy"]
        header += [f"cnfs_month_{m}" for m in months]
        header += [f"improvement_month_{m}_pct" for m in months]
        fh.write(",".join(header) + "\n")
        for name in policy_names:
            row = [name]
            row += [f"{monthly_cnfs[name][m]:.2f}" for m in months]
            row += [
                "-" if name == baseline else f"{improvements[name][m]:.2f}"
                for m in months
            ]
            fh.write(",".join(row) + "\n")
    written.append(cnfs_table)

    ou_table = out / "comparison_over_under.csv"
    with open(ou_table, "w") as fh:
        fh.write(",".join(["policy"] + [f"month_{m}" for m in months]) + "\n")
        for name in policy_names:
            fh.write(
                ",".join([name] + [f"{over_under[name][m]:.1f}" for m in months])
                + "\n"
            )
    written.append(ou_table)

    bs_table = out / "best_static_by_month.csv"
    with open(bs_table, "w") as fh:
        fh.write("seed,month,best_static_threshold\n")
        for seed, month, kk in best_static_rows:
            fh.write(f"{seed},{month},{static_name(kk)}\n")
    written.append(bs_table)

    report_json = out / "report.json"
    with open(report_json, "w") as fh:
        json.dump(
            {
                "months": months,
                "baseline": baseline,
                "monthly_cnfs_median": monthly_cnfs,
                "improvements_vs_baseline_pct": improvements,
                "over_under_median": over_under,
                "summary": {
                    "total_cnfs_median": total_cnfs,
                    "total_over_under_median": total_over_under,
                    "best_static": best_static,
                    "worst_static": worst_static,
                },
                "best_static_by_month": [
                    {"seed": s, "month": m, "threshold": kk}
                    for s, m, kk in best_static_rows
                ],
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    written.append(report_json)

    # Figures: CNFS curves from the first reporting seed, mean heatmap, and
    # the first available training curve.
    first_seed = next(iter(per_policy[policy_names[0]]))
    curves = {name: per_policy[name][first_seed]
              for name in policy_names if first_seed in per_policy[name]}
    cnfs_fig = out / "cnfs_curves.png"
    plots.render_cnfs_curves(curves, cnfs_fig)
    written.append(cnfs_fig)

    heat_sum = None
    heat_count = 0
    for seed in config.seeds:
        hpath = _seed_dir(config, seed) / "heatmap_dynamic.csv"
        if hpath.exists():
            rows = np.loadtxt(hpath, delimiter=",", skiprows=1)[:, 1:]
            heat_sum = rows if heat_sum is None else heat_sum + rows
            heat_count += 1
    if heat_sum is not None:
        mean_heat = heat_sum / heat_count
        heat_csv = out / "heatmap.csv"
        write_heatmap_csv(mean_heat, config.env, heat_csv)
        heat_fig = out / "heatmap.png"
        plots.render_heatmap(mean_heat, config.env.thresholds, heat_fig)
        written += [heat_csv, heat_fig]

    for seed in config.seeds:
        log_path = _seed_dir(config, seed) / "training_log.csv"
        if log_path.exists():
            import csv as _csv
            from .agent import IterationStats

            with open(log_path, newline="") as fh:
                rows = [
                    IterationStats(int(r["iteration"]), float(r["mean_reward"]),
                                   float(r["mean_loss"]), float(r["epsilon"]))
                    for r in _csv.DictReader(fh)
                ]
            train_fig = out / "training_curve.png"
            plots.render_training_curve(rows, train_fig)
            written.append(train_fig)
            break

    _record(config, "report", written)
    return written


def run_experiment(config: ExperimentConfig) -> list:
    """Execute the full pipeline; returns every written artifact path."""
    written = []
    written += stage_generate(config)
    written += stage_train(config)
    written += stage_evaluate(config)
    written += stage_report(config)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alertrl",
        description="Adaptive fraud-alert threshold experiments "
                    "(generate / train / evaluate / report / all)",
    )
    parser.add_argument("--stage", choices=STAGES,
                        help="stage to run (alternative to the subcommand form)")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", type=str, default=None,
                       help="YAML experiment config (defaults reproduce the "
                            "reference protocol)")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="override config seeds (repeatable)")
        p.add_argument("--out", type=str, default=None, help="output directory")

    for name in STAGES:
        p = sub.add_parser(name)
        add_common(p)
        if name == "evaluate":
            p.add_argument("--static", type=int, default=None,
                           help="evaluate only this static threshold index "
                                "(no checkpoint needed)")
    add_common(parser)
    parser.add_argument("--static", type=int, default=None, help=argparse.SUPPRESS)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config, output_dir=args.out)
    else:
        config = default_experiment_config(output_dir=args.out or "out")
    if args.seed:
        config = ExperimentConfig(
            stream=config.stream, env=config.env, train=config.train,
            split=config.split, seeds=tuple(args.seed),
            output_dir=config.output_dir,
            auto_money_scale=config.auto_money_scale,
        )
    config.validate()
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = args.command or args.stage
    if stage is None:
        parser.print_help()
        return 2
    try:
        config = _config_from_args(args)
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
        if stage == "generate":
            stage_generate(config)
        elif stage == "train":
            stage_train(config)
        elif stage == "evaluate":
            stage_evaluate(config, static_only=getattr(args, "static", None))
        elif stage == "report":
            stage_report(config)
        else:
            run_experiment(config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
