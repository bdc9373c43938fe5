"""Command-line entry points: ``train``, ``sweep``, and ``oracle``.

Exit codes: 0 success, 1 config/environment error, 2 numerical abort
(partial CSV retained), 3 oracle tolerance violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, build_env, dump_config, load_config
from .envs import CapExceeded
from .oracle import run_checks
from .runlog import parse_csv
from .trainer import TrainAbort, train


def _out_root(explicit: str | None) -> str:
    if explicit:
        return explicit
    return os.environ.get("GFLOWLAB_OUT", "runs")


def cmd_train(args) -> int:
    try:
        overrides = list(args.set or [])
        if args.seed is not None:
            overrides.append(f"training.seed={args.seed}")
        cfg = load_config(args.config, overrides=overrides)
    except (ConfigError, CapExceeded, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = _out_root(args.out)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.resolved"), "w") as fh:
        fh.write(dump_config(cfg))
    try:
        result = train(cfg, out_dir=out)
    except CapExceeded as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 1
    except TrainAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 2
    result.bundle.save(os.path.join(out, "checkpoint.final"))
    last = result.rows[-1]
    print(f"done: {len(result.rows)} metric rows -> {out}/metrics.csv "
          f"(final l1_exact={last.l1_exact:.6g})")
    return 0


def _sweep_child(payload) -> dict:
    config_path, overrides, out = payload
    cfg = load_config(config_path, overrides=overrides)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.resolved"), "w") as fh:
        fh.write(dump_config(cfg))
    result = train(cfg, out_dir=out)
    result.bundle.save(os.path.join(out, "checkpoint.final"))
    return {"out": out, "ok": True}


def _best_metrics(csv_file: str) -> dict:
    cols = parse_csv(csv_file)

    def best(name, how):
        vals = [v for v in cols.get(name, []) if v is not None]
        if not vals:
            return None
        return max(vals) if how == "max" else min(vals)

    def final(name):
        vals = cols.get(name, [])
        return vals[-1] if vals else None

    return {
        "spearman_best": best("spearman", "max"),
        "pearson_best": best("pearson", "max"),
        "l1_exact_final": final("l1_exact"),
        "l1_exact_best": best("l1_exact", "min"),
        "modes_found_final": final("modes_found"),
    }


def cmd_sweep(args) -> int:
    lrs = [float(x) for x in args.lrs.split(",") if x.strip()] if args.lrs else []
    seeds = [int(x) for x in args.seeds.split(",") if x.strip()] if args.seeds else []
    if not lrs or not seeds:
        print("sweep needs nonempty --lrs and --seeds lists", file=sys.stderr)
        return 1
    try:
        base = load_config(args.config, overrides=list(args.set or []))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    root = _out_root(args.out)
    os.makedirs(root, exist_ok=True)
    jobs = []
    for lr in lrs:
        for seed in seeds:
            overrides = list(args.set or []) + [
                f"training.lr={lr:.17g}", f"training.seed={seed}"]
            out = os.path.join(root, f"lr{lr:g}_seed{seed}")
            jobs.append((args.config, overrides, out))
    failures = []
    results = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for payload, fut in [(j, pool.submit(_sweep_child, j)) for j in jobs]:
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - children may fail independently
                    failures.append((payload[2], str(exc)))
    else:
        for payload in jobs:
            try:
                results.append(_sweep_child(payload))
            except Exception as exc:  # noqa: BLE001
                failures.append((payload[2], str(exc)))
    for out, msg in failures:
        print(f"sweep child failed: {out}: {msg}", file=sys.stderr)

    # summary: per (backward, objective, lr), best-over-checkpoints then mean over seeds
    groups: dict[tuple, list[dict]] = {}
    for lr in lrs:
        for seed in seeds:
            out = os.path.join(root, f"lr{lr:g}_seed{seed}")
            csv_file = os.path.join(out, "metrics.csv")
            if not os.path.exists(csv_file):
                continue
            key = (base.backward.kind, base.objective.kind, lr)
            groups.setdefault(key, []).append(_best_metrics(csv_file))
    summary_path = os.path.join(root, "summary.csv")
    metric_names = ["spearman_best", "pearson_best", "l1_exact_final", "l1_exact_best",
                    "modes_found_final"]
    with open(summary_path, "w") as fh:
        fh.write("backward,objective,lr,num_seeds,"
                 + ",".join(f"{m}_mean" for m in metric_names) + "\n")
        for (bk, ob, lr), items in sorted(groups.items()):
            cells = [bk, ob, f"{lr:.17g}", str(len(items))]
            for m in metric_names:
                vals = [it[m] for it in items if it[m] is not None]
                cells.append(f"{np.mean(vals):.17g}" if vals else "")
            fh.write(",".join(cells) + "\n")
    print(f"sweep complete: {len(results)} runs, {len(failures)} failures -> {summary_path}")
    if results:
        return 0
    return 1


def cmd_oracle(args) -> int:
    try:
        cfg = load_config(args.config, overrides=list(args.set or [])) if args.config \
            else load_config(text="", overrides=list(args.set or []))
        env = build_env(cfg.env)
    except (ConfigError, CapExceeded, OSError) as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 1
    which = args.checks.split(",") if args.checks else None
    try:
        checks = run_checks(env, which=which, seed=args.seed or 0)
    except CapExceeded as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 1
    bad = 0
    for c in checks:
        status = "ok" if c.ok else "FAIL"
        print(f"{c.name:28s} residual={c.residual:.3e} tol={c.tol:.1e} [{status}]")
        bad += 0 if c.ok else 1
    if bad:
        print(f"{bad} oracle checks out of tolerance", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gflowlab",
                                     description="GFlowNet training engine with exact oracles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="learning-rate x seed sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--lrs", required=True, help="comma-separated learning rates")
    p_sweep.add_argument("--seeds", required=True, help="comma-separated seeds")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="exact-identity verification suites")
    p_oracle.add_argument("--config", default=None)
    p_oracle.add_argument("--checks", default=None,
                          help="comma list: proposition1,alternation,maxent,marginal,pinsker")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p_oracle.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
