"""``poisonctl`` command line: ``run``, ``theory`` and ``ingest``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import theory
from .config import ConfigError, build_plan, dump_config, read_config
from .datastream import load_csv, preprocess, write_csv
from .harness import run_suite, write_summary_csv

log = logging.getLogger("poisonctl")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _setup_logging():
    level = os.environ.get("POISONCTL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seeds={args.seed}")
    if args.out is not None:
        overrides.append(f"out={args.out}")
    try:
        cfg = read_config(args.config, overrides)
        plan = build_plan(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = plan.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.cfg").write_text(dump_config(cfg), encoding="utf-8")
    summaries = run_suite(plan.episodes, parallelism=args.parallelism)
    for s in summaries:
        if s.trace is not None:
            s.trace.to_csv(out / "traces" / f"{s.policy}_seed{s.seed}.csv")
    write_summary_csv(out / "summary.csv", summaries, plan.record_timing)
    failed = [s for s in summaries if not s.ok]
    for s in summaries:
        status = "FAILED " + s.error if s.error else f"Jtilde_T={s.jtilde_T:.2f}"
        print(f"{s.policy:12s} seed={s.seed:<4d} {status}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_theory(args) -> int:
    if args.trials < 1 or args.N < 2 or args.n < 1 or not 0 < args.delta < 1:
        print("theory: need trials >= 1, N >= 2, n >= 1, 0 < delta < 1", file=sys.stderr)
        return EXIT_USAGE
    prop1 = theory.verify_prop1(trials=args.trials, rng=args.seed)
    thm2 = theory.verify_thm2(args.N, args.n, args.delta, trials=args.coverage_trials, rng=args.seed)
    if args.out:
        out = Path(args.out)
        prop1.to_csv(out / "simulation_bound.csv")
        thm2.to_csv(out / "concentration.csv")
    ok = prop1.passed and thm2.passed
    print(f"{'PASS' if prop1.passed else 'FAIL'} simulation bound: {prop1.violations} violations "
          f"in {len(prop1.trials)} trials, max gap/bound = {prop1.max_ratio:.4f}")
    print(f"{'PASS' if thm2.passed else 'FAIL'} L1 concentration: coverage {thm2.coverage:.4f} "
          f">= {1 - args.delta:.4f} at N={args.N}, n={args.n}, radius {thm2.bound:.4f}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_ingest(args) -> int:
    try:
        label_map = None
        if args.label_map:
            label_map = dict(item.split(":", 1) for item in args.label_map.split(","))
        pts = load_csv(args.csv, args.label_column, header=args.header, label_map=label_map)
        pts = preprocess(pts, args.d_target)
    except (OSError, ValueError) as exc:
        print(f"ingest error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_csv(args.out, pts)
    print(f"wrote {len(pts)} points of dimension {pts[0].dim} to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poisonctl", description="Online data-poisoning attack simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run attack episodes from a config file")
    r.add_argument("--config", required=True, help="run config (.cfg); bundled names also accepted")
    r.add_argument("--override", action="append", metavar="KEY=VAL", help="override a config value")
    r.add_argument("--parallelism", type=int, default=1)
    r.add_argument("--out", help="output directory (overrides experiment.out)")
    r.add_argument("--seed", type=int, help="run only this seed")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("theory", help="check the suboptimality bounds on tabular MDPs")
    t.add_argument("--N", type=int, default=2, help="support size for the concentration check")
    t.add_argument("--n", type=int, default=1000, help="samples per empirical distribution")
    t.add_argument("--delta", type=float, default=0.05)
    t.add_argument("--trials", type=int, default=500, help="random MDP pairs")
    t.add_argument("--coverage-trials", type=int, default=10_000, help="trials for the concentration check")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", help="directory for simulation_bound.csv / concentration.csv")
    t.set_defaults(func=cmd_theory)

    g = sub.add_parser("ingest", help="normalise (and PCA-reduce) a CSV dataset")
    g.add_argument("--csv", required=True)
    g.add_argument("--label-column", help="column index or (with --header) name")
    g.add_argument("--header", action="store_true")
    g.add_argument("--label-map", help="e.g. '0:-1,1:1'")
    g.add_argument("--d-target", type=int, default=30)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
