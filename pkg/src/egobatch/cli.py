"""Command-line front end: run campaigns, summarize results, list functions."""

from __future__ import annotations

import argparse
import json
import sys

from .bench import Campaign, list_functions, run_campaign, summarize_directory


def _cmd_run(args) -> int:
    campaign = Campaign.from_file(args.campaign)
    if args.seed is not None:
        for spec in campaign.specs:
            spec.seed = args.seed
    summaries = run_campaign(campaign, args.out, parallelism=args.parallelism)
    failed = 0
    for s in summaries:
        failed += s.failures
        print(
            f"{s.spec_id}: reps={s.repetitions} failures={s.failures} "
            f"stages median={s.stages_median:g} mean={s.stages_mean:g} "
            f"best mean={s.best_mean:g}"
        )
    if failed:
        print(f"{failed} replicate(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_summarize(args) -> int:
    summaries = summarize_directory(args.dir)
    for s in summaries:
        print(
            f"{s.spec_id}: reps={s.repetitions} failures={s.failures} "
            f"stages median={s.stages_median:g} mean={s.stages_mean:g} std={s.stages_std:g} "
            f"best mean={s.best_mean:g} std={s.best_std:g}"
        )
    return 1 if any(s.failures for s in summaries) else 0


def _cmd_list_functions(_args) -> int:
    for row in list_functions():
        lo = row["domain"]["lower"]
        hi = row["domain"]["upper"]
        box = f"[{lo[0]:g}, {hi[0]:g}]^{row['dim']}" if len(set(zip(lo, hi))) == 1 else json.dumps(
            [[a, b] for a, b in zip(lo, hi)]
        )
        print(
            f"{row['name']:<10} dim={row['dim']:<3} min={row['minimum']:<10g} "
            f"domain={box} defaults: n={row['default_initial']} m={row['default_pool']}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a campaign file")
    p_run.add_argument("--campaign", required=True, help="JSON campaign file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--parallelism", type=int, default=1, metavar="N")
    p_run.add_argument("--seed", type=int, default=None, help="override every spec's base seed")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="recompute summary.csv from raw records")
    p_sum.add_argument("dir", help="output directory of a previous run")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_list = sub.add_parser("list-functions", help="print the benchmark catalog")
    p_list.set_defaults(fn=_cmd_list_functions)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
