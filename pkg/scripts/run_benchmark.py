#!/usr/bin/env python3
"""Run the multi-seed cross-domain benchmark and print a variant table.

Each seed generates a fresh world, trains the classifier on in-domain
renders, then localizes a query route rendered under a shifted domain.
The four standard variants (full descriptor merged/unmerged,
semantic-only, sequence chain) share renders within a seed, so the
comparison is paired.

Example:
    python3 scripts/run_benchmark.py --seeds 20 --out runs/benchmark.json
"""

import argparse
import json
from pathlib import Path

from graphloc import experiments as ex


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20,
                    help="number of benchmark seeds (default 20)")
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None,
                    help="optional JSON path for per-variant summaries")
    args = ap.parse_args()

    seeds = range(args.first_seed, args.first_seed + args.seeds)
    results = ex.run_benchmark(seeds)
    summaries = {name: ex.summarize(reports)
                 for name, reports in results.items()}

    cols = ("mean_single_top1", "mean_fused_top1", "mean_final_top1",
            "mean_nodes", "mean_node_bits", "mean_edge_bits")
    width = max(len(n) for n in summaries)
    header = " ".join(f"{c.removeprefix('mean_'):>12}" for c in cols)
    print(f"{'variant':<{width}} {header}")
    for name, s in summaries.items():
        row = " ".join(f"{s[c]:>12.3f}" for c in cols)
        print(f"{name:<{width}} {row}")

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(summaries, indent=1, sort_keys=True),
                            encoding="utf-8")
        print(f"summaries -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
