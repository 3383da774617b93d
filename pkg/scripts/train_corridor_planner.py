#!/usr/bin/env python3
"""Train the viewpoint planner on the corridor world and compare policies.

The corridor is a 100 x 10 m strip that is blank except for one cluster
of landmarks around x = 62..78 m. A fixed step size either dawdles in
the featureless zone or overshoots the informative one; the learned
policy rushes the blank stretch and takes short confirming steps inside
the landmark strip.

Example:
    python3 scripts/train_corridor_planner.py --episodes 500
"""

import argparse
import time

import numpy as np

from graphloc import experiments as ex
from graphloc import planner as pl
from graphloc.sequence_filter import PfConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--train-seed", type=int, default=42)
    ap.add_argument("--eval-seeds", type=int, default=10)
    args = ap.parse_args()

    t0 = time.perf_counter()
    world, grid, gcn_params = ex.corridor_setup(seed=0)
    pf = PfConfig(seed=0)
    cfg = pl.PlannerConfig(alpha=0.3)

    store, curve = pl.train_planner(world, grid, gcn_params,
                                    ex.CORRIDOR_GRAPH_PARAMS, pf, cfg,
                                    n_episodes=args.episodes,
                                    seed=args.train_seed)
    last10 = float(np.mean([c["reward"] for c in curve[-10:]]))
    print(f"trained {args.episodes} episodes "
          f"(store {len(store)}, last-10 reward {last10:.3f})")

    seeds = range(100, 100 + args.eval_seeds)
    learned = pl.evaluate_policy(world, grid, gcn_params,
                                 ex.CORRIDOR_GRAPH_PARAMS, pf, cfg, store,
                                 seeds)
    print(f"{'policy':<14} {'mean reward':>11}")
    print(f"{'learned':<14} {learned:>11.3f}")
    best_fixed = -1.0
    for action in range(1, 11):
        reward = pl.evaluate_policy(world, grid, gcn_params,
                                    ex.CORRIDOR_GRAPH_PARAMS, pf, cfg, None,
                                    seeds, forced_action=float(action))
        best_fixed = max(best_fixed, reward)
        print(f"{f'fixed {action} m':<14} {reward:>11.3f}")
    print(f"learned - best fixed: {learned - best_fixed:+.3f} "
          f"({time.perf_counter() - t0:.0f} s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
