"""Pilot sweep over the tabular agent on the disco maze (PositionOnly arm).

Prints goals reached, coverage and first-goal step per setting. This is the
sweep that fixed the agent block of configs/disco-maze.yaml.

    python scripts/sweep_maze_agent.py --budget 60000 --seeds 10
"""

import argparse
import dataclasses
import itertools
import time

from recode.config import load_config
from recode.experiments import MAZE_ENV, MAZE_PARAMS, SCHEMAS, run_maze_arm


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/disco-maze.yaml")
    ap.add_argument("--budget", type=int, default=60_000)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--arm", default="position")
    ap.add_argument("--gamma-rl", type=float, nargs="+", default=[0.9, 0.99])
    ap.add_argument("--q-init", type=float, nargs="+", default=[0.0, 1.0, 10.0])
    ap.add_argument("--beta", type=float, nargs="+", default=[0.1, 1.0])
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.5])
    args = ap.parse_args()
    cfg = load_config(args.config, SCHEMAS)
    env = {**MAZE_ENV, **cfg.env}
    p = {**MAZE_PARAMS, **cfg.params, "step_budget": args.budget}
    for grl, qi, beta, alpha in itertools.product(args.gamma_rl, args.q_init, args.beta, args.alpha):
        agent = dataclasses.replace(cfg.agent, gamma_rl=grl, q_init=qi, beta_im=beta, alpha=alpha)
        c = dataclasses.replace(cfg, agent=agent)
        t0 = time.perf_counter()
        res = []
        for seed in range(args.seeds):
            t = run_maze_arm(args.arm, c, seed, env, p)["tracker"]
            res.append((len(t.seen), t.first_goal))
        goals = sum(g is not None for _, g in res)
        print(f"gamma_rl={grl} q_init={qi} beta={beta} alpha={alpha}: goals {goals}/{args.seeds} "
              f"coverage {[c for c, _ in res]} first goal {[g for _, g in res]} "
              f"({time.perf_counter() - t0:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
