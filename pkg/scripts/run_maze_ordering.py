"""Greedy reference agent against other scripted agents in generated mazes.

    python scripts/run_maze_ordering.py
    python scripts/run_maze_ordering.py --etas 0 0.002 0.01 0.05 0.2 --horizons 4

Each agent plays 40 fresh mazes. The reference log is compared with a
second greedy log (different seeds), noisy greedy variants, and a random
walk. Prints median p per horizon plus the proficiency metrics table.
"""

import argparse
import time

from navbehave.hbt import TestConfig, run_test
from navbehave.maze import AgentPolicy, MazeConfig, domain_metrics, generate_maze, run_episode
from navbehave.mmd import KernelConfig
from navbehave.movement import EpisodeSet, SubsampleConfig, build_sample_distribution
from navbehave.rng import derive_seed


def simulate(policy: str, seed: int, episodes: int):
    pol = AgentPolicy.parse(policy)
    eps, logs = [], []
    for i in range(episodes):
        cfg = MazeConfig(seed=derive_seed(seed, i, 0))
        ep, log = run_episode(generate_maze(cfg), pol, cfg.max_steps, derive_seed(seed, i, 1), f"ep{i:03d}")
        eps.append(ep)
        logs.append(log)
    return EpisodeSet(tuple(eps), str(pol)), logs


def median_p(ref, other, T, args):
    x = build_sample_distribution(ref, SubsampleConfig(T, seed=derive_seed(T, 0)))
    y = build_sample_distribution(other, SubsampleConfig(T, seed=derive_seed(T, 1)))
    cfg = TestConfig(m=args.m, S=args.S, alpha=args.alpha, repeats=args.repeats, seed=derive_seed(T, 2),
                     kernel=KernelConfig(bandwidth_seed=derive_seed(T, 3)))
    return run_test(x, y, cfg, workers=args.workers).p_median


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--episodes", type=int, default=40)
    ap.add_argument("--horizons", type=int, nargs="+", default=[4, 8])
    ap.add_argument("--etas", type=float, nargs="+", default=[0.2])
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("-S", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.10)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    agents = {"greedy'": "greedy", **{f"noisy:{eta:g}": f"noisy:{eta}" for eta in args.etas}, "random": "random"}
    ref, ref_logs = simulate("greedy", 100, args.episodes)
    runs = {name: simulate(spec, 200 + 100 * k, args.episodes) for k, (name, spec) in enumerate(agents.items())}

    print("proficiency")
    for name, (es, logs) in [("greedy", (ref, ref_logs)), *runs.items()]:
        print(f"-- {name}\n{domain_metrics(list(zip(es, logs))).table()}")

    print(f"\nmedian p vs greedy (m={args.m}, S={args.S}, alpha={args.alpha}, R={args.repeats})")
    for T in args.horizons:
        t0 = time.perf_counter()
        cells = [f"{name} {100 * median_p(ref, es, T, args):.1f}%" for name, (es, _) in runs.items()]
        print(f"T={T}: " + ", ".join(cells) + f"  ({time.perf_counter() - t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
