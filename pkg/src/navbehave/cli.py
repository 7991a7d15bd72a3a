"""Command-line entry point: ``navbehave {test,toy,simulate,metrics,replay}``.

Exit codes: 0 success, 2 usage or input error, 3 numeric degeneracy.
Every command that writes files also writes a run manifest next to them;
``navbehave replay MANIFEST`` re-runs the command from it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from navbehave import __version__
from navbehave.hbt import TestConfig, sensitivity_sweep
from navbehave.maze import EVENTS, AgentPolicy, EpisodeLog, MazeConfig, domain_metrics, generate_maze, run_episode
from navbehave.mmd import DegenerateBandwidthError, KernelConfig
from navbehave.movement import SubsampleConfig, TrajectoryFormatError, build_sample_distribution, dump_episodes, load_episodes
from navbehave.rng import derive_seed
from navbehave.synth import DEFAULT_ALPHAS, DEFAULT_EPSILONS, run_toy_suite

log = logging.getLogger("navbehave")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3
# flags that never change results and are left out of manifests
_EXECUTION_ONLY = {"workers", "func", "quiet"}


class InputError(Exception):
    """Bad input files or flag values (exit code 2)."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path, args: argparse.Namespace, inputs: list[str]) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _EXECUTION_ONLY}
    doc = {
        "command": args.command,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "seed": getattr(args, "seed", None),
        "version": __version__,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pct(p: float) -> str:
    return f"{100 * p:.1f}%"


def _load(path: str):
    try:
        return load_episodes(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except TrajectoryFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_test(args) -> int:
    alphas = args.alpha or [0.10]
    sub = dict(horizon=args.horizon, drop_short_episodes=True)
    try:
        x = build_sample_distribution(_load(args.x), SubsampleConfig(seed=derive_seed(args.seed, 0), **sub))
        y = build_sample_distribution(_load(args.y), SubsampleConfig(seed=derive_seed(args.seed, 1), **sub))
        cfg = TestConfig(
            m=args.m, S=args.iterations, alpha=alphas[0], repeats=args.repeats, seed=derive_seed(args.seed, 2),
            kernel=KernelConfig(sigma=args.sigma, bandwidth_seed=derive_seed(args.seed, 3)),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    results = sensitivity_sweep(x, y, cfg, alphas, workers=args.workers)

    docs = [r.to_dict() for r in results]
    with open(args.out, "w") as fh:
        json.dump(docs[0] if len(docs) == 1 else docs, fh, indent=1)
        fh.write("\n")
    _write_manifest(args.out + ".manifest.json", args, [args.x, args.y])

    print(f"X: {x.source_agent} ({len(x)} movements)  Y: {y.source_agent} ({len(y)} movements)  "
          f"T={args.horizon} m={args.m} S={args.iterations} sigma={results[0].sigma:.4g}")
    print(f"{'alpha':>6} {'delta':>12} {'p median':>9} {'(IQR)':>9}")
    for r in results:
        print(f"{r.alpha:6.2f} {r.delta:12.6g} {_pct(r.p_median):>9} ({100 * r.p_iqr:.2f}%)")
    return EXIT_OK


def cmd_toy(args) -> int:
    if args.grid == "default":
        alphas, epsilons = list(DEFAULT_ALPHAS), list(DEFAULT_EPSILONS)
    else:
        if not args.alphas or not args.epsilons:
            raise InputError("--grid custom needs --alphas and --epsilons")
        alphas, epsilons = args.alphas, args.epsilons
    # materialize the grid so the manifest records it
    args.alphas, args.epsilons = alphas, epsilons
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None

    def progress(eps, res):
        if not args.quiet:
            cells = "  ".join(f"a={r.alpha:.2f}: {_pct(r.p_median)} ({100 * r.p_iqr:.2f}%)" for r in res)
            print(f"eps={eps:.2f}  {cells}", flush=True)

    try:
        suite = run_toy_suite(alphas, epsilons, m=args.m, S=args.iterations, repeats=args.repeats, seed=args.seed,
                              n=args.n, dim=args.dim, workers=args.workers, progress=progress)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    suite.write_csv(out / "table_1.csv")
    suite.write_histograms(out)
    _write_manifest(out / "manifest.json", args, [])

    print()
    print(" " * 8 + "".join(f"{f'eps={e:.2f}':>16}" for e in epsilons))
    for ai, a in enumerate(alphas):
        cells = [f"{_pct(row[ai].p_median)} ({100 * row[ai].p_iqr:.2f}%)" for row in suite.results]
        print(f"a={a:.2f}  " + "".join(f"{c:>16}" for c in cells))
    return EXIT_OK


def _events_path(out: str) -> str:
    stem = out[: -len(".jsonl")] if out.endswith(".jsonl") else out
    return stem + ".events.jsonl"


def cmd_simulate(args) -> int:
    try:
        policy = AgentPolicy.parse(args.policy)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    base = {}
    if args.maze_config:
        try:
            with open(args.maze_config) as fh:
                base = json.load(fh)
            MazeConfig(**base)
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise InputError(f"bad maze config {args.maze_config}: {exc}") from None
    if args.max_steps is not None:
        base["max_steps"] = args.max_steps
    if args.episodes < 1:
        raise InputError("--episodes must be positive")
    events_path = args.events or _events_path(args.out)

    episodes, logs = [], []
    for i in range(args.episodes):
        cfg = MazeConfig(**{**base, "seed": derive_seed(args.seed, i, 0)})
        maze = generate_maze(cfg)
        ep, ev = run_episode(maze, policy, cfg.max_steps, derive_seed(args.seed, i, 1), f"ep{i:03d}")
        episodes.append(ep)
        logs.append(ev)
    with open(args.out, "w") as fh:
        dump_episodes(episodes, fh)
    with open(events_path, "w") as fh:
        for ev in logs:
            for kind, t in ev.events:
                fh.write(json.dumps({"episode_id": ev.episode_id, "event": kind, "t": t}) + "\n")
    inputs = [args.maze_config] if args.maze_config else []
    _write_manifest(args.out + ".manifest.json", args, inputs)
    if not args.quiet:
        print(f"wrote {len(episodes)} episodes of {policy} to {args.out} (events: {events_path})")
        print(domain_metrics(list(zip(episodes, logs))).table())
    return EXIT_OK


def _read_events(path: str, known: dict[str, EpisodeLog]) -> None:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                eid, kind, t = rec["episode_id"], rec["event"], int(rec["t"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise InputError(f"{path}: line {lineno}: malformed event record") from None
            if kind not in EVENTS:
                raise InputError(f"{path}: line {lineno}: unknown event {kind!r}")
            if eid not in known:
                raise InputError(f"{path}: line {lineno}: event for unknown episode {eid!r}")
            known[eid].events.append((kind, t))


def cmd_metrics(args) -> int:
    episodes = _load(args.log)
    logs = {}
    for ep in episodes:
        if "tokens" not in ep.meta or "segments" not in ep.meta:
            raise InputError(f"{args.log}: episode {ep.episode_id!r} lacks maze metadata (tokens, segments)")
        logs[ep.episode_id] = EpisodeLog(ep.episode_id, int(ep.meta["tokens"]), int(ep.meta["segments"]))
    _read_events(args.events, logs)
    report = domain_metrics([(ep, logs[ep.episode_id]) for ep in episodes])
    text = f"{episodes.agent_id}: {report.n_episodes} episodes\n{report.table()}\n"
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _write_manifest(args.out + ".manifest.json", args, [args.log, args.events])
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        with open(args.manifest) as fh:
            doc = json.load(fh)
        config = doc["config"]
        command = doc["command"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"bad manifest {args.manifest}: {exc}") from None
    for path, digest in doc.get("inputs", {}).items():
        if not os.path.exists(path) or _sha256(path) != digest:
            raise InputError(f"input {path} is missing or differs from the manifest")
    ns = argparse.Namespace(**config, workers=args.workers, quiet=args.quiet)
    return COMMANDS[command](ns)


COMMANDS = {"test": cmd_test, "toy": cmd_toy, "simulate": cmd_simulate, "metrics": cmd_metrics, "replay": cmd_replay}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navbehave", description="Compare agent navigation behaviour with a bootstrap MMD test.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=True):
        p.add_argument("--quiet", action="store_true")
        if workers:
            p.add_argument("--workers", type=int, default=1, help="processes for independent repeats (results unchanged)")

    p = sub.add_parser("test", help="two-sample test between two trajectory logs")
    p.add_argument("--x", required=True, help="trajectory log of the reference agent")
    p.add_argument("--y", required=True, help="trajectory log of the agent under test")
    p.add_argument("--horizon", "-T", type=int, default=4)
    p.add_argument("--m", type=int, default=1000, help="bootstrap subsample size")
    p.add_argument("--iterations", "-S", type=int, default=1000)
    p.add_argument("--alpha", type=float, action="append", help="repeatable; default 0.10")
    p.add_argument("--repeats", "-R", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=None, help="kernel bandwidth (default: median heuristic)")
    p.add_argument("--out", required=True, help="TestResult JSON path")
    common(p)

    p = sub.add_parser("toy", help="shifted-Gaussian study (table of median p-values)")
    p.add_argument("--grid", choices=("default", "custom"), default="default")
    p.add_argument("--alphas", type=float, nargs="+")
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--iterations", "-S", type=int, default=1000)
    p.add_argument("--repeats", "-R", type=int, default=10)
    p.add_argument("--n", type=int, default=10_000, help="source sample size per side")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    common(p)

    p = sub.add_parser("simulate", help="scripted agents in generated mazes")
    p.add_argument("--episodes", type=int, default=40)
    p.add_argument("--policy", default="greedy", help="greedy | noisy:<eta> | random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maze-config", default=None, help="JSON object of MazeConfig fields")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out", required=True, help="trajectory log path (JSON Lines)")
    p.add_argument("--events", default=None, help="events sidecar path (default: <out>.events.jsonl)")
    common(p, workers=False)

    p = sub.add_parser("metrics", help="proficiency metrics from a log and its events")
    p.add_argument("--log", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--out", default=None, help="also write the table here")
    common(p, workers=False)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateBandwidthError as exc:
        print(f"error: {exc} (e.g. --sigma 1.0)", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
