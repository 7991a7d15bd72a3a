import json
from collections import deque

import numpy as np
import pytest

from navbehave.maze import AgentPolicy, MazeConfig, MazeInstance, generate_maze, run_episode
from navbehave.movement import Episode, EpisodeSet
from navbehave.rng import derive_seed

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""

    def _report(criterion: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


@pytest.fixture(scope="session")
def toy_suite():
    """Default 3 x 6 toy grid (m=100, S=1000, R=10), computed once."""
    import time

    from navbehave.synth import run_toy_suite

    t0 = time.perf_counter()
    suite = run_toy_suite(seed=0)
    suite.elapsed = time.perf_counter() - t0
    return suite


def simulate(policy: str, seed: int, episodes: int = 40, **maze_kw) -> tuple[EpisodeSet, list]:
    """Same seeding scheme as ``navbehave simulate``."""
    pol = AgentPolicy.parse(policy)
    eps, logs = [], []
    for i in range(episodes):
        cfg = MazeConfig(**{**maze_kw, "seed": derive_seed(seed, i, 0)})
        ep, log = run_episode(generate_maze(cfg), pol, cfg.max_steps, derive_seed(seed, i, 1), f"ep{i:03d}")
        eps.append(ep)
        logs.append(log)
    return EpisodeSet(tuple(eps), str(pol)), logs


def write_log(path, episodes):
    with open(path, "w") as fh:
        for ep_id, agent, coords in episodes:
            fh.write(json.dumps({"episode_id": ep_id, "agent_id": agent, "coords": coords}) + "\n")


def make_set(lengths, agent="a", seed=0):
    rng = np.random.default_rng(seed)
    eps = [Episode(f"e{i}", agent, rng.integers(-5, 5, size=(n, 3)).astype(float)) for i, n in enumerate(lengths)]
    return EpisodeSet(tuple(eps), agent)


def flood_fill(maze: MazeInstance) -> tuple[set, set]:
    """Cells reachable from the start, stepping only across unwalled edges."""
    walls = set()
    s = maze.side
    o = s // 2
    for sx, sz in maze.segments:
        for i in (0, s - 1):
            for j in (0, s - 1):
                x, z = sx * s - o + i, sz * s - o + j
                nx = x - 1 if i == 0 else x + 1
                nz = z - 1 if j == 0 else z + 1
                walls.add(frozenset([(x, z), (nx, z)]))
                walls.add(frozenset([(x, z), (x, nz)]))
    cells = {(sx * s - o + i, sz * s - o + j) for sx, sz in maze.segments for i in range(s) for j in range(s)}
    seen = {maze.start}
    todo = deque([maze.start])
    while todo:
        x, z = todo.popleft()
        for nb in ((x + 1, z), (x - 1, z), (x, z + 1), (x, z - 1)):
            if nb in cells and nb not in seen and frozenset([(x, z), nb]) not in walls:
                seen.add(nb)
                todo.append(nb)
    return seen, cells
