"""Grid-world maze, scripted agents, and episode metrics.

A maze is a connected set of square segments on a lattice. Each segment is a
``side x side`` block of cells (side 4 gives 16 spawn cells). The two outer
edges of every segment corner cell are walls; the other boundary edges are
open, so neighbouring segments connect through their middle cells and a step
across an open edge with no segment behind it falls off the map.

Positions are logged as cell centres ``(x, 0, z)``, one unit per cell;
heading N is +z and E is +x.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from navbehave.movement import Episode
from navbehave.rng import stream

__all__ = [
    "Action",
    "AgentPolicy",
    "AgentState",
    "EpisodeLog",
    "MazeConfig",
    "MazeInstance",
    "MetricsReport",
    "apply_action",
    "choose_action",
    "domain_metrics",
    "generate_maze",
    "initial_state",
    "run_episode",
    "step_agent",
]

Cell = tuple[int, int]
HEADINGS = ((0, 1), (1, 0), (0, -1), (-1, 0))  # N, E, S, W
LEFT, NO_TURN, RIGHT = -1, 0, 1
EVENTS = ("fall", "attack", "wall_hit", "token")


@dataclass(frozen=True)
class MazeConfig:
    segments_min: int = 5
    segments_max: int = 30
    spawn_points_per_segment: int = 16
    p_token: float = 0.75
    p_enemy: float = 0.25
    enemy_visual_radius: float = 5.0
    max_steps: int = 5000
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.segments_min <= self.segments_max:
            raise ValueError("need 1 <= segments_min <= segments_max")
        side = math.isqrt(self.spawn_points_per_segment)
        if side * side != self.spawn_points_per_segment or side < 3:
            raise ValueError("spawn_points_per_segment must be a square number >= 9")
        for p in (self.p_token, self.p_enemy):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def side(self) -> int:
        return math.isqrt(self.spawn_points_per_segment)


def _edge(a: Cell, b: Cell) -> tuple[Cell, Cell]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, eq=False)
class MazeInstance:
    side: int
    segments: tuple[Cell, ...]
    tokens: tuple[Cell, ...]
    enemies: tuple[Cell, ...]
    start: Cell = (0, 0)
    enemy_visual_radius: float = 5.0
    seed: int = 0

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def segment_cells(self, seg: Cell) -> list[Cell]:
        o = self.side // 2
        x0, z0 = seg[0] * self.side - o, seg[1] * self.side - o
        return [(x0 + i, z0 + j) for j in range(self.side) for i in range(self.side)]

    def segment_of(self, cell: Cell) -> Cell:
        o = self.side // 2
        return ((cell[0] + o) // self.side, (cell[1] + o) // self.side)

    @cached_property
    def platform(self) -> frozenset[Cell]:
        return frozenset(c for s in self.segments for c in self.segment_cells(s))

    @cached_property
    def walls(self) -> frozenset[tuple[Cell, Cell]]:
        out = set()
        s = self.side
        for seg in self.segments:
            cells = self.segment_cells(seg)
            for j in (0, s - 1):
                for i in (0, s - 1):
                    x, z = cells[j * s + i]
                    dx = -1 if i == 0 else 1
                    dz = -1 if j == 0 else 1
                    out.add(_edge((x, z), (x + dx, z)))
                    out.add(_edge((x, z), (x, z + dz)))
        return frozenset(out)

    def blocked(self, a: Cell, b: Cell) -> bool:
        return _edge(a, b) in self.walls

    def neighbours(self, cell: Cell) -> list[Cell]:
        """Platform cells reachable in one unblocked step, in N, E, S, W order."""
        out = []
        for dx, dz in HEADINGS:
            nb = (cell[0] + dx, cell[1] + dz)
            if nb in self.platform and not self.blocked(cell, nb):
                out.append(nb)
        return out

    @cached_property
    def cell_index(self) -> dict[Cell, int]:
        return {c: i for i, c in enumerate(sorted(self.platform))}

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs shortest-path step counts over platform cells."""
        idx = self.cell_index
        rows, cols = [], []
        for c, i in idx.items():
            for nb in self.neighbours(c):
                rows.append(i)
                cols.append(idx[nb])
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(idx), len(idx)))
        return shortest_path(graph, unweighted=True, directed=False)

    def dist(self, a: Cell, b: Cell) -> float:
        return self.distances[self.cell_index[a], self.cell_index[b]]

    def next_hop(self, src: Cell, dst: Cell, prefer: int | None = None) -> Cell | None:
        """First cell on a shortest path; ties go to ``prefer`` heading, then N, E, S, W."""
        if src == dst:
            return None
        d = self.dist(src, dst)
        order = list(range(4)) if prefer is None else [prefer] + [h for h in range(4) if h != prefer]
        for h in order:
            nb = (src[0] + HEADINGS[h][0], src[1] + HEADINGS[h][1])
            if nb in self.platform and not self.blocked(src, nb) and self.dist(nb, dst) == d - 1:
                return nb
        return None

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("segments", "tokens", "enemies"):
            d[k] = [list(c) for c in d[k]]
        d["start"] = list(self.start)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MazeInstance:
        return cls(
            side=d["side"],
            segments=tuple(tuple(c) for c in d["segments"]),
            tokens=tuple(tuple(c) for c in d["tokens"]),
            enemies=tuple(tuple(c) for c in d["enemies"]),
            start=tuple(d.get("start", (0, 0))),
            enemy_visual_radius=d.get("enemy_visual_radius", 5.0),
            seed=d.get("seed", 0),
        )


def generate_maze(cfg: MazeConfig) -> MazeInstance:
    """Random connected maze with N ~ U(segments_min, segments_max) segments.

    Segments grow from the origin by attaching to a random existing segment,
    so the layout is connected. Each spawn cell (other than the start cell)
    holds an enemy with probability p_enemy / M; each segment then holds one
    token with probability p_token, on a uniformly chosen enemy-free cell.
    """
    rng = stream(cfg.seed)
    n = int(rng.integers(cfg.segments_min, cfg.segments_max + 1))
    segments = [(0, 0)]
    taken = {(0, 0)}
    while len(segments) < n:
        bx, bz = segments[int(rng.integers(len(segments)))]
        dx, dz = HEADINGS[int(rng.integers(4))]
        nb = (bx + dx, bz + dz)
        if nb not in taken:
            taken.add(nb)
            segments.append(nb)

    maze = MazeInstance(cfg.side, tuple(segments), (), (), (0, 0), cfg.enemy_visual_radius, cfg.seed)
    M = cfg.spawn_points_per_segment
    enemy_draw = rng.random((n, M)) < cfg.p_enemy / M
    token_draw = rng.random(n) < cfg.p_token
    token_pos = rng.random(n)
    tokens, enemies = [], []
    for k, seg in enumerate(segments):
        cells = maze.segment_cells(seg)
        free = []
        for c, is_enemy in zip(cells, enemy_draw[k]):
            if c == maze.start:
                continue
            if is_enemy:
                enemies.append(c)
            else:
                free.append(c)
        if token_draw[k] and free:
            tokens.append(free[int(token_pos[k] * len(free))])
    return replace(maze, tokens=tuple(tokens), enemies=tuple(enemies))


@dataclass(frozen=True)
class AgentPolicy:
    kind: str = "greedy"
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("greedy", "noisy", "random_walk"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"flip probability must lie in [0, 1], got {self.eta}")

    @classmethod
    def parse(cls, text: str) -> AgentPolicy:
        """``greedy``, ``random`` / ``random_walk``, or ``noisy:<eta>``."""
        if text == "greedy":
            return cls("greedy")
        if text in ("random", "random_walk"):
            return cls("random_walk")
        if text.startswith("noisy:"):
            try:
                eta = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"invalid flip probability in {text!r}") from None
            return cls("noisy", eta)
        raise ValueError(f"unknown policy {text!r}")

    def __str__(self) -> str:
        if self.kind == "noisy":
            return f"noisy:{self.eta:g}"
        return self.kind


@dataclass(frozen=True)
class Action:
    move: bool = False
    turn: int = NO_TURN


@dataclass(frozen=True)
class AgentState:
    pos: Cell
    heading: int
    tokens: frozenset[Cell]
    enemies: tuple[Cell, ...]
    respawn: bool = False


def initial_state(maze: MazeInstance) -> AgentState:
    return AgentState(maze.start, 0, frozenset(maze.tokens), maze.enemies)


def _coord(cell: Cell) -> tuple[float, float, float]:
    return (float(cell[0]), 0.0, float(cell[1]))


def apply_action(maze: MazeInstance, state: AgentState, action: Action) -> tuple[AgentState, tuple, list[str]]:
    """Advance the world one tick.

    The turn is applied before the move. Enemies within the visual radius
    then take one shortest-path step toward the agent; an enemy sharing the
    agent's cell attacks and despawns. After a fall or an attack the next
    tick is spent respawning at the start cell facing N, whatever the action.
    """
    events: list[str] = []
    respawn = False
    if state.respawn:
        pos, heading = maze.start, 0
    else:
        heading = (state.heading + action.turn) % 4
        pos = state.pos
        if action.move:
            dx, dz = HEADINGS[heading]
            target = (pos[0] + dx, pos[1] + dz)
            if maze.blocked(pos, target):
                events.append("wall_hit")
            elif target not in maze.platform:
                events.append("fall")
                pos, respawn = target, True
            else:
                pos = target

    tokens = state.tokens
    enemies = state.enemies
    if not respawn:
        if pos in tokens:
            tokens = tokens - {pos}
            events.append("token")
        radius = maze.enemy_visual_radius * maze.side
        moved = []
        for e in enemies:
            if e != pos and math.dist(e, pos) <= radius:
                e = maze.next_hop(e, pos) or e
            moved.append(e)
        if pos in moved:
            events.append("attack")
            respawn = True
            moved = [e for e in moved if e != pos]
        enemies = tuple(moved)
    return AgentState(pos, heading, tokens, enemies, respawn), _coord(pos), events


def _greedy_action(maze: MazeInstance, state: AgentState) -> Action:
    if state.respawn or not state.tokens:
        return Action()
    target = min(state.tokens, key=lambda t: (maze.dist(state.pos, t), t))
    nxt = maze.next_hop(state.pos, target, prefer=state.heading)
    if nxt is None:
        return Action()
    want = HEADINGS.index((nxt[0] - state.pos[0], nxt[1] - state.pos[1]))
    rel = (want - state.heading) % 4
    if rel == 0:
        return Action(True, NO_TURN)
    if rel == 1:
        return Action(True, RIGHT)
    if rel == 3:
        return Action(True, LEFT)
    return Action(False, RIGHT)


def _random_action(rng: np.random.Generator) -> Action:
    return Action(bool(rng.integers(2)), int(rng.integers(3)) - 1)


def choose_action(maze: MazeInstance, policy: AgentPolicy, state: AgentState, rng: np.random.Generator) -> Action:
    if policy.kind == "random_walk":
        return _random_action(rng)
    if policy.kind == "noisy" and rng.random() < policy.eta:
        return _random_action(rng)
    return _greedy_action(maze, state)


def step_agent(maze: MazeInstance, policy: AgentPolicy, state: AgentState, rng: np.random.Generator):
    return apply_action(maze, state, choose_action(maze, policy, state, rng))


@dataclass
class EpisodeLog:
    episode_id: str
    tokens_total: int
    segments: int
    events: list[tuple[str, int]] = field(default_factory=list)
    truncated: bool = False

    def count(self, kind: str) -> int:
        return sum(1 for e, _ in self.events if e == kind)


def run_episode(
    maze: MazeInstance,
    policy: AgentPolicy,
    max_steps: int,
    seed: int = 0,
    episode_id: str = "0",
    agent_id: str | None = None,
) -> tuple[Episode, EpisodeLog]:
    """Simulate until every token is collected or ``max_steps`` positions are logged.

    The start position is logged as time step 0, so a maze without tokens
    gives a one-step episode.
    """
    rng = stream(seed)
    state = initial_state(maze)
    coords = [_coord(state.pos)]
    log = EpisodeLog(episode_id, len(maze.tokens), maze.n_segments)
    while state.tokens and len(coords) < max_steps:
        state, c, events = step_agent(maze, policy, state, rng)
        t = len(coords)
        coords.append(c)
        log.events.extend((e, t) for e in events)
    log.truncated = bool(state.tokens)
    meta = {"segments": maze.n_segments, "tokens": len(maze.tokens), "maze_seed": maze.seed, "truncated": log.truncated}
    return Episode(episode_id, agent_id or str(policy), np.array(coords), meta), log


@dataclass(frozen=True)
class MetricsReport:
    n_episodes: int
    coins: float
    reward: float
    falls: float
    attacks: float
    steps_per_segment: float
    walls_per_segment: float

    def table(self) -> str:
        head = f"{'% Coins':>8} {'% Reward':>9} {'# Falls':>8} {'# Attacks':>10} {'Steps/Seg.':>11} {'Walls/Seg.':>11}"
        row = (
            f"{100 * self.coins:7.1f}% {100 * self.reward:8.1f}% {self.falls:8.2f} {self.attacks:10.2f} "
            f"{self.steps_per_segment:11.2f} {self.walls_per_segment:11.2f}"
        )
        return head + "\n" + row


def domain_metrics(episodes: Sequence[tuple[Episode, EpisodeLog]] | Iterable) -> MetricsReport:
    """Per-episode averages of the six proficiency metrics.

    Reward is +1 per token and -1 per fall or attack; its maximum is the
    token count. A maze without tokens scores 100% coins and, without
    penalties, 100% reward.
    """
    rows = []
    for ep, log in episodes:
        total = log.tokens_total
        got = log.count("token")
        falls, attacks = log.count("fall"), log.count("attack")
        reward = got - falls - attacks
        coins = got / total if total else 1.0
        pct_reward = reward / total if total else (1.0 if reward == 0 else float(reward))
        segs = max(log.segments, 1)
        rows.append((coins, pct_reward, falls, attacks, len(ep) / segs, log.count("wall_hit") / segs))
    if not rows:
        raise ValueError("no episodes to score")
    means = np.mean(np.array(rows, dtype=float), axis=0)
    return MetricsReport(len(rows), *(float(v) for v in means))
