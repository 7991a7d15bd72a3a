"""Episode logs -> empirical movement distributions.

An episode is the full sequence of 3D positions of one agent. A movement is
a window of ``T + 1`` consecutive positions with the first position
subtracted, flattened to ``3 * T`` numbers (the all-zero first point is
dropped).
"""

from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Sequence

import numpy as np

from navbehave.rng import stream

log = logging.getLogger(__name__)

__all__ = [
    "Episode",
    "EpisodeSet",
    "SampleDistribution",
    "SubsampleConfig",
    "TrajectoryFormatError",
    "build_sample_distribution",
    "dump_episodes",
    "load_episodes",
    "normalize_trajectory",
    "pool",
    "subsample_episode",
]


class TrajectoryFormatError(ValueError):
    """Raised for malformed or inconsistent trajectory logs."""


@dataclass(frozen=True, eq=False)
class Episode:
    episode_id: str
    agent_id: str
    coords: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 3 or len(coords) < 1:
            raise ValueError(f"episode {self.episode_id!r}: coords must be a non-empty (N, 3) array")
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"episode {self.episode_id!r}: non-finite coordinate")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True, eq=False)
class EpisodeSet:
    episodes: tuple[Episode, ...]
    agent_id: str

    def __post_init__(self):
        episodes = tuple(self.episodes)
        if not episodes:
            raise ValueError("an EpisodeSet needs at least one episode")
        others = {e.agent_id for e in episodes} - {self.agent_id}
        if others:
            raise ValueError(f"episodes from agents {sorted(others)} in set for {self.agent_id!r}")
        object.__setattr__(self, "episodes", episodes)

    def __len__(self) -> int:
        return len(self.episodes)

    def __iter__(self):
        return iter(self.episodes)

    @property
    def lengths(self) -> list[int]:
        return [len(e) for e in self.episodes]


@dataclass(frozen=True)
class SubsampleConfig:
    horizon: int
    seed: int = 0
    drop_short_episodes: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon T must be >= 1")


@dataclass(frozen=True, eq=False)
class SampleDistribution:
    """A bag of equal-length vectors, one per row of ``samples``.

    ``T`` is the movement horizon when the rows are movement vectors and
    ``None`` for generic (e.g. synthetic Gaussian) samples. ``origin`` optionally
    tags each row with the index of the episode it was cut from.
    """

    samples: np.ndarray
    source_agent: str = ""
    T: int | None = None
    origin: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or len(samples) == 0:
            raise ValueError("samples must be a non-empty 2D array")
        if self.T is not None and samples.shape[1] != 3 * self.T:
            raise ValueError(f"movement vectors must have 3*T = {3 * self.T} entries, got {samples.shape[1]}")
        object.__setattr__(self, "samples", samples)
        if self.origin is not None:
            origin = np.asarray(self.origin)
            if origin.shape != (len(samples),):
                raise ValueError("origin must tag every sample")
            object.__setattr__(self, "origin", origin)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _read_lines(source) -> Iterable[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
        return
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def _parse_record(line: str, lineno: int) -> Episode:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TrajectoryFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise TrajectoryFormatError(f"line {lineno}: expected a JSON object")
    for key in ("episode_id", "agent_id", "coords"):
        if key not in rec:
            raise TrajectoryFormatError(f"line {lineno}: missing field {key!r}")
    coords = rec["coords"]
    if not isinstance(coords, list) or not coords:
        raise TrajectoryFormatError(f"line {lineno}: coords must be a non-empty list")
    for point in coords:
        if (
            not isinstance(point, list)
            or len(point) != 3
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in point)
        ):
            raise TrajectoryFormatError(f"line {lineno}: coordinate {point!r} is not three numbers")
    try:
        return Episode(str(rec["episode_id"]), str(rec["agent_id"]), np.array(coords, dtype=float), rec.get("meta", {}))
    except ValueError as exc:
        raise TrajectoryFormatError(f"line {lineno}: {exc}") from None


def load_episodes(source: str | os.PathLike | IO | bytes) -> EpisodeSet:
    """Read a JSON Lines trajectory log (one episode per line).

    ``source`` is a path, a binary or text stream, or raw bytes. Blank lines
    are ignored; extra keys such as ``meta`` are kept on the episode.
    """
    episodes = []
    for lineno, line in enumerate(_read_lines(source), start=1):
        if not line.strip():
            continue
        episodes.append(_parse_record(line, lineno))
    if not episodes:
        raise TrajectoryFormatError("trajectory log is empty")
    agents = sorted({e.agent_id for e in episodes})
    if len(agents) > 1:
        raise TrajectoryFormatError(f"trajectory log mixes agents {agents}")
    return EpisodeSet(tuple(episodes), agents[0])


def _number(v: float) -> Any:
    return int(v) if float(v).is_integer() else float(v)


def dump_episodes(episodes: Iterable[Episode], fh: IO[str]) -> None:
    for ep in episodes:
        rec = {
            "episode_id": ep.episode_id,
            "agent_id": ep.agent_id,
            "coords": [[_number(v) for v in p] for p in ep.coords],
        }
        if ep.meta:
            rec["meta"] = ep.meta
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def normalize_trajectory(window: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """``(c_1 - c_0, ..., c_T - c_0)`` flattened to a vector of length ``3T``."""
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3 or len(w) < 2:
        raise ValueError("window must hold T + 1 >= 2 points of three coordinates")
    return (w[1:] - w[0]).reshape(-1)


def subsample_episode(
    episode: Episode,
    cfg: SubsampleConfig,
    count: int,
    rng: np.random.Generator,
    return_starts: bool = False,
):
    """Draw ``count`` normalized windows uniformly with replacement.

    Start indices are uniform over ``0 .. N - T - 1``. Overlapping windows
    count as distinct draws.
    """
    T = cfg.horizon
    n = len(episode)
    if n <= T:
        raise ValueError(f"episode {episode.episode_id!r} has {n} steps, needs more than T = {T}")
    if count < 1:
        raise ValueError("count must be positive")
    starts = rng.integers(0, n - T, size=count)
    windows = episode.coords[starts[:, None] + np.arange(T + 1)]
    moves = (windows[:, 1:, :] - windows[:, :1, :]).reshape(count, 3 * T)
    if return_starts:
        return moves, starts
    return moves


def build_sample_distribution(episodes: EpisodeSet, cfg: SubsampleConfig) -> SampleDistribution:
    """Draw K movements from each retained episode, K = longest retained episode.

    Episodes with ``N <= T`` are skipped with a warning, or rejected when
    ``cfg.drop_short_episodes`` is false.
    """
    T = cfg.horizon
    retained = []
    for idx, ep in enumerate(episodes):
        if len(ep) > T:
            retained.append((idx, ep))
        elif cfg.drop_short_episodes:
            log.warning("skipping episode %r: %d steps <= horizon %d", ep.episode_id, len(ep), T)
        else:
            raise ValueError(f"episode {ep.episode_id!r} has {len(ep)} steps, needs more than T = {T}")
    if not retained:
        raise ValueError(f"no episode is longer than the horizon T = {T}")
    K = max(len(ep) for _, ep in retained)
    # streams keyed by the episode's index in the input set
    parts = [subsample_episode(ep, cfg, K, stream(cfg.seed, idx)) for idx, ep in retained]
    origin = np.repeat([idx for idx, _ in retained], K)
    return SampleDistribution(np.concatenate(parts), episodes.agent_id, T, origin)


def pool(x: SampleDistribution, y: SampleDistribution) -> SampleDistribution:
    if x.dim != y.dim or x.T != y.T:
        raise ValueError(f"cannot pool distributions of dimension {x.dim} (T={x.T}) and {y.dim} (T={y.T})")
    name = x.source_agent if x.source_agent == y.source_agent else f"{x.source_agent}+{y.source_agent}"
    return SampleDistribution(np.concatenate([x.samples, y.samples]), name, x.T)
