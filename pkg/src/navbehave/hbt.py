"""Bootstrap MMD two-sample test.

For each repeat: S subsample pairs of size m are drawn with replacement from
X and Y (the *separated* distances), and S more pairs are drawn from the
pooled sample Z (the *pooled* distances). The test statistic is the
alpha-quantile of the separated distances; the p-value is the fraction of
pooled distances strictly above it.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from navbehave.mmd import KernelConfig, gaussian_gram, median_heuristic_bandwidth
from navbehave.movement import SampleDistribution, pool
from navbehave.rng import child, seed_sequence

__all__ = [
    "BootstrapTable",
    "DistanceDistribution",
    "Source",
    "TestConfig",
    "TestResult",
    "bootstrap_pooled",
    "bootstrap_separated",
    "p_value",
    "quantile",
    "run_test",
    "sensitivity_sweep",
]

SEPARATED, POOLED = 0, 1
KINDS = {SEPARATED: "separated", POOLED: "pooled"}
HIST_BINS = 50

# A fixed sample, or a function of the repeat index returning a fresh one.
Source = Union[SampleDistribution, Callable[[int], SampleDistribution]]


@dataclass(frozen=True)
class TestConfig:
    __test__ = False

    m: int = 100
    S: int = 1000
    alpha: float = 0.10
    repeats: int = 10
    seed: int = 0
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("subsample size m must be >= 2")
        if self.S < 1:
            raise ValueError("iterations S must be >= 1")
        _check_alpha(self.alpha)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    distances: np.ndarray
    kind: str

    def __len__(self) -> int:
        return len(self.distances)


@dataclass(eq=False)
class TestResult:
    __test__ = False

    delta: float
    alpha: float
    p_values: list[float]
    p_median: float
    p_iqr: float
    sigma: float
    T: int | None
    m: int
    S: int
    repeats: int
    seed: int
    deltas: list[float] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)
    histograms: dict | None = None

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "alpha": self.alpha,
            "T": self.T,
            "m": self.m,
            "S": self.S,
            "repeats": self.repeats,
            "seed": self.seed,
            "p_values": self.p_values,
            "p_median": self.p_median,
            "p_iqr": self.p_iqr,
            "sigma": self.sigma,
            "deltas": self.deltas,
            "sigmas": self.sigmas,
            "histograms": self.histograms,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


class BootstrapTable:
    """Pooled rows of X and Y, deduplicated, with a fixed kernel bandwidth.

    Subsamples are index arrays into the unique rows, so repeated movement
    vectors (common on a grid) share kernel evaluations. When the number of
    unique rows is at most ``cache_limit`` the full kernel matrix is kept
    (8192 rows is about 0.5 GB) and MMDs are evaluated in batches; otherwise each MMD builds the kernel over
    the rows it touches.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray | None, sigma: float, cache_limit: int = 8192, batch: int = 256):
        if not sigma > 0:
            raise ValueError("bandwidth must be positive")
        x = np.asarray(x, dtype=float)
        z = x if y is None else np.concatenate([x, np.asarray(y, dtype=float)])
        if y is not None and x.shape[1] != z.shape[1]:
            raise ValueError("dimension mismatch")
        self.sigma = float(sigma)
        self.rows, inv = np.unique(z, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        self.ids = {"x": inv[: len(x)], "y": inv[len(x) :], "z": inv}
        self.batch = batch
        self.gram = gaussian_gram(self.rows, self.sigma) if len(self.rows) <= cache_limit else None

    def mmd(self, a: np.ndarray, b: np.ndarray) -> float:
        """MMD between the bags of unique-row indices ``a`` and ``b``."""
        if self.gram is not None:
            return float(self._mmd_cached(a[None, :], b[None, :])[0])
        ids, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
        w = np.bincount(inv[: len(a)], minlength=len(ids)) / len(a)
        w -= np.bincount(inv[len(a) :], minlength=len(ids)) / len(b)
        k = gaussian_gram(self.rows[ids], self.sigma)
        return float(w @ k @ w)

    def _mmd_cached(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        u = len(self.rows)
        nb, m_a = a.shape
        cols = np.arange(nb)[:, None] * u
        w = np.bincount((a + cols).ravel(), minlength=nb * u) / m_a
        w -= np.bincount((b + cols).ravel(), minlength=nb * u) / b.shape[1]
        w = w.reshape(nb, u)
        return np.einsum("bu,bu->b", w, w @ self.gram)

    def distances(self, kind: int, m: int, S: int, root: np.random.SeedSequence) -> DistanceDistribution:
        if kind == SEPARATED:
            src_a, src_b = self.ids["x"], self.ids["y"]
        else:
            src_a = src_b = self.ids["z"]
        if len(src_a) == 0 or len(src_b) == 0:
            raise ValueError("cannot subsample from an empty sample")
        a = np.empty((S, m), dtype=np.intp)
        b = np.empty((S, m), dtype=np.intp)
        for i in range(S):
            g = child(root, i)
            a[i] = src_a[g.integers(0, len(src_a), size=m)]
            b[i] = src_b[g.integers(0, len(src_b), size=m)]
        out = np.empty(S)
        if self.gram is not None:
            for lo in range(0, S, self.batch):
                out[lo : lo + self.batch] = self._mmd_cached(a[lo : lo + self.batch], b[lo : lo + self.batch])
        else:
            for i in range(S):
                out[i] = self.mmd(a[i], b[i])
        return DistanceDistribution(out, KINDS[kind])


def _root(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    return seed_sequence(int(rng))


def bootstrap_separated(x: SampleDistribution, y: SampleDistribution, m: int, S: int, sigma: float, rng) -> DistanceDistribution:
    """S MMDs between size-m subsamples of X and of Y.

    ``rng`` is a SeedSequence (or int seed); iteration ``i`` draws from its
    child stream ``i``.
    """
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    return BootstrapTable(x.samples, y.samples, sigma).distances(SEPARATED, m, S, _root(rng))


def bootstrap_pooled(z: SampleDistribution, m: int, S: int, sigma: float, rng) -> DistanceDistribution:
    """S MMDs between two independent size-m subsamples of Z."""
    return BootstrapTable(z.samples, None, sigma).distances(POOLED, m, S, _root(rng))


def quantile(values: Sequence[float], alpha: float) -> float:
    """Smallest value whose empirical CDF is at least ``alpha``.

    That is the ``ceil(alpha * S)``-th order statistic; the rank is settled
    by comparing ``k / S`` to ``alpha`` so that e.g. 0.07 * 100 lands on 7.
    """
    _check_alpha(alpha)
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise ValueError("quantile of an empty sequence")
    k = max(1, math.ceil(alpha * n))
    while k > 1 and (k - 1) / n >= alpha:
        k -= 1
    while k < n and k / n < alpha:
        k += 1
    return float(v[k - 1])


def p_value(pooled: DistanceDistribution | Sequence[float], delta: float) -> float:
    """Fraction of pooled distances strictly greater than ``delta``."""
    d = np.asarray(pooled.distances if isinstance(pooled, DistanceDistribution) else pooled, dtype=float)
    if len(d) == 0:
        raise ValueError("p-value of an empty distance distribution")
    return int(np.count_nonzero(d > delta)) / len(d)


def _resolve(src: Source, r: int) -> SampleDistribution:
    return src(r) if callable(src) else src


def _sigma(x: SampleDistribution, y: SampleDistribution, kernel: KernelConfig) -> float:
    if kernel.sigma is not None:
        return float(kernel.sigma)
    return median_heuristic_bandwidth(pool(x, y), kernel.pair_cap, kernel.bandwidth_seed)


def _repeat(x: Source, y: Source, cfg: TestConfig, r: int, table: BootstrapTable | None = None):
    if table is None:
        xs, ys = _resolve(x, r), _resolve(y, r)
        if xs.dim != ys.dim:
            raise ValueError(f"dimension mismatch: {xs.dim} vs {ys.dim}")
        table = BootstrapTable(xs.samples, ys.samples, _sigma(xs, ys, cfg.kernel))
    sep = table.distances(SEPARATED, cfg.m, cfg.S, seed_sequence(cfg.seed, r, SEPARATED))
    pooled = table.distances(POOLED, cfg.m, cfg.S, seed_sequence(cfg.seed, r, POOLED))
    return table.sigma, sep.distances, pooled.distances


def _histograms(sep: np.ndarray, pooled: np.ndarray) -> dict:
    both = np.concatenate([sep, pooled])
    lo, hi = float(both.min()), float(both.max())
    out = {}
    for name, d in (("separated", sep), ("pooled", pooled)):
        counts, edges = np.histogram(d, bins=HIST_BINS, range=(lo, hi))
        out[name] = {"edges": edges.tolist(), "counts": counts.tolist()}
    return out


def _horizon(x: Source) -> int | None:
    return x.T if isinstance(x, SampleDistribution) else None


def sensitivity_sweep(
    x: Source,
    y: Source,
    cfg: TestConfig,
    alphas: Sequence[float],
    workers: int = 1,
) -> list[TestResult]:
    """One result per alpha, all computed from the same bootstrap draws.

    ``cfg.alpha`` is ignored; only the statistic and the p-value depend on
    alpha. Repeats may run in ``workers`` processes with identical output.
    """
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alphas must be non-empty")
    for a in alphas:
        _check_alpha(a)

    table = None
    if isinstance(x, SampleDistribution) and isinstance(y, SampleDistribution):
        if x.dim != y.dim:
            raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
        table = BootstrapTable(x.samples, y.samples, _sigma(x, y, cfg.kernel))

    args = [(x, y, cfg, r, table) for r in range(cfg.repeats)]
    if workers > 1 and cfg.repeats > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(_repeat, *zip(*args)))
    else:
        runs = [_repeat(*a) for a in args]

    sigmas = [s for s, _, _ in runs]
    hist = _histograms(runs[-1][1], runs[-1][2])
    results = []
    for a in alphas:
        deltas = [quantile(sep, a) for _, sep, _ in runs]
        ps = [p_value(pooled, d) for (_, _, pooled), d in zip(runs, deltas)]
        q1, q3 = np.percentile(ps, [25, 75])
        results.append(
            TestResult(
                delta=float(np.median(deltas)),
                alpha=a,
                p_values=ps,
                p_median=float(np.median(ps)),
                p_iqr=float(q3 - q1),
                sigma=float(np.median(sigmas)),
                T=_horizon(x),
                m=cfg.m,
                S=cfg.S,
                repeats=cfg.repeats,
                seed=cfg.seed,
                deltas=deltas,
                sigmas=sigmas,
                histograms=hist,
            )
        )
    return results


def run_test(x: Source, y: Source, cfg: TestConfig, workers: int = 1) -> TestResult:
    return sensitivity_sweep(x, y, cfg, [cfg.alpha], workers=workers)[0]
