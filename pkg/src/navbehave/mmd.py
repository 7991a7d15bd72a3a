"""Gaussian kernel, median-heuristic bandwidth and the pairwise MMD estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from navbehave.movement import SampleDistribution
from navbehave.rng import stream

__all__ = [
    "DegenerateBandwidthError",
    "KernelConfig",
    "gaussian_kernel",
    "gaussian_gram",
    "median_heuristic_bandwidth",
    "mmd_pairwise",
]

DEFAULT_PAIR_CAP = 1_000_000


class DegenerateBandwidthError(ValueError):
    """All pairwise distances are zero, so the median heuristic gives sigma = 0."""


@dataclass(frozen=True)
class KernelConfig:
    """``sigma=None`` selects the median heuristic on the pooled sample."""

    sigma: float | None = None
    pair_cap: int = DEFAULT_PAIR_CAP
    bandwidth_seed: int = 0

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.pair_cap < 1:
            raise ValueError("pair_cap must be >= 1")


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ValueError(f"bandwidth must be positive, got {sigma}")


def gaussian_kernel(u, v, sigma: float) -> float:
    """``exp(-||u - v||^2 / (2 sigma^2))``."""
    _check_sigma(sigma)
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    d = u - v
    return float(np.exp(-np.dot(d, d) / (2.0 * sigma**2)))


def gaussian_gram(points: np.ndarray, sigma: float, exact: bool = False) -> np.ndarray:
    """Kernel matrix of ``points`` against itself; the diagonal is exactly 1.

    The default expands ``|a - b|^2`` through a matrix product (fast, with
    cancellation error near zero distance); ``exact=True`` sums squared
    differences directly.
    """
    if exact:
        d2 = squareform(pdist(points, "sqeuclidean"))
    else:
        # built in place: large caches stay at one n x n buffer
        sq = np.einsum("ij,ij->i", points, points)
        d2 = points @ points.T
        d2 *= -2.0
        d2 += sq[:, None]
        d2 += sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        np.fill_diagonal(d2, 0.0)
    d2 *= -0.5 / sigma**2
    return np.exp(d2, out=d2)


def _as_array(samples) -> np.ndarray:
    if isinstance(samples, SampleDistribution):
        return samples.samples
    a = np.asarray(samples, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def median_heuristic_bandwidth(
    samples: SampleDistribution | np.ndarray,
    pair_cap: int = DEFAULT_PAIR_CAP,
    bandwidth_seed: int = 0,
    chunk: int = 65536,
) -> float:
    """Median Euclidean distance over unordered pairs of distinct rows.

    With more than ``pair_cap`` pairs, the median is taken over ``pair_cap``
    pairs drawn uniformly (with replacement) from a seeded stream.
    """
    z = _as_array(samples)
    n = len(z)
    if n < 2:
        raise ValueError("the median heuristic needs at least two samples")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= pair_cap:
        dists = pdist(z)
    else:
        rng = stream(bandwidth_seed)
        i = rng.integers(0, n, size=pair_cap)
        # j uniform over the n - 1 rows other than i
        j = rng.integers(0, n - 1, size=pair_cap)
        j = j + (j >= i)
        dists = np.empty(pair_cap)
        for lo in range(0, pair_cap, chunk):
            diff = z[i[lo : lo + chunk]] - z[j[lo : lo + chunk]]
            dists[lo : lo + chunk] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    sigma = float(np.median(dists))
    if sigma <= 0.0:
        raise DegenerateBandwidthError(
            "median pairwise distance is 0 (most samples coincide); supply an explicit bandwidth sigma"
        )
    return sigma


def mmd_pairwise(x, y, sigma: float) -> float:
    """Pairwise (V-statistic) MMD between bags ``x`` and ``y``.

    Equals mean k(x, x') + mean k(y, y') - 2 mean k(x, y) with all i = j terms
    included, evaluated as the quadratic form ``w' K w`` over the stacked bags.
    """
    _check_sigma(sigma)
    x = _as_array(x)
    y = _as_array(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if len(x) == 0 or len(y) == 0:
        raise ValueError("both bags must be non-empty")
    k = gaussian_gram(np.concatenate([x, y]), sigma, exact=True)
    w = np.concatenate([np.full(len(x), 1.0 / len(x)), np.full(len(y), -1.0 / len(y))])
    return float(w @ k @ w)
