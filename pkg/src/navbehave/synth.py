"""Shifted-Gaussian toy study: N(0, I) against N(eps, I) in 128 dimensions."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Sequence

import numpy as np

from navbehave.hbt import TestConfig, TestResult, sensitivity_sweep
from navbehave.mmd import KernelConfig
from navbehave.movement import SampleDistribution
from navbehave.rng import derive_seed, stream

__all__ = [
    "DEFAULT_ALPHAS",
    "DEFAULT_EPSILONS",
    "GaussianSpec",
    "ToySuite",
    "run_toy_suite",
    "sample_gaussian",
]

DEFAULT_ALPHAS = (0.10, 0.25, 0.50)
DEFAULT_EPSILONS = (0.0, 0.02, 0.04, 0.06, 0.08, 0.10)


@dataclass(frozen=True)
class GaussianSpec:
    dim: int = 128
    mean_offset: float = 0.0
    variance: float = 1.0
    n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def sample_gaussian(spec: GaussianSpec) -> SampleDistribution:
    rng = stream(spec.seed)
    x = rng.normal(spec.mean_offset, np.sqrt(spec.variance), size=(spec.n, spec.dim))
    return SampleDistribution(x, f"N({spec.mean_offset:g},{spec.variance:g})")


def _draw(spec: GaussianSpec, seed: int, cell: int, side: int, repeat: int) -> SampleDistribution:
    return sample_gaussian(replace(spec, seed=derive_seed(seed, cell, repeat, side)))


@dataclass
class ToySuite:
    alphas: list[float]
    epsilons: list[float]
    # results[eps_index][alpha_index]
    results: list[list[TestResult]] = field(default_factory=list)

    def rows(self):
        for ai, a in enumerate(self.alphas):
            for ei, e in enumerate(self.epsilons):
                yield a, e, self.results[ei][ai]

    def median(self, alpha: float, eps: float) -> float:
        return self.results[self.epsilons.index(eps)][self.alphas.index(alpha)].p_median

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "epsilon", "p_median", "p_iqr"])
            for a, e, res in self.rows():
                w.writerow([repr(a), repr(e), repr(res.p_median), repr(res.p_iqr)])

    def write_histograms(self, outdir: str | os.PathLike) -> list[str]:
        paths = []
        for a, e, res in self.rows():
            path = os.path.join(outdir, f"hist_alpha{a:.2f}_eps{e:.2f}.json")
            doc = {"alpha": a, "epsilon": e, "delta": res.delta, "histograms": res.histograms}
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=1)
                fh.write("\n")
            paths.append(path)
        return paths


def run_toy_suite(
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    m: int = 100,
    S: int = 1000,
    repeats: int = 10,
    seed: int = 0,
    n: int = 10_000,
    dim: int = 128,
    workers: int = 1,
    progress=None,
) -> ToySuite:
    """Median/IQR p-value for every (alpha, eps) cell.

    X ~ N(0, I) and Y ~ N(eps, I) are redrawn every repeat. The alphas of one
    eps share bootstrap draws, so each row is exactly monotone in alpha.
    """
    suite = ToySuite(list(alphas), list(epsilons))
    for ci, eps in enumerate(suite.epsilons):
        x_src = partial(_draw, GaussianSpec(dim, 0.0, 1.0, n), seed, ci, 0)
        y_src = partial(_draw, GaussianSpec(dim, eps, 1.0, n), seed, ci, 1)
        cfg = TestConfig(m=m, S=S, alpha=suite.alphas[0], repeats=repeats, seed=derive_seed(seed, ci, 2),
                         kernel=KernelConfig(bandwidth_seed=derive_seed(seed, ci, 3)))
        suite.results.append(sensitivity_sweep(x_src, y_src, cfg, suite.alphas, workers=workers))
        if progress is not None:
            progress(eps, suite.results[-1])
    return suite
