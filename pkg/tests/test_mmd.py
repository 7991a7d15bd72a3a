import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navbehave.mmd import (
    DegenerateBandwidthError,
    KernelConfig,
    gaussian_kernel,
    median_heuristic_bandwidth,
    mmd_pairwise,
)


def naive_mmd(x, y, sigma):
    """Independent double-loop evaluation of the three kernel means."""

    def k(u, v):
        return math.exp(-sum((a - b) ** 2 for a, b in zip(u, v)) / (2 * sigma * sigma))

    xx = sum(k(a, b) for a in x for b in x) / len(x) ** 2
    yy = sum(k(a, b) for a in y for b in y) / len(y) ** 2
    xy = sum(k(a, b) for a in x for b in y) / (len(x) * len(y))
    return xx + yy - 2 * xy


def test_kernel_values():
    assert gaussian_kernel([1.5, -2.0], [1.5, -2.0], 0.3) == 1.0
    assert gaussian_kernel([0.0], [1.0], 1.0) == pytest.approx(0.6065306597126334, rel=1e-15)
    assert gaussian_kernel([0, 0], [3, 4], 5.0) == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_kernel_errors():
    with pytest.raises(ValueError):
        gaussian_kernel([0, 0], [0], 1.0)
    with pytest.raises(ValueError):
        gaussian_kernel([0], [0], 0.0)


@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=6).flatmap(
        lambda u: st.tuples(st.just(u), st.lists(st.floats(-50, 50), min_size=len(u), max_size=len(u)))
    ),
    st.floats(0.01, 100),
)
def test_kernel_bounds(uv, sigma):
    u, v = uv
    k = gaussian_kernel(u, v, sigma)
    assert 0.0 <= k <= 1.0
    if u == v:
        assert k == 1.0


def test_median_heuristic_brute_force():
    assert median_heuristic_bandwidth(np.array([0.0, 1.0, 3.0])) == 2.0
    assert median_heuristic_bandwidth(np.array([0.0, 10.0])) == 10.0
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(31, 4))
    oracle = statistics.median(math.dist(a, b) for a, b in itertools.combinations(pts.tolist(), 2))
    assert median_heuristic_bandwidth(pts) == pytest.approx(oracle, rel=1e-14)


def test_median_even_pair_count_averages_middle():
    # 4 points give 6 pairs; the median averages the 3rd and 4th smallest
    pts = np.array([0.0, 1.0, 3.0, 9.0])
    d = sorted(abs(a - b) for a, b in itertools.combinations(pts, 2))
    assert median_heuristic_bandwidth(pts) == (d[2] + d[3]) / 2


def test_median_degenerate():
    with pytest.raises(DegenerateBandwidthError, match="explicit"):
        median_heuristic_bandwidth(np.array([[1.0, 2.0], [1.0, 2.0]]))


def test_median_subsampled_pairs_seeded():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(2000, 3))
    exact = median_heuristic_bandwidth(pts)
    a = median_heuristic_bandwidth(pts, pair_cap=50_000, bandwidth_seed=5)
    b = median_heuristic_bandwidth(pts, pair_cap=50_000, bandwidth_seed=5)
    c = median_heuristic_bandwidth(pts, pair_cap=50_000, bandwidth_seed=6)
    assert a == b
    assert a != c
    assert a == pytest.approx(exact, rel=0.02)


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(sigma=0.0)
    with pytest.raises(ValueError):
        KernelConfig(pair_cap=0)


def test_mmd_examples():
    x = np.array([[0.3, -1.0], [2.0, 0.5]])
    assert mmd_pairwise(x, x, 1.3) == 0.0
    assert mmd_pairwise([[0.0]], [[1.0]], 1.0) == pytest.approx(2 - 2 * math.exp(-0.5), rel=1e-14)
    assert mmd_pairwise([[0.0], [0.0]], [[0.0]], 1.0) == 0.0


def test_mmd_errors():
    with pytest.raises(ValueError):
        mmd_pairwise(np.zeros((2, 3)), np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        mmd_pairwise(np.zeros((2, 3)), np.zeros((2, 3)), -1.0)


bags = st.integers(1, 4).flatmap(
    lambda d: st.tuples(
        st.lists(st.lists(st.floats(-5, 5), min_size=d, max_size=d), min_size=1, max_size=8),
        st.lists(st.lists(st.floats(-5, 5), min_size=d, max_size=d), min_size=1, max_size=8),
    )
)


@given(bags, st.floats(0.1, 10))
@settings(max_examples=150)
def test_mmd_symmetric_nonnegative_matches_oracle(xy, sigma):
    x, y = xy
    a = mmd_pairwise(x, y, sigma)
    b = mmd_pairwise(y, x, sigma)
    assert a >= -1e-12
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    assert a == pytest.approx(naive_mmd(x, y, sigma), rel=1e-9, abs=1e-12)
