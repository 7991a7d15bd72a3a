"""Acceptance criteria, one test each, every one reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``; the lines are also
collected into an "acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from conftest import flood_fill, make_set, simulate
from navbehave.cli import main
from navbehave.hbt import TestConfig, p_value, quantile, run_test, sensitivity_sweep
from navbehave.maze import MazeConfig, generate_maze
from navbehave.mmd import KernelConfig, mmd_pairwise
from navbehave.movement import (
    Episode,
    EpisodeSet,
    SampleDistribution,
    SubsampleConfig,
    build_sample_distribution,
    normalize_trajectory,
)
from navbehave.rng import derive_seed
from navbehave.synth import DEFAULT_ALPHAS, DEFAULT_EPSILONS, run_toy_suite

pytestmark = pytest.mark.slow

# published medians (percent), rows alpha, columns epsilon
TABLE = {
    0.10: [88.5, 85.9, 74.4, 48.6, 18.4, 1.1],
    0.25: [71.3, 64.8, 50.8, 24.8, 7.1, 0.3],
    0.50: [46.7, 41.0, 24.9, 8.5, 1.2, 0.0],
}


def test_c1_null_calibration(report):
    t0 = time.perf_counter()
    suite = run_toy_suite(alphas=[0.10], epsilons=[0.0], m=100, S=1000, repeats=10, seed=0, dim=128)
    elapsed = time.perf_counter() - t0
    p = suite.median(0.10, 0.0)
    ok = 0.835 <= p <= 0.935 and elapsed <= 300
    report("C1 null calibration", ok, f"median p {100 * p:.1f}% (target 83.5-93.5%), {elapsed:.0f}s")
    assert ok


def test_c2_toy_table(report, toy_suite):
    worst, bad = 0.0, []
    for a in DEFAULT_ALPHAS:
        for e, ref in zip(DEFAULT_EPSILONS, TABLE[a]):
            dev = abs(100 * toy_suite.median(a, e) - ref)
            worst = max(worst, dev)
            if dev > 6:
                bad.append(f"({a}, {e}) off by {dev:.1f}pp")
        row = [toy_suite.median(a, e) for e in DEFAULT_EPSILONS]
        bad += [f"row {a} rises at eps index {i + 1}" for i, (u, v) in enumerate(zip(row, row[1:])) if v > u + 0.02]
    ok = not bad and toy_suite.elapsed <= 1800
    report("C2 toy table", ok, f"max deviation {worst:.1f}pp, {toy_suite.elapsed:.0f}s" + (f"; {bad}" if bad else ""))
    assert ok


SWEEP_INSTANCES = []


@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(5, 40),
    dim=st.integers(1, 6),
    shift=st.floats(0, 2),
    m=st.integers(2, 20),
    S=st.integers(5, 60),
)
@settings(max_examples=60, deadline=None, database=None)
def _sweep_instance(seed, n, dim, shift, m, S):
    rng = np.random.default_rng(seed)
    x = SampleDistribution(rng.normal(size=(n, dim)), "x")
    y = SampleDistribution(rng.normal(shift, size=(n + 3, dim)), "y")
    cfg = TestConfig(m=m, S=S, repeats=3, seed=seed, kernel=KernelConfig(sigma=float(rng.uniform(0.3, 3))))
    res = sensitivity_sweep(x, y, cfg, [0.10, 0.25, 0.50])
    again = sensitivity_sweep(x, y, cfg, [0.10, 0.25, 0.50])
    assert [r.to_json() for r in res] == [r.to_json() for r in again]
    for r in range(3):
        deltas = [res[k].deltas[r] for k in range(3)]
        ps = [res[k].p_values[r] for k in range(3)]
        assert deltas == sorted(deltas)
        assert ps == sorted(ps, reverse=True)
    SWEEP_INSTANCES.append(seed)


def test_c3_sensitivity_law(report):
    SWEEP_INSTANCES.clear()
    try:
        _sweep_instance()
        ok, detail = len(SWEEP_INSTANCES) >= 50, f"{len(SWEEP_INSTANCES)} instances"
    except AssertionError as exc:
        ok, detail = False, f"counterexample: {exc}"
    report("C3 sensitivity law", ok, detail)
    assert ok


def naive_mmd(x, y, sigma):
    def k(u, v):
        return math.exp(-math.fsum((a - b) ** 2 for a, b in zip(u, v)) / (2 * sigma * sigma))

    xx = math.fsum(k(a, b) for a in x for b in x) / len(x) ** 2
    yy = math.fsum(k(a, b) for a in y for b in y) / len(y) ** 2
    xy = math.fsum(k(a, b) for a in x for b in y) / (len(x) * len(y))
    return xx + yy - 2 * xy


def quantile_oracle(values, alpha):
    v = sorted(values)
    return next((val for k, val in enumerate(v, start=1) if k / len(v) >= alpha), v[-1])


def test_c4_estimator_oracles(report):
    rng = np.random.default_rng(2024)
    worst, problems = 0.0, []
    for i in range(200):
        dim = int(rng.integers(1, 8))
        x = rng.normal(size=(int(rng.integers(1, 21)), dim))
        y = rng.normal(rng.uniform(0, 1.5), size=(int(rng.integers(1, 21)), dim))
        sigma = float(rng.uniform(0.3, 4))
        a, b = mmd_pairwise(x, y, sigma), mmd_pairwise(y, x, sigma)
        ref = naive_mmd(x.tolist(), y.tolist(), sigma)
        rel = abs(a - ref) / abs(ref)
        worst = max(worst, rel)
        if rel > 1e-12 or a < 0 or abs(a - b) > 1e-12 * abs(a):
            problems.append(f"bag {i}: rel {rel:.2e}")
        if abs(mmd_pairwise(x, x, sigma)) > 1e-12:
            problems.append(f"bag {i}: identical bags nonzero")

    for i in range(10_000):
        size = int(rng.integers(1, 60))
        # small integer pool forces ties
        vals = rng.integers(0, 15, size=size).astype(float) if i % 2 else rng.normal(size=size)
        alpha = float(rng.choice([0.05, 0.1, 0.25, 0.5, 0.9])) if i % 3 == 0 else float(rng.uniform(0.001, 0.999))
        if quantile(vals, alpha) != quantile_oracle(vals.tolist(), alpha):
            problems.append(f"quantile case {i}")
        delta = float(rng.choice(vals)) if i % 2 else float(rng.normal())
        if p_value(vals, delta) != sum(1 for v in vals if v > delta) / size:
            problems.append(f"p_value case {i}")
    ok = not problems
    report("C4 estimator oracles", ok, f"worst MMD rel error {worst:.1e}; 10^4 quantile/p cases" + (f"; {problems[:5]}" if problems else ""))
    assert ok


def test_c5_movement_contract(report):
    es = make_set([20, 57, 9, 140, 33], seed=4)
    d = build_sample_distribution(es, SubsampleConfig(4, seed=9))
    size_ok = len(d) == 5 * 140 and d.dim == 12

    draws = np.random.default_rng(5).integers(0, len(d), size=10_000)
    counts = np.bincount(d.origin[draws], minlength=5)
    chi_p = chisquare(counts).pvalue

    rng = np.random.default_rng(6)
    exact = True
    for _ in range(200):
        w = rng.integers(-500, 500, size=(int(rng.integers(2, 10)), 3)).astype(float)
        off = rng.integers(-10**6, 10**6, size=3).astype(float)
        exact &= np.array_equal(normalize_trajectory(w), normalize_trajectory(w + off))
    shifted = EpisodeSet(tuple(Episode(e.episode_id, e.agent_id, e.coords + [7.0, -3.0, 1e5]) for e in es), es.agent_id)
    exact &= d.samples.tobytes() == build_sample_distribution(shifted, SubsampleConfig(4, seed=9)).samples.tobytes()

    ok = size_ok and chi_p > 1e-3 and exact
    report("C5 movement contract", ok, f"size {len(d)} (M*K=700), chi-square p {chi_p:.3f}, translation exact={exact}")
    assert ok


def test_c6_maze_generation(report):
    cfg_default = MazeConfig()
    M = cfg_default.spawn_points_per_segment
    connected = segs = tokens = enemies = enemy_cells = 0
    for seed in range(10_000):
        maze = generate_maze(MazeConfig(seed=seed))
        reach, cells = flood_fill(maze)
        connected += reach == cells
        segs += maze.n_segments
        tokens += len(maze.tokens)
        enemies += len(maze.enemies)
        enemy_cells += maze.n_segments * M - 1  # the start cell never spawns
    tok_f = tokens / segs
    p = cfg_default.p_enemy / M
    en_f = enemies / enemy_cells
    five_sigma = 5 * math.sqrt(p * (1 - p) / enemy_cells)
    ok = connected == 10_000 and abs(tok_f - 0.75) <= 0.02 and abs(en_f - p) <= five_sigma
    report("C6 maze generation", ok,
           f"connected {connected}/10000, token freq {tok_f:.4f}, enemy freq {en_f:.5f} vs {p:.5f} +- {five_sigma:.5f}")
    assert ok


def _median_p(ref, other, T, seed):
    sub = dict(horizon=T)
    x = build_sample_distribution(ref, SubsampleConfig(seed=derive_seed(seed, 0), **sub))
    y = build_sample_distribution(other, SubsampleConfig(seed=derive_seed(seed, 1), **sub))
    cfg = TestConfig(m=1000, S=1000, alpha=0.10, repeats=10, seed=derive_seed(seed, 2),
                     kernel=KernelConfig(bandwidth_seed=derive_seed(seed, 3)))
    return run_test(x, y, cfg).p_median


def test_c7_behavioural_ordering(report):
    greedy, _ = simulate("greedy", seed=100)
    greedy2, _ = simulate("greedy", seed=200)
    noisy, _ = simulate("noisy:0.2", seed=300)
    rand, _ = simulate("random", seed=400)
    ok, parts = True, []
    for T in (4, 8):
        same = _median_p(greedy, greedy2, T, seed=T)
        mid = _median_p(greedy, noisy, T, seed=T)
        far = _median_p(greedy, rand, T, seed=T)
        ok &= same > mid > far and far <= 0.01
        parts.append(f"T={T}: greedy' {100 * same:.1f}%, noisy:0.2 {100 * mid:.1f}%, random {100 * far:.1f}%")
    report("C7 behavioural ordering", ok, "; ".join(parts))
    assert ok


def test_c8_replay_determinism(report, tmp_path):
    def run(*argv):
        assert main([*argv, "--quiet"]) == 0

    g, r = tmp_path / "g.jsonl", tmp_path / "r.jsonl"
    run("simulate", "--episodes", "6", "--policy", "greedy", "--seed", "1", "--max-steps", "400", "--out", str(g))
    run("simulate", "--episodes", "6", "--policy", "random", "--seed", "2", "--max-steps", "400", "--out", str(r))
    res = tmp_path / "res.json"
    run("test", "--x", str(g), "--y", str(r), "--m", "50", "-S", "100", "-R", "4", "--alpha", "0.1", "--alpha", "0.5",
        "--out", str(res), "--workers", "1")
    met = tmp_path / "met.txt"
    run("metrics", "--log", str(g), "--events", str(tmp_path / "g.events.jsonl"), "--out", str(met))
    toy = tmp_path / "toy"
    run("toy", "--grid", "custom", "--alphas", "0.1", "0.5", "--epsilons", "0", "0.1", "--m", "20", "-S", "50",
        "-R", "3", "--n", "300", "--dim", "8", "--out", str(toy), "--workers", "1")

    outputs = {
        str(g.with_suffix(".jsonl.manifest.json")): [g, tmp_path / "g.events.jsonl"],
        str(res) + ".manifest.json": [res],
        str(met) + ".manifest.json": [met],
        str(toy / "manifest.json"): sorted(toy.glob("*.csv")) + sorted(toy.glob("hist_*.json")),
    }
    before = {p: p.read_bytes() for files in outputs.values() for p in files}
    mismatched = []
    for workers in ("1", "2"):
        for manifest, files in outputs.items():
            for p in files:
                p.unlink()
            assert main(["replay", manifest, "--quiet", "--workers", workers]) == 0
            mismatched += [f"{p.name} (workers={workers})" for p in files if p.read_bytes() != before[p]]
    ok = not mismatched
    report("C8 replay determinism", ok, f"{len(before)} files replayed at workers 1 and 2" + (f"; differ: {mismatched}" if mismatched else ""))
    assert ok
