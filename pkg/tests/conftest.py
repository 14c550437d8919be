"""Shared fixtures and statistical helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import icshapley as ic


@pytest.fixture
def diamond():
    """Six-node example: two seeds feeding a small mesh, all probs 0.5.

    Hand-checked values: U({t1}) = 1.0 and U({t1, t2}) = 1.5 under
    single-step termination, so both seeds get Shapley value 0.75.
    """
    edges = [
        ("t1", "a"), ("t1", "b"), ("t2", "a"), ("t2", "b"),
        ("a", "b"), ("a", "c"), ("b", "c"), ("b", "d"), ("c", "d"),
    ]
    labels = ["t1", "t2", "a", "b", "c", "d"]
    idx = {lab: i for i, lab in enumerate(labels)}
    g = ic.graph_from_edges(
        [(idx[u], idx[v], 0.5) for u, v in edges],
        node_count=6,
        labels=labels,
    )
    seeds = ic.SeedSet([idx["t1"], idx["t2"]], g)
    return g, seeds


def write_diamond_edge_list(path):
    lines = [
        "# two seeds feeding a small mesh",
        "t1 a 0.5", "t1 b 0.5", "t2 a 0.5", "t2 b 0.5",
        "a b 0.5", "a c 0.5", "b c 0.5", "b d 0.5", "c d 0.5",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def random_graph(
    rng: np.random.Generator,
    max_nodes: int = 30,
    max_seeds: int = 10,
    avg_degree: float = 2.5,
    min_nodes: int = 4,
) -> tuple[ic.DirectedGraph, ic.SeedSet]:
    """Random instance for property sweeps; seeds are a random subset."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    max_edges = n * (n - 1)
    m = int(min(max_edges, max(1, rng.poisson(avg_degree * n))))
    codes = rng.choice(max_edges, size=m, replace=False)
    src = codes // (n - 1)
    rem = codes % (n - 1)
    dst = np.where(rem < src, rem, rem + 1)
    prob = rng.uniform(0.05, 1.0, size=m)
    g = ic.DirectedGraph(n, src, dst, prob)
    t_count = int(rng.integers(1, min(max_seeds, n - 1) + 1))
    seed_ids = rng.choice(n, size=t_count, replace=False)
    return g, ic.SeedSet(seed_ids.tolist(), g)


def sparse_multi_step_instance(
    rng: np.random.Generator,
    max_nodes: int = 10,
    max_seeds: int = 3,
    max_edges: int = 20,
) -> tuple[ic.DirectedGraph, ic.SeedSet]:
    """Tiny instance within the exact live-edge enumeration guard."""
    n = int(rng.integers(5, max_nodes + 1))
    m = int(rng.integers(n, max_edges + 1))
    codes = rng.choice(n * (n - 1), size=min(m, n * (n - 1)), replace=False)
    src = codes // (n - 1)
    rem = codes % (n - 1)
    dst = np.where(rem < src, rem, rem + 1)
    prob = rng.uniform(0.2, 0.9, size=len(codes))
    g = ic.DirectedGraph(n, src, dst, prob)
    t_count = int(rng.integers(1, max_seeds + 1))
    seed_ids = rng.choice(n, size=t_count, replace=False)
    return g, ic.SeedSet(seed_ids.tolist(), g)


def batch_mean_se(run_batch, n_batches: int, seeds: ic.SeedSet):
    """Mean and standard error per seed from independent equal-size batches.

    ``run_batch(i)`` must return a per-seed value dict from batch i.  All
    estimators here are plain sample averages, so the pooled mean equals
    the mean of batch means and the SE follows from the batch spread.
    """
    samples = {t: [] for t in seeds}
    for i in range(n_batches):
        vals = run_batch(i)
        for t in seeds:
            samples[t].append(vals[t])
    mean = {t: float(np.mean(samples[t])) for t in seeds}
    se = {
        t: float(np.std(samples[t], ddof=1) / np.sqrt(n_batches))
        for t in seeds
    }
    return mean, se


def assert_within_3se(mean, se, truth, seeds, context="", atol=1e-9):
    for t in seeds:
        bound = 3.0 * se[t] + atol
        assert abs(mean[t] - truth[t]) <= bound, (
            f"{context}: seed {t} estimate {mean[t]:.6f} vs truth {truth[t]:.6f} "
            f"outside 3 SE ({bound:.6f})"
        )
