"""Sampling estimators for multi-step and complete termination.

Three unbiased estimators of the same Shapley values, with very different
cost profiles:

* ``approx_permute_mc``    - permutation walks with nested Monte-Carlo value
  estimation; the baseline, quadratically redundant but simple.
* ``approx_live_edge``     - samples whole live-edge realizations once and
  splits each activated node's unit of credit equally among the seeds able
  to reach it in that realization.
* ``approx_rr_set``        - reverse-reachable sampling from random non-seed
  roots; scales to large graphs and supports an adaptive sample-size bound
  driven by a lower bound on the k-th largest Shapley value.

Sample sizes come either from explicit counts or from the conservative
high-probability guarantee formulas; guarantee mode refuses to run past a
configurable cost ceiling because those bounds grow with |V|^2 / eps^2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .exact import ShapleyReport
from .graph import (
    DirectedGraph,
    GraphError,
    SeedSet,
    TerminationPolicy,
    remove_seed_in_edges,
)
from .parallel import run_chunks
from .rng import stream_base

DEFAULT_SAMPLE_CEILING = 100_000_000


class BudgetCeilingError(RuntimeError):
    """Guarantee-mode sample counts exceed the configured cost ceiling."""


@dataclass(frozen=True)
class SampleBudget:
    """Either explicit sample counts or guarantee parameters.

    Explicit counts mean: (n_permutations, n_mc) for the permutation
    estimator, (n_samples,) for live-edge, (theta,) for RR sets.  Guarantee
    mode carries (epsilon, delta) for the additive-error estimators and
    (epsilon, ell, k) for the RR estimator.
    """

    mode: str  # "explicit" | "guarantee"
    counts: tuple[int, ...] = ()
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    ell: Optional[float] = None
    k: Optional[int] = None

    @classmethod
    def explicit(cls, *counts: int) -> "SampleBudget":
        counts = tuple(int(c) for c in counts)
        if not counts or any(c < 1 for c in counts):
            raise GraphError("explicit budget needs counts >= 1")
        return cls("explicit", counts)

    @classmethod
    def guarantee(
        cls,
        epsilon: float,
        delta: Optional[float] = None,
        ell: Optional[float] = None,
        k: Optional[int] = None,
    ) -> "SampleBudget":
        if epsilon <= 0:
            raise GraphError("epsilon must be positive")
        if delta is not None and not (0.0 < delta < 1.0):
            raise GraphError("delta must be in (0, 1)")
        if ell is not None and ell <= 0:
            raise GraphError("ell must be positive")
        if k is not None and k < 1:
            raise GraphError("k must be >= 1")
        return cls("guarantee", (), float(epsilon), delta, ell, k)


@dataclass
class EstimatorAccumulator:
    """Mergeable per-seed credit sums; merging equals pooling the samples."""

    credits: dict[int, float]
    sample_count: int

    @classmethod
    def zero(cls, seeds: SeedSet) -> "EstimatorAccumulator":
        return cls({t: 0.0 for t in seeds}, 0)

    @classmethod
    def from_arrays(cls, seeds: SeedSet, credits: np.ndarray, sample_count: int) -> "EstimatorAccumulator":
        return cls({t: float(credits[i]) for i, t in enumerate(seeds)}, int(sample_count))

    def merge(self, other: "EstimatorAccumulator") -> "EstimatorAccumulator":
        if set(self.credits) != set(other.credits):
            raise GraphError("accumulators cover different seed sets")
        return EstimatorAccumulator(
            {t: self.credits[t] + other.credits[t] for t in self.credits},
            self.sample_count + other.sample_count,
        )

    def add_rr_sample(self, sample: "RRSample") -> None:
        if sample.seed_hits:
            share = 1.0 / len(sample.seed_hits)
            for t in sample.seed_hits:
                self.credits[t] += share
        self.sample_count += 1


@dataclass(frozen=True)
class RRSample:
    """One reverse-reachable draw: the root and the seeds that reach it."""

    root: int
    seed_hits: frozenset[int]


def _check_ceiling(kind: str, cost: int, max_samples: Optional[int], detail: str) -> None:
    if max_samples is not None and cost > max_samples:
        raise BudgetCeilingError(
            f"{kind}: guarantee-mode budget of {detail} ({cost:,} samples) exceeds "
            f"the ceiling of {max_samples:,}; pass an explicit budget or raise "
            f"max_samples"
        )


# -- permutation Monte Carlo -------------------------------------------------


def permute_mc_sample_sizes(
    node_count: int, seed_count: int, epsilon: float, delta: float,
) -> tuple[int, int]:
    """Conservative (n_permutations, n_mc) for an (epsilon, delta) guarantee."""
    n_pi = math.ceil(8.0 * node_count**2 / epsilon**2 * math.log(4.0 * seed_count / delta))
    n_mc = math.ceil(8.0 * node_count**2 / epsilon**2 * math.log(4.0 * n_pi * seed_count / delta))
    return n_pi, n_mc


def approx_permute_mc(
    graph: DirectedGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
    budget: SampleBudget,
    rng: np.random.Generator,
    workers: int = 1,
    max_samples: Optional[int] = DEFAULT_SAMPLE_CEILING,
) -> ShapleyReport:
    """Baseline estimator: sampled permutations, Monte-Carlo marginals.

    For each sampled seed ordering the marginal contribution of every seed
    is the difference of two independently estimated prefix values, each
    averaged over ``n_mc`` cascades.  Both endpoints of the difference are
    re-estimated from scratch, as the cost model expects.
    """
    t0 = time.perf_counter()
    if budget.mode == "explicit":
        if len(budget.counts) != 2:
            raise GraphError("permute-mc needs an explicit budget (n_permutations, n_mc)")
        n_pi, n_mc = budget.counts
    else:
        if budget.delta is None:
            raise GraphError("permute-mc guarantee budget needs epsilon and delta")
        n_pi, n_mc = permute_mc_sample_sizes(
            graph.node_count, len(seeds), budget.epsilon, budget.delta,
        )
        _check_ceiling(
            "permute-mc", 2 * n_pi * len(seeds) * n_mc, max_samples,
            f"n_permutations={n_pi:,}, n_mc={n_mc:,}",
        )

    seed_ids = np.array(list(seeds), dtype=np.int64)
    blocked = seeds.mask(graph.node_count)
    bound = policy.step_bound(graph.node_count, len(seeds))
    base = stream_base(rng)

    def task(start: int, stop: int) -> np.ndarray:
        return _kernels.permute_mc_batch(
            graph.out_indptr, graph.out_dst, graph.out_prob,
            seed_ids, blocked, bound, n_mc, base, start, stop,
        )

    partials = run_chunks(task, n_pi, workers=workers, chunk=64)
    est = np.zeros(len(seeds), dtype=np.float64)
    for p in partials:
        est += p
    values = {t: float(est[i] / n_pi) for i, t in enumerate(seeds)}
    return ShapleyReport(
        values=values,
        algorithm="permute-mc",
        params={
            "policy": policy.label(), "n_permutations": int(n_pi), "n_mc": int(n_mc),
            "budget_mode": budget.mode,
        },
        elapsed=time.perf_counter() - t0,
    )


# -- live-edge credit splitting ----------------------------------------------


def live_edge_sample_size(node_count: int, seed_count: int, epsilon: float, delta: float) -> int:
    """Samples needed for a uniform additive (epsilon, delta) guarantee."""
    return math.ceil(node_count**2 / (2.0 * epsilon**2) * math.log(2.0 * seed_count / delta))


def approx_live_edge(
    graph: DirectedGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
    budget: SampleBudget,
    rng: np.random.Generator,
    workers: int = 1,
    max_samples: Optional[int] = DEFAULT_SAMPLE_CEILING,
) -> ShapleyReport:
    """Credit-splitting estimator over sampled live-edge realizations.

    Each sample draws one realization of the seed-in-edge-removed graph,
    finds for every non-seed node the set of seeds that reach it within
    the policy's step bound, and awards 1/|set| to each member.  The
    per-sample credit of a seed is an unbiased draw of its Shapley value.
    """
    t0 = time.perf_counter()
    if budget.mode == "explicit":
        if len(budget.counts) != 1:
            raise GraphError("live-edge needs an explicit budget (n_samples,)")
        n = budget.counts[0]
    else:
        if budget.delta is None:
            raise GraphError("live-edge guarantee budget needs epsilon and delta")
        n = live_edge_sample_size(graph.node_count, len(seeds), budget.epsilon, budget.delta)
        _check_ceiling("live-edge", n, max_samples, f"n_samples={n:,}")

    gp = remove_seed_in_edges(graph, seeds)
    seed_ids = np.array(list(seeds), dtype=np.int64)
    bound = policy.step_bound(graph.node_count, len(seeds))
    base = stream_base(rng)

    def task(start: int, stop: int) -> EstimatorAccumulator:
        credits = _kernels.live_edge_credits(
            gp.out_indptr, gp.out_dst, gp.out_prob, seed_ids, bound, base, start, stop,
        )
        return EstimatorAccumulator.from_arrays(seeds, credits, stop - start)

    acc = EstimatorAccumulator.zero(seeds)
    for part in run_chunks(task, n, workers=workers, chunk=4096):
        acc = acc.merge(part)
    values = {t: acc.credits[t] / n for t in seeds}
    return ShapleyReport(
        values=values,
        algorithm="live-edge",
        params={"policy": policy.label(), "n_samples": int(n), "budget_mode": budget.mode},
        elapsed=time.perf_counter() - t0,
    )


# -- reverse-reachable sets ----------------------------------------------------


def sample_rr_set(
    g_prime: DirectedGraph,
    seeds: SeedSet,
    root: int,
    rng: np.random.Generator,
    depth_bound: Optional[int] = None,
) -> RRSample:
    """Draw one reverse-reachable set from ``root`` on the modified graph.

    Walks in-edges backwards breadth-first, drawing each edge's live state
    the first time it is traversed (the full realization is never
    materialized).  Seeds encountered within ``depth_bound`` reverse hops
    are collected; the walk never continues through a seed because the
    modified graph has no edges into seeds.
    """
    root = int(root)
    if root in seeds:
        raise GraphError(f"root {root} is a seed")
    bound = depth_bound if depth_bound is not None else g_prime.node_count
    visited = {root}
    frontier = [root]
    hits: set[int] = set()
    depth = 0
    while frontier and depth < bound:
        depth += 1
        nxt: list[int] = []
        for v in frontier:
            for w, p in g_prime.in_edges(v):
                if w in visited:
                    continue
                if rng.random() < p:
                    visited.add(w)
                    if w in seeds:
                        hits.add(w)
                    else:
                        nxt.append(w)
        frontier = nxt
    return RRSample(root, frozenset(hits))


def _rr_arrays(graph: DirectedGraph, seeds: SeedSet):
    gp = remove_seed_in_edges(graph, seeds)
    seed_slot = np.full(graph.node_count, -1, dtype=np.int64)
    for i, t in enumerate(seeds):
        seed_slot[t] = i
    nonseed = np.array(
        [v for v in range(graph.node_count)
         if seed_slot[v] < 0 and v not in graph.removed_nodes],
        dtype=np.int64,
    )
    return gp, seed_slot, nonseed


def rr_theta(n_prime: int, seed_count: int, epsilon: float, ell: float, lb: float) -> int:
    """RR sets needed once a lower bound on the k-th largest value is known."""
    return math.ceil(
        n_prime * (2.0 + 2.0 / 3.0 * epsilon) / (epsilon**2 * lb)
        * (ell * math.log(n_prime) + math.log(seed_count) + math.log(4.0))
    )


def estimate_threshold(
    g_prime: DirectedGraph,
    seeds: SeedSet,
    epsilon: float,
    ell: float,
    k: int,
    rng: np.random.Generator,
    depth_bound: Optional[int] = None,
    workers: int = 1,
    max_samples: Optional[int] = None,
) -> float:
    """Adaptive lower bound on the k-th largest Shapley value.

    Halves a guess x_i = n'/2^i each round, growing one shared pool of RR
    samples to the round's required size, and stops as soon as the k-th
    largest scaled credit clears (1 + eps') x_i, returning that credit
    deflated by (1 + eps').  Falls back to 1 if no round triggers, which
    keeps the final sample count finite.  Rounds are sequential; sampling
    within a round is chunked.
    """
    if k < 1 or k > len(seeds):
        raise GraphError("k must be in [1, seed_count]")
    gp, seed_slot, nonseed = _rr_arrays(g_prime, seeds)  # removal is idempotent
    n_prime = int(nonseed.shape[0])
    if n_prime < 4:
        raise GraphError("need at least 4 non-seed nodes")
    eps2 = math.sqrt(2.0) * epsilon
    log_rounds = int(math.floor(math.log2(n_prime)))
    bound = depth_bound if depth_bound is not None else g_prime.node_count
    base = stream_base(rng)

    def task(start: int, stop: int) -> np.ndarray:
        return _kernels.rr_credits(
            gp.in_indptr, gp.in_src, gp.in_prob, seed_slot, nonseed,
            bound, base, start, stop,
        )

    est = np.zeros(len(seeds), dtype=np.float64)
    theta_prev = 0
    for i in range(1, log_rounds):
        x_i = n_prime / 2.0**i
        theta_i = math.ceil(
            n_prime * (2.0 + 2.0 / 3.0 * eps2) / (eps2**2 * x_i)
            * (ell * math.log(n_prime) + math.log(len(seeds))
               + math.log(math.log2(n_prime)) + math.log(2.0))
        )
        _check_ceiling("estimate-threshold", theta_i, max_samples, f"theta_{i}={theta_i:,}")
        offset = theta_prev

        for part in run_chunks(lambda a, b: task(offset + a, offset + b),
                               theta_i - theta_prev, workers=workers, chunk=65536):
            est += part
        theta_prev = theta_i
        est_k = float(np.partition(est, len(seeds) - k)[len(seeds) - k])
        if n_prime * est_k / theta_i >= (1.0 + eps2) * x_i:
            return n_prime * est_k / (theta_i * (1.0 + eps2))
    return 1.0


def approx_rr_set(
    graph: DirectedGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
    budget: SampleBudget,
    rng: np.random.Generator,
    workers: int = 1,
    max_samples: Optional[int] = DEFAULT_SAMPLE_CEILING,
) -> ShapleyReport:
    """Reverse-reachable estimator.

    Phase 0 removes all edges into seeds; phase 1 (guarantee mode only)
    derives the number of RR sets from the adaptive lower bound; phase 2
    draws the RR sets fresh, credits each hit seed 1/|hits| per sample and
    scales by n'/theta.  Multi-step policies bound the reverse walk by the
    policy's step count.
    """
    t0 = time.perf_counter()
    gp, seed_slot, nonseed = _rr_arrays(graph, seeds)
    n_prime = int(nonseed.shape[0])
    if n_prime == 0:
        raise GraphError("graph has no non-seed nodes")
    # A live path from a seed to the root visits only distinct non-seeds, so
    # the complete-termination bound |V| - |T| also caps reverse walks.
    bound = policy.step_bound(graph.node_count, len(seeds))

    lb = None
    if budget.mode == "explicit":
        if len(budget.counts) != 1:
            raise GraphError("rr-set needs an explicit budget (theta,)")
        theta = budget.counts[0]
    else:
        if budget.ell is None or budget.k is None:
            raise GraphError("rr-set guarantee budget needs epsilon, ell and k")
        if budget.k > len(seeds):
            raise GraphError("k cannot exceed the seed count")
        lb = estimate_threshold(
            gp, seeds, budget.epsilon, budget.ell, budget.k, rng,
            depth_bound=bound, workers=workers, max_samples=max_samples,
        )
        theta = rr_theta(n_prime, len(seeds), budget.epsilon, budget.ell, lb)
        _check_ceiling("rr-set", theta, max_samples, f"theta={theta:,}")

    base = stream_base(rng)  # phase-1 samples are discarded; fresh stream

    def task(start: int, stop: int) -> EstimatorAccumulator:
        credits = _kernels.rr_credits(
            gp.in_indptr, gp.in_src, gp.in_prob, seed_slot, nonseed,
            bound, base, start, stop,
        )
        return EstimatorAccumulator.from_arrays(seeds, credits, stop - start)

    acc = EstimatorAccumulator.zero(seeds)
    for part in run_chunks(task, theta, workers=workers, chunk=65536):
        acc = acc.merge(part)
    values = {t: n_prime * acc.credits[t] / theta for t in seeds}
    params: dict = {
        "policy": policy.label(), "theta": int(theta), "n_prime": n_prime,
        "budget_mode": budget.mode,
    }
    if budget.mode == "guarantee":
        params.update(
            epsilon=budget.epsilon, ell=budget.ell, k=budget.k, lower_bound=lb,
        )
    return ShapleyReport(
        values=values,
        algorithm="rr-set",
        params=params,
        elapsed=time.perf_counter() - t0,
    )
