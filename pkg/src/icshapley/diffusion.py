"""Forward independent-cascade simulation and value-function estimation.

The value of a coalition S of seeds is the expected number of non-seed
nodes active when diffusion started from S stops, with seeds outside S
deleted from the graph.  ``estimate_value`` measures it by Monte Carlo;
``exact_value_single_step`` evaluates the one-step case in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .graph import DirectedGraph, GraphError, LiveEdgeGraph, SeedSet, TerminationPolicy
from .parallel import run_chunks
from .rng import stream_base


@dataclass(frozen=True)
class CascadeResult:
    """Non-seed nodes activated by one simulated cascade."""

    activated: frozenset[int]
    steps_taken: int


def simulate_cascade(
    graph: DirectedGraph,
    active_seeds: Iterable[int],
    policy: TerminationPolicy,
    rng: np.random.Generator,
) -> CascadeResult:
    """Run one cascade from the given initially-active nodes.

    Each newly-activated node gets a single chance to activate each of its
    currently inactive out-neighbors, attempted in adjacency order so a
    fixed rng state reproduces the realization.  The caller is responsible
    for passing the coalition-restricted graph (see ``coalition_subgraph``);
    initially-active nodes are never reported as activated.
    """
    init = [int(v) for v in active_seeds]
    if not init:
        raise GraphError("active_seeds must be non-empty")
    bound = policy.step_bound(graph.node_count, len(init))
    active = set(init)
    frontier = init
    activated: set[int] = set()
    steps_taken = 0
    depth = 0
    while frontier and depth < bound:
        depth += 1
        nxt: list[int] = []
        for u in frontier:
            for v, p in graph.out_edges(u):
                if v in active:
                    continue
                if rng.random() < p:
                    active.add(v)
                    nxt.append(v)
        if nxt:
            steps_taken = depth
        frontier = nxt
        activated.update(nxt)
    return CascadeResult(frozenset(activated), steps_taken)


def estimate_value(
    graph: DirectedGraph,
    seeds: SeedSet,
    coalition: Iterable[int],
    policy: TerminationPolicy,
    n_samples: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> float:
    """Monte-Carlo estimate of the coalition's value.

    Averages the non-seed activation count of ``n_samples`` independent
    cascades started from the coalition.  Seeds can never be re-activated,
    which makes a cascade on the full graph equivalent in distribution to
    one on the coalition subgraph; the empty coalition is exactly 0.
    """
    coalition = [int(v) for v in coalition]
    extra = set(coalition) - set(seeds.ids)
    if extra:
        raise GraphError(f"coalition contains non-seed nodes {sorted(extra)}")
    if not coalition:
        return 0.0
    if n_samples < 1:
        raise GraphError("n_samples must be >= 1")
    init = np.array(coalition, dtype=np.int64)
    blocked = seeds.mask(graph.node_count)
    bound = policy.step_bound(graph.node_count, len(seeds))
    base = stream_base(rng)

    def task(start: int, stop: int) -> float:
        counts = np.empty(stop - start, dtype=np.int64)
        _kernels.cascade_counts(
            graph.out_indptr, graph.out_dst, graph.out_prob,
            init, blocked, bound, base, start, stop, counts,
        )
        return float(counts.sum())

    partials = run_chunks(task, int(n_samples), workers=workers)
    return sum(partials) / float(n_samples)


def exact_value_single_step(
    graph: DirectedGraph,
    seeds: SeedSet,
    coalition: Iterable[int],
) -> float:
    """Closed-form one-step value: sum over non-seed out-neighbors u of the
    coalition of [1 - prod over coalition in-neighbors w of (1 - p(w, u))]."""
    coalition = set(int(v) for v in coalition)
    extra = coalition - set(seeds.ids)
    if extra:
        raise GraphError(f"coalition contains non-seed nodes {sorted(extra)}")
    survive: dict[int, float] = {}
    for s in coalition:
        for v, p in graph.out_edges(s):
            if v in seeds:
                continue
            survive[v] = survive.get(v, 1.0) * (1.0 - p)
    return float(sum(1.0 - q for q in survive.values()))


def multi_source_reach(
    live: LiveEdgeGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
) -> dict[int, set[int]]:
    """Which seeds reach each non-seed node in a live-edge realization.

    Per seed, a breadth-first search over kept edges bounded by the
    policy's step count.  Kept edges pointing into any seed are ignored:
    distances are measured in the graph with seed in-edges absent, so one
    reachability map is consistent with every coalition subgraph at once.
    Returns a map with an entry (possibly empty) for every non-seed node.
    """
    g = live.source
    indptr, dsts = live.kept_out_adjacency()
    bound = policy.step_bound(g.node_count, len(seeds))
    reach: dict[int, set[int]] = {
        v: set() for v in range(g.node_count)
        if v not in seeds and v not in g.removed_nodes
    }
    for t in seeds:
        visited = {t}
        frontier = [t]
        depth = 0
        while frontier and depth < bound:
            depth += 1
            nxt: list[int] = []
            for u in frontier:
                for i in range(indptr[u], indptr[u + 1]):
                    v = int(dsts[i])
                    if v in visited or v in seeds:
                        continue
                    visited.add(v)
                    nxt.append(v)
                    if v in reach:
                        reach[v].add(t)
            frontier = nxt
    return reach
