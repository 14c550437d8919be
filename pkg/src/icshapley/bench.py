"""Experiment harness: seed selection, comparison centralities, ground-truth
management and the relative-error metric."""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .approx import SampleBudget, approx_rr_set
from .exact import (
    BRUTEFORCE_MAX_EDGES,
    BRUTEFORCE_MAX_SEEDS,
    ShapleyReport,
    exact_single_step,
    shapley_bruteforce,
)
from .graph import DirectedGraph, GraphError, SeedSet, TerminationPolicy

GROUND_TRUTH_EPSILON = 0.01
GROUND_TRUTH_ELL = 1.0


@dataclass(frozen=True)
class SeedStrategy:
    """How to pick the seed set: by out-degree, by greedy influence
    maximization over sampled reverse-reachable sets, or from a file."""

    kind: str  # "top-out-degree" | "greedy-im" | "explicit-file"
    k: Optional[int] = None
    rr_budget: Optional[int] = None
    path: Optional[str] = None

    @classmethod
    def top_out_degree(cls, k: int) -> "SeedStrategy":
        if k < 1:
            raise GraphError("k must be >= 1")
        return cls("top-out-degree", k=int(k))

    @classmethod
    def greedy_im(cls, k: int, rr_budget: int) -> "SeedStrategy":
        if k < 1:
            raise GraphError("k must be >= 1")
        if rr_budget < 1:
            raise GraphError("rr_budget must be >= 1")
        return cls("greedy-im", k=int(k), rr_budget=int(rr_budget))

    @classmethod
    def explicit_file(cls, path) -> "SeedStrategy":
        return cls("explicit-file", path=str(path))

    @classmethod
    def parse(cls, text: str) -> "SeedStrategy":
        """Parse 'top-degree:<k>' or 'greedy-im:<k>:<rr_budget>'."""
        parts = text.strip().split(":")
        if parts[0] in ("top-degree", "top-out-degree") and len(parts) == 2:
            return cls.top_out_degree(int(parts[1]))
        if parts[0] == "greedy-im" and len(parts) == 3:
            return cls.greedy_im(int(parts[1]), int(parts[2]))
        raise GraphError(
            f"bad seed strategy {text!r}; expected top-degree:<k> or greedy-im:<k>:<budget>"
        )


@dataclass
class ErrorSummary:
    """Mean relative deviation of an estimate from a ground-truth report."""

    avg_relative_error: float
    per_seed_errors: dict[int, float]
    ground_truth_source: str
    excluded_zero_truth: int = 0


def load_seed_file(path, graph: DirectedGraph) -> SeedSet:
    """Read one node label per line; blank lines and '#' comments ignored."""
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                labels.append(line)
    if not labels:
        raise GraphError(f"{path}: no seeds found")
    return SeedSet.from_labels(labels, graph)


def _reverse_reachable_nodes(graph: DirectedGraph, root: int, rng: np.random.Generator) -> set[int]:
    # Lazy reverse walk over the unmodified graph; includes the root.
    visited = {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w, p in graph.in_edges(v):
            if w not in visited and rng.random() < p:
                visited.add(w)
                queue.append(w)
    return visited


def select_seeds(
    graph: DirectedGraph,
    strategy: SeedStrategy,
    rng: Optional[np.random.Generator] = None,
) -> SeedSet:
    """Materialize a seed strategy into an ordered seed set.

    Top-out-degree ranks nodes by out-degree with ties broken by ascending
    node id.  Greedy IM draws ``rr_budget`` reverse-reachable sets rooted
    uniformly over all nodes and repeatedly takes the node covering the
    most still-uncovered sets (ties again by ascending id); the returned
    order is the selection order.
    """
    if strategy.kind == "explicit-file":
        return load_seed_file(strategy.path, graph)
    k = int(strategy.k or 0)
    if k > graph.node_count:
        raise GraphError(f"k={k} exceeds the node count {graph.node_count}")

    if strategy.kind == "top-out-degree":
        outdeg = np.diff(graph.out_indptr)
        order = np.lexsort((np.arange(graph.node_count), -outdeg))
        return SeedSet(order[:k].tolist(), graph)

    if strategy.kind == "greedy-im":
        if rng is None:
            raise GraphError("greedy-im seed selection needs an rng")
        rr_sets = []
        for _ in range(int(strategy.rr_budget)):
            root = int(rng.integers(graph.node_count))
            rr_sets.append(_reverse_reachable_nodes(graph, root, rng))
        counts = np.zeros(graph.node_count, dtype=np.int64)
        for rr in rr_sets:
            for v in rr:
                counts[v] += 1
        alive = [True] * len(rr_sets)
        picked: list[int] = []
        for _ in range(k):
            best = int(np.argmax(counts))  # argmax takes the lowest id on ties
            picked.append(best)
            for i, rr in enumerate(rr_sets):
                if alive[i] and best in rr:
                    alive[i] = False
                    for v in rr:
                        counts[v] -= 1
        return SeedSet(picked, graph)

    raise GraphError(f"unknown seed strategy {strategy.kind!r}")


def pagerank(graph: DirectedGraph, damping: float = 0.85, iters: int = 100) -> dict[int, float]:
    """Power-iteration PageRank; dangling mass is redistributed uniformly.

    Scores sum to 1.  Edge probabilities are ignored: the walk follows the
    topology with uniform transition over out-edges.
    """
    if not (0.0 < damping < 1.0):
        raise GraphError("damping must be in (0, 1)")
    n = graph.node_count
    if n == 0:
        return {}
    outdeg = np.diff(graph.out_indptr).astype(np.float64)
    dangling = outdeg == 0
    src, dst = graph.edge_src, graph.edge_dst
    inv_out = np.zeros(n)
    nz = ~dangling
    inv_out[nz] = 1.0 / outdeg[nz]
    v = np.full(n, 1.0 / n)
    for _ in range(int(iters)):
        contrib = np.bincount(dst, weights=v[src] * inv_out[src], minlength=n)
        loose = float(v[dangling].sum())
        v = damping * (contrib + loose / n) + (1.0 - damping) / n
    return {i: float(v[i]) for i in range(n)}


def average_relative_error(estimate: ShapleyReport, truth: ShapleyReport) -> ErrorSummary:
    """Mean over seeds of |estimated - true| / true.

    Requires identical seed sets.  Seeds whose true value is exactly zero
    cannot be scored by a relative metric; they are excluded and counted in
    ``excluded_zero_truth``.
    """
    if set(estimate.values) != set(truth.values):
        raise GraphError("estimate and truth cover different seed sets")
    per_seed: dict[int, float] = {}
    excluded = 0
    for t, true_val in truth.values.items():
        if true_val == 0.0:
            excluded += 1
            continue
        per_seed[t] = abs(estimate.values[t] - true_val) / true_val
    avg = float(np.mean(list(per_seed.values()))) if per_seed else 0.0
    return ErrorSummary(
        avg_relative_error=avg,
        per_seed_errors=per_seed,
        ground_truth_source=truth.algorithm,
        excluded_zero_truth=excluded,
    )


def graph_fingerprint(graph: DirectedGraph) -> str:
    h = hashlib.sha256()
    h.update(str(graph.node_count).encode())
    h.update(graph.edge_src.tobytes())
    h.update(graph.edge_dst.tobytes())
    h.update(graph.edge_prob.tobytes())
    h.update("\x00".join(graph.labels).encode())
    return h.hexdigest()


def _truth_cache_key(graph, seeds, policy, source: str) -> str:
    h = hashlib.sha256()
    h.update(graph_fingerprint(graph).encode())
    h.update(repr(tuple(seeds.ids)).encode())
    h.update(policy.label().encode())
    h.update(source.encode())
    return h.hexdigest()[:32]


def make_ground_truth(
    graph: DirectedGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
    rng: np.random.Generator,
    cache_dir=None,
    workers: int = 1,
) -> ShapleyReport:
    """Best available ground truth for the instance.

    Exact single-step values whenever the policy allows; the exact
    live-edge enumeration oracle on tiny multi-step instances; otherwise
    the reverse-reachable estimator with high-accuracy parameters
    (epsilon=0.01, ell=1, k=1) and no cost ceiling, tagged as approximate.
    Reports are cached as JSON keyed by (graph, seeds, policy, source).
    """
    if policy.kind == TerminationPolicy.SINGLE:
        source = "exact-single-step"
    elif len(seeds) <= BRUTEFORCE_MAX_SEEDS and graph.edge_count <= BRUTEFORCE_MAX_EDGES:
        source = "exact-live-edge-enumeration"
    else:
        source = "approx-rr-set"

    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"truth-{_truth_cache_key(graph, seeds, policy, source)}.json"
        if cache_path.exists():
            with open(cache_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            return ShapleyReport(
                values={int(k): float(v) for k, v in doc["values"].items()},
                algorithm=doc["algorithm"],
                params=doc["params"],
                elapsed=0.0,
            )

    if source == "exact-single-step":
        report = exact_single_step(graph, seeds)
        report.algorithm = source
    elif source == "exact-live-edge-enumeration":
        report = shapley_bruteforce(graph, seeds, policy, value_mode="exact")
        report.algorithm = source
    else:
        budget = SampleBudget.guarantee(
            GROUND_TRUTH_EPSILON, ell=GROUND_TRUTH_ELL, k=1,
        )
        report = approx_rr_set(
            graph, seeds, policy, budget, rng, workers=workers, max_samples=None,
        )
        report.algorithm = source
    report.params = dict(report.params)
    report.params["ground_truth_source"] = source

    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        with open(cache_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "algorithm": report.algorithm,
                    "params": report.params,
                    "values": {str(t): report.values[t] for t in report.values},
                },
                fh,
            )
    return report
