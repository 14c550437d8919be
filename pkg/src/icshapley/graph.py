"""Directed graphs with per-edge activation probabilities.

Nodes carry dense integer ids ``0..node_count-1``; the original file labels
are retained so reports can be written back in the caller's vocabulary.
Graphs are immutable after construction: subgraph operations return new
objects and never touch their input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class GraphError(ValueError):
    """Malformed graph input: parse errors and invariant violations."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class DirectedGraph:
    """Immutable directed graph; every edge has a probability in (0, 1].

    Edges are kept as flat arrays sorted by ``(src, dst)`` plus CSR-style
    adjacency in both directions.  ``removed_nodes`` records nodes logically
    deleted by subgraph operations; their ids stay reserved so reports and
    seed sets remain stable.
    """

    __slots__ = (
        "node_count", "edge_src", "edge_dst", "edge_prob",
        "out_indptr", "out_dst", "out_prob",
        "in_indptr", "in_src", "in_prob",
        "labels", "_label_to_id", "removed_nodes",
    )

    def __init__(
        self,
        node_count: int,
        src: np.ndarray,
        dst: np.ndarray,
        prob: np.ndarray,
        labels: Optional[Sequence[str]] = None,
        removed_nodes: frozenset[int] = frozenset(),
    ):
        node_count = int(node_count)
        if node_count < 0:
            raise GraphError("node_count must be non-negative")
        src = np.ascontiguousarray(src, dtype=np.int64)
        dst = np.ascontiguousarray(dst, dtype=np.int64)
        prob = np.ascontiguousarray(prob, dtype=np.float64)
        if not (src.shape == dst.shape == prob.shape):
            raise GraphError("edge arrays must have equal length")
        m = src.shape[0]
        if m:
            if src.min(initial=0) < 0 or dst.min(initial=0) < 0 \
                    or src.max(initial=-1) >= node_count or dst.max(initial=-1) >= node_count:
                raise GraphError("edge endpoint out of range")
            if np.any(src == dst):
                bad = int(src[np.argmax(src == dst)])
                raise GraphError(f"self-loop at node {bad}")
            if np.any(~(prob > 0.0)) or np.any(prob > 1.0):
                raise GraphError("edge probability outside (0, 1]")

        order = np.lexsort((dst, src))
        src, dst, prob = src[order], dst[order], prob[order]
        if m > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if np.any(dup):
                i = int(np.argmax(dup))
                raise GraphError(f"duplicate edge ({src[i]}, {dst[i]})")

        self.node_count = node_count
        self.edge_src = _as_readonly(src)
        self.edge_dst = _as_readonly(dst)
        self.edge_prob = _as_readonly(prob)

        counts = np.bincount(src, minlength=node_count)
        self.out_indptr = _as_readonly(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
        self.out_dst = self.edge_dst
        self.out_prob = self.edge_prob

        in_order = np.lexsort((src, dst))
        in_counts = np.bincount(dst, minlength=node_count)
        self.in_indptr = _as_readonly(np.concatenate(([0], np.cumsum(in_counts))).astype(np.int64))
        self.in_src = _as_readonly(src[in_order])
        self.in_prob = _as_readonly(prob[in_order])

        if labels is None:
            labels = tuple(str(i) for i in range(node_count))
        else:
            labels = tuple(str(x) for x in labels)
            if len(labels) != node_count:
                raise GraphError("label count does not match node count")
        self.labels = labels
        self._label_to_id = {lab: i for i, lab in enumerate(labels)}
        if len(self._label_to_id) != node_count:
            raise GraphError("duplicate node label")
        self.removed_nodes = frozenset(int(v) for v in removed_nodes)

    # -- accessors -------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return int(self.edge_src.shape[0])

    @property
    def node_ids(self) -> tuple[int, ...]:
        if not self.removed_nodes:
            return tuple(range(self.node_count))
        return tuple(v for v in range(self.node_count) if v not in self.removed_nodes)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for s, d, p in zip(self.edge_src, self.edge_dst, self.edge_prob):
            yield int(s), int(d), float(p)

    def out_edges(self, u: int) -> Iterator[tuple[int, float]]:
        lo, hi = self.out_indptr[u], self.out_indptr[u + 1]
        for i in range(lo, hi):
            yield int(self.out_dst[i]), float(self.out_prob[i])

    def in_edges(self, v: int) -> Iterator[tuple[int, float]]:
        lo, hi = self.in_indptr[v], self.in_indptr[v + 1]
        for i in range(lo, hi):
            yield int(self.in_src[i]), float(self.in_prob[i])

    def out_degree(self, u: int) -> int:
        return int(self.out_indptr[u + 1] - self.out_indptr[u])

    def in_degree(self, v: int) -> int:
        return int(self.in_indptr[v + 1] - self.in_indptr[v])

    def id_of(self, label: str) -> int:
        try:
            return self._label_to_id[label]
        except KeyError:
            raise GraphError(f"unknown node label {label!r}") from None

    def same_edges(self, other: "DirectedGraph") -> bool:
        return (
            self.node_count == other.node_count
            and self.labels == other.labels
            and np.array_equal(self.edge_src, other.edge_src)
            and np.array_equal(self.edge_dst, other.edge_dst)
            and np.array_equal(self.edge_prob, other.edge_prob)
        )

    def same_structure(self, other: "DirectedGraph") -> bool:
        """Equality over labels, ignoring the dense-id assignment order.

        Edge-list files cannot carry isolated nodes, so a reload may
        renumber nodes; two graphs are structurally equal when they have
        the same label set and the same labelled edges.
        """
        if set(self.labels) != set(other.labels):
            return False
        mine = {
            (self.labels[s], self.labels[d], float(p)) for s, d, p in self.edges()
        }
        theirs = {
            (other.labels[s], other.labels[d], float(p)) for s, d, p in other.edges()
        }
        return mine == theirs

    def __repr__(self) -> str:
        return f"DirectedGraph(nodes={self.node_count}, edges={self.edge_count})"


def graph_from_edges(
    edges: Iterable[tuple[int, int, float]],
    node_count: Optional[int] = None,
    labels: Optional[Sequence[str]] = None,
) -> DirectedGraph:
    """Convenience constructor from (src, dst, prob) triples."""
    triples = list(edges)
    if triples:
        src, dst, prob = (np.array(col) for col in zip(*triples))
    else:
        src = dst = np.empty(0, dtype=np.int64)
        prob = np.empty(0, dtype=np.float64)
    if node_count is None:
        node_count = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    return DirectedGraph(node_count, src, dst, prob, labels=labels)


class SeedSet:
    """Non-empty ordered set of seed node ids.

    Iteration follows insertion order, which fixes the reference order used
    by permutation sampling and report output.
    """

    __slots__ = ("ids", "_members")

    def __init__(self, members: Iterable[int], graph: Optional[DirectedGraph] = None):
        ids = tuple(int(v) for v in members)
        if not ids:
            raise GraphError("seed set must be non-empty")
        seen = set()
        for v in ids:
            if v in seen:
                raise GraphError(f"duplicate seed {v}")
            if v < 0 or (graph is not None and v >= graph.node_count):
                raise GraphError(f"seed {v} is not a valid node")
            seen.add(v)
        self.ids = ids
        self._members = frozenset(ids)

    @classmethod
    def from_labels(cls, labels: Iterable[str], graph: DirectedGraph) -> "SeedSet":
        return cls((graph.id_of(lab) for lab in labels), graph)

    def mask(self, node_count: int) -> np.ndarray:
        m = np.zeros(node_count, dtype=np.uint8)
        m[list(self.ids)] = 1
        return m

    def __contains__(self, v: int) -> bool:
        return v in self._members

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, SeedSet) and self.ids == other.ids

    def __hash__(self) -> int:
        return hash(self.ids)

    def __repr__(self) -> str:
        return f"SeedSet({list(self.ids)})"


@dataclass(frozen=True)
class TerminationPolicy:
    """When diffusion stops: after one step, after K steps, or at quiescence.

    ``k_steps`` requires K >= 2; a one-step process must be expressed as
    ``single_step()`` so callers are routed to the exact algorithm.
    """

    kind: str
    steps: Optional[int] = None

    SINGLE = "single-step"
    KSTEPS = "k-steps"
    COMPLETE = "complete"

    @classmethod
    def single_step(cls) -> "TerminationPolicy":
        return cls(cls.SINGLE)

    @classmethod
    def k_steps(cls, k: int) -> "TerminationPolicy":
        k = int(k)
        if k == 1:
            raise GraphError("K=1 must be expressed as single_step()")
        if k < 2:
            raise GraphError("K must be >= 2")
        return cls(cls.KSTEPS, k)

    @classmethod
    def complete(cls) -> "TerminationPolicy":
        return cls(cls.COMPLETE)

    @classmethod
    def parse(cls, text: str) -> "TerminationPolicy":
        """Parse 'single', 'k:<K>' or 'complete'."""
        text = text.strip().lower()
        if text in ("single", "single-step"):
            return cls.single_step()
        if text == "complete":
            return cls.complete()
        if text.startswith("k:"):
            try:
                k = int(text[2:])
            except ValueError:
                raise GraphError(f"bad policy {text!r}") from None
            return cls.k_steps(k)
        raise GraphError(f"bad policy {text!r}; expected single, k:<K> or complete")

    def step_bound(self, node_count: int, seed_count: int) -> int:
        """Maximum number of diffusion steps under this policy.

        Complete is equivalent to K = |V| - |T|: the process only continues
        while at least one new node activates per step.
        """
        if self.kind == self.SINGLE:
            return 1
        if self.kind == self.KSTEPS:
            return int(self.steps)  # type: ignore[arg-type]
        return max(node_count - seed_count, 1)

    def label(self) -> str:
        if self.kind == self.KSTEPS:
            return f"k:{self.steps}"
        return "single" if self.kind == self.SINGLE else "complete"


@dataclass(frozen=True, eq=False)
class LiveEdgeGraph:
    """One realization of the diffusion process: each edge kept or dropped.

    ``kept`` is a boolean mask aligned with ``source.edge_*`` arrays.
    """

    source: DirectedGraph
    kept: np.ndarray

    def __post_init__(self):
        if self.kept.shape != self.source.edge_src.shape:
            raise GraphError("kept mask must align with the source edge list")

    @property
    def kept_edge_count(self) -> int:
        return int(np.count_nonzero(self.kept))

    def kept_out_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, dst) over kept edges only; src-sorted like the source."""
        g = self.source
        idx = np.flatnonzero(self.kept)
        srcs = g.edge_src[idx]
        dsts = g.edge_dst[idx]
        indptr = np.searchsorted(srcs, np.arange(g.node_count + 1))
        return indptr.astype(np.int64), dsts.astype(np.int64)


# -- operations ------------------------------------------------------------


def load_edge_list(path, default_prob: Optional[float] = None) -> DirectedGraph:
    """Load a whitespace-separated `src dst [prob]` edge list.

    Lines starting with '#' and blank lines are ignored.  Node labels are
    arbitrary tokens and are densely re-indexed in order of first
    appearance; the label map is retained on the graph.  A missing third
    column falls back to ``default_prob``.  Zero-probability edges,
    self-loops and duplicate (src, dst) pairs are hard errors.
    """
    labels: list[str] = []
    label_to_id: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    prob: list[float] = []
    seen: set[tuple[int, int]] = set()

    def intern(tok: str) -> int:
        i = label_to_id.get(tok)
        if i is None:
            i = len(labels)
            label_to_id[tok] = i
            labels.append(tok)
        return i

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 2:
                if default_prob is None:
                    raise GraphError(f"{path}:{lineno}: missing probability column")
                p = float(default_prob)
            elif len(parts) == 3:
                try:
                    p = float(parts[2])
                except ValueError:
                    raise GraphError(f"{path}:{lineno}: bad probability {parts[2]!r}") from None
            else:
                raise GraphError(f"{path}:{lineno}: expected `src dst [prob]`, got {len(parts)} fields")
            if parts[0] == parts[1]:
                raise GraphError(f"{path}:{lineno}: self-loop at {parts[0]!r}")
            if not (0.0 < p <= 1.0):
                raise GraphError(f"{path}:{lineno}: probability {p} outside (0, 1]")
            u, v = intern(parts[0]), intern(parts[1])
            if (u, v) in seen:
                raise GraphError(f"{path}:{lineno}: duplicate edge {parts[0]!r} -> {parts[1]!r}")
            seen.add((u, v))
            src.append(u)
            dst.append(v)
            prob.append(p)

    return DirectedGraph(
        len(labels),
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(prob, dtype=np.float64),
        labels=labels,
    )


def save_edge_list(graph: DirectedGraph, path) -> None:
    """Write the graph in the `src dst prob` format read by load_edge_list.

    Probabilities use shortest round-trip float formatting, so a reload
    reproduces the graph exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for s, d, p in zip(graph.edge_src, graph.edge_dst, graph.edge_prob):
            fh.write(f"{graph.labels[s]} {graph.labels[d]} {float(p)!r}\n")


def assign_weighted_cascade(graph: DirectedGraph) -> DirectedGraph:
    """Set every edge (u, v) to probability 1/in_degree(v); topology unchanged."""
    if graph.edge_count == 0:
        raise GraphError("weighted cascade needs at least one edge")
    indeg = np.diff(graph.in_indptr)
    prob = 1.0 / indeg[graph.edge_dst]
    return DirectedGraph(
        graph.node_count, graph.edge_src, graph.edge_dst, prob,
        labels=graph.labels, removed_nodes=graph.removed_nodes,
    )


def assign_uniform(graph: DirectedGraph, p: float) -> DirectedGraph:
    """Set every edge to the same probability p in (0, 1]."""
    if not (0.0 < p <= 1.0):
        raise GraphError(f"probability {p} outside (0, 1]")
    prob = np.full(graph.edge_count, float(p))
    return DirectedGraph(
        graph.node_count, graph.edge_src, graph.edge_dst, prob,
        labels=graph.labels, removed_nodes=graph.removed_nodes,
    )


def generate_erdos_renyi(n: int, avg_degree: float, rng_seed: int) -> DirectedGraph:
    """Random directed graph with exactly round(n * avg_degree) distinct edges.

    Edges are drawn uniformly without replacement from all n(n-1) ordered
    non-self pairs and carry probability 1.0 (callers assign probabilities
    afterwards).  Requests beyond the complete graph saturate at n(n-1)
    edges.  Reproducible from ``rng_seed``.
    """
    n = int(n)
    if n < 2:
        raise GraphError("need at least 2 nodes")
    if avg_degree <= 0:
        raise GraphError("avg_degree must be positive")
    total = n * (n - 1)
    m = min(int(round(n * float(avg_degree))), total)
    rng = np.random.default_rng(int(rng_seed))

    if total <= 4_000_000:
        codes = rng.choice(total, size=m, replace=False).astype(np.int64)
    else:
        # Rejection loop, vectorized in batches; valid because avg_degree << n.
        chosen = np.empty(0, dtype=np.int64)
        while chosen.size < m:
            need = m - chosen.size
            cand = rng.integers(0, total, size=need + need // 2 + 16, dtype=np.int64)
            _, first = np.unique(cand, return_index=True)
            cand = cand[np.sort(first)]
            if chosen.size:
                cand = cand[~np.isin(cand, chosen)]
            chosen = np.concatenate([chosen, cand[:need]])
        codes = chosen

    src = codes // (n - 1)
    rem = codes % (n - 1)
    dst = np.where(rem < src, rem, rem + 1)
    prob = np.ones(m, dtype=np.float64)
    return DirectedGraph(n, src, dst, prob)


def coalition_subgraph(graph: DirectedGraph, seeds: SeedSet, coalition: Iterable[int]) -> DirectedGraph:
    """Subgraph for a coalition: seeds outside it are removed with all their edges."""
    coalition = set(int(v) for v in coalition)
    extra = coalition - set(seeds.ids)
    if extra:
        raise GraphError(f"coalition contains non-seed nodes {sorted(extra)}")
    removed = set(seeds.ids) - coalition
    if not removed:
        return graph
    gone = np.zeros(graph.node_count, dtype=bool)
    gone[list(removed)] = True
    keep = ~(gone[graph.edge_src] | gone[graph.edge_dst])
    return DirectedGraph(
        graph.node_count,
        graph.edge_src[keep], graph.edge_dst[keep], graph.edge_prob[keep],
        labels=graph.labels,
        removed_nodes=graph.removed_nodes | removed,
    )


def remove_seed_in_edges(graph: DirectedGraph, seeds: SeedSet) -> DirectedGraph:
    """Drop every edge pointing into a seed; the sampling domain of the estimators."""
    mask = seeds.mask(graph.node_count).astype(bool)
    keep = ~mask[graph.edge_dst]
    if np.all(keep):
        return graph
    return DirectedGraph(
        graph.node_count,
        graph.edge_src[keep], graph.edge_dst[keep], graph.edge_prob[keep],
        labels=graph.labels, removed_nodes=graph.removed_nodes,
    )


def sample_live_edge(graph: DirectedGraph, rng: np.random.Generator) -> LiveEdgeGraph:
    """Keep each edge independently with its own probability."""
    kept = rng.random(graph.edge_count) < graph.edge_prob
    return LiveEdgeGraph(graph, kept)
