"""Exact Shapley attribution: the polynomial-time single-step algorithm and
a brute-force oracle for tiny instances under any termination policy."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .diffusion import estimate_value, exact_value_single_step
from .graph import DirectedGraph, GraphError, SeedSet, TerminationPolicy, remove_seed_in_edges

BRUTEFORCE_MAX_SEEDS = 12
BRUTEFORCE_MAX_EDGES = 20


class GuardExceededError(GraphError):
    """Instance too large for an exact enumeration algorithm."""


@dataclass
class ShapleyReport:
    """Per-seed attribution values plus provenance of the run."""

    values: dict[int, float]
    algorithm: str
    params: dict
    elapsed: float = 0.0

    def as_array(self, seeds: SeedSet) -> np.ndarray:
        return np.array([self.values[t] for t in seeds], dtype=np.float64)

    def total(self) -> float:
        return float(sum(self.values.values()))


def factorial_coefficients(t_count: int) -> np.ndarray:
    """Permutation weights C[k] = k! (t_count-k-1)! / t_count! for k < t_count.

    Computed in log space so the weights stay accurate far beyond the ~170
    players where raw factorials overflow.  The exponentiated weights
    themselves leave double-precision range near 1060 players; past that
    this raises, and the single-step algorithm sidesteps the issue with a
    normalized recurrence.
    """
    t_count = int(t_count)
    if t_count < 1:
        raise GraphError("t_count must be >= 1")
    k = np.arange(t_count, dtype=np.float64)
    log_c = (
        np.array([math.lgamma(i + 1.0) for i in k])
        + np.array([math.lgamma(t_count - i) for i in k])
        - math.lgamma(t_count + 1.0)
    )
    out = np.exp(log_c)
    if np.any(out == 0.0):
        raise GraphError(
            f"coefficients for {t_count} players underflow double precision"
        )
    return out


def failure_subset_sums(fail_probs: Sequence[float]) -> np.ndarray:
    """alpha[k] = sum over k-subsets S of the failure factors of prod(S).

    ``fail_probs`` holds one factor (1 - p) per competing seed; the table
    is updated in place by the pairing recurrence, consuming one factor at
    a time.  alpha[0] is always 1.
    """
    fail = np.asarray(fail_probs, dtype=np.float64)
    alpha = np.zeros(len(fail) + 1, dtype=np.float64)
    alpha[0] = 1.0
    for i, q in enumerate(fail, start=1):
        alpha[1 : i + 1] = alpha[1 : i + 1] + q * alpha[0:i]
    return alpha


def mean_failure_products(fail_probs: Sequence[float]) -> np.ndarray:
    """beta[k]: the mean over k-subsets of the failure factors of prod(S).

    Normalized form of the subset sums, beta[k] = alpha[k] / binom(|L|, k);
    every entry lies in [0, 1], so the recurrence never overflows no matter
    how many competitors a node has.
    """
    fail = np.asarray(fail_probs, dtype=np.float64)
    beta = np.zeros(len(fail) + 1, dtype=np.float64)
    beta[0] = 1.0
    for i, q in enumerate(fail, start=1):
        w = np.arange(1, i + 1, dtype=np.float64) / i
        beta[1 : i + 1] = w * q * beta[0:i] + (1.0 - w) * beta[1 : i + 1]
    return beta


def exact_single_step(graph: DirectedGraph, seeds: SeedSet) -> ShapleyReport:
    """Exact Shapley values under single-step termination, in polynomial time.

    One step of diffusion activates each non-seed node independently, so
    the game decomposes into one local game per non-seed node u over its
    seed in-neighbors T(u).  Pairing the permutation weight with the count
    of k-subsets collapses to 1/|T(u)|, leaving per node and seed

        p(t, u) / |T(u)| * sum_k beta[k]

    with beta[k] the mean failure product over k-subsets of the
    competitors; the per-node contributions add up to the global values.
    """
    t0 = time.perf_counter()
    contributors: dict[int, list[tuple[int, float]]] = {}
    for t in seeds:
        for v, p in graph.out_edges(t):
            if v in seeds:
                continue
            contributors.setdefault(v, []).append((t, p))

    values = {t: 0.0 for t in seeds}
    for u in sorted(contributors):
        local = contributors[u]
        nt = len(local)
        for i, (t, p_tu) in enumerate(local):
            fails = [1.0 - q for j, (_, q) in enumerate(local) if j != i]
            beta = mean_failure_products(fails)
            values[t] += p_tu / nt * float(beta.sum())

    return ShapleyReport(
        values=values,
        algorithm="exact-single-step",
        params={"policy": "single", "seed_count": len(seeds)},
        elapsed=time.perf_counter() - t0,
    )


def _subset_popcounts(n_bits: int) -> np.ndarray:
    masks = np.arange(1 << n_bits, dtype=np.int64)
    pc = np.zeros(1 << n_bits, dtype=np.int64)
    for b in range(n_bits):
        pc += (masks >> b) & 1
    return pc


def live_edge_value_tables(
    graph: DirectedGraph,
    seeds: SeedSet,
    bounds: Sequence[int],
) -> np.ndarray:
    """Exact distribution of "which seeds reach v" over all live-edge graphs.

    Enumerates every realization of the seed-in-edge-removed graph (guarded
    by the edge count) and returns Q[b, v, B]: the probability that the set
    of seeds reaching non-seed v within bounds[b] steps is exactly bitmask
    B over seed slots.  Seeds' own rows are identically zero.
    """
    if graph.edge_count > BRUTEFORCE_MAX_EDGES:
        raise GuardExceededError(
            f"{graph.edge_count} edges; live-edge enumeration is limited to "
            f"{BRUTEFORCE_MAX_EDGES}"
        )
    gp = remove_seed_in_edges(graph, seeds)
    seed_ids = np.array(list(seeds), dtype=np.int64)
    is_seed = seeds.mask(graph.node_count)
    bounds_arr = np.array(sorted(set(int(b) for b in bounds)), dtype=np.int64)
    Q = np.zeros((len(bounds_arr), graph.node_count, 1 << len(seeds)), dtype=np.float64)
    _kernels.live_edge_value_tables(
        gp.edge_src, gp.edge_dst, gp.edge_prob, is_seed, seed_ids, bounds_arr, Q,
    )
    order = {int(b): i for i, b in enumerate(bounds_arr)}
    want = [order[int(b)] for b in bounds]
    return Q[want]


def shapley_bruteforce(
    graph: DirectedGraph,
    seeds: SeedSet,
    policy: TerminationPolicy,
    value_mode: str = "auto",
    n_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    workers: int = 1,
) -> ShapleyReport:
    """Shapley values by direct evaluation of the coalition-weighted sum.

    Guarded to at most 12 seeds.  The value function is evaluated exactly:
    in closed form under single-step termination, or by enumerating all
    2^|E| live-edge realizations for multi-step policies on graphs with at
    most 20 edges.  Larger multi-step instances fall back to Monte-Carlo
    value estimation with ``n_samples`` cascades per coalition
    (``value_mode='monte-carlo'``).
    """
    t0 = time.perf_counter()
    t_count = len(seeds)
    if t_count > BRUTEFORCE_MAX_SEEDS:
        raise GuardExceededError(
            f"{t_count} seeds; brute force is limited to {BRUTEFORCE_MAX_SEEDS}"
        )
    if value_mode not in ("auto", "exact", "monte-carlo"):
        raise GraphError(f"unknown value_mode {value_mode!r}")

    single = policy.kind == TerminationPolicy.SINGLE
    if value_mode == "monte-carlo":
        mode = "monte-carlo"
    elif single:
        mode = "closed-form-single-step"
    elif graph.edge_count <= BRUTEFORCE_MAX_EDGES:
        mode = "live-edge-enumeration"
    elif value_mode == "exact":
        raise GuardExceededError(
            f"{graph.edge_count} edges; exact multi-step enumeration is limited "
            f"to {BRUTEFORCE_MAX_EDGES}"
        )
    else:
        mode = "monte-carlo"
    if mode == "monte-carlo":
        if n_samples is None or rng is None:
            raise GraphError("monte-carlo value mode needs n_samples and rng")

    slots = {t: i for i, t in enumerate(seeds)}
    full = (1 << t_count) - 1

    def members(mask: int) -> list[int]:
        return [t for t, i in slots.items() if mask >> i & 1]

    u_by_mask = np.zeros(1 << t_count, dtype=np.float64)
    if mode == "closed-form-single-step":
        for mask in range(1 << t_count):
            u_by_mask[mask] = exact_value_single_step(graph, seeds, members(mask))
    elif mode == "live-edge-enumeration":
        bound = policy.step_bound(graph.node_count, t_count)
        Q = live_edge_value_tables(graph, seeds, [bound])[0]
        F = Q.copy()
        for b in range(t_count):
            has = np.flatnonzero((np.arange(1 << t_count) >> b) & 1)
            F[:, has] += F[:, has ^ (1 << b)]
        nonseed_total = float(Q.sum())  # == number of non-seed nodes
        for mask in range(1 << t_count):
            u_by_mask[mask] = nonseed_total - float(F[:, full ^ mask].sum())
    else:
        for mask in range(1 << t_count):
            u_by_mask[mask] = estimate_value(
                graph, seeds, members(mask), policy, int(n_samples), rng, workers=workers,
            )

    coeff = factorial_coefficients(t_count)
    pc = _subset_popcounts(t_count)
    values = {}
    for t, i in slots.items():
        bit = 1 << i
        acc = 0.0
        for mask in range(1 << t_count):
            if mask & bit:
                continue
            acc += coeff[pc[mask]] * (u_by_mask[mask | bit] - u_by_mask[mask])
        values[t] = float(acc)

    params: dict = {"policy": policy.label(), "value_mode": mode, "seed_count": t_count}
    if mode == "monte-carlo":
        params["n_samples"] = int(n_samples)  # type: ignore[arg-type]
    return ShapleyReport(
        values=values,
        algorithm="bruteforce",
        params=params,
        elapsed=time.perf_counter() - t0,
    )
