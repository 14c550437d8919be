"""Compiled batch kernels for the Monte-Carlo sampling paths.

Every kernel derives the random stream of sample ``j`` purely from a 64-bit
``base`` and the sample index (splitmix64 counter construction), so results
are reproducible for a fixed base regardless of chunking or worker count.
Pure-Python reference implementations of the single-sample operations live
in the public modules; these kernels are only their batched fast paths.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _stream_init(base, j):
    return _mix64(base + np.uint64(j + 1) * _GAMMA)


@njit(cache=True, nogil=True, inline="always")
def _u01(state):
    state += _GAMMA
    z = _mix64(state)
    return state, (z >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def _cascade(out_indptr, out_dst, out_prob, init, n_init, blocked,
             bound, stamp, tag, cur, nxt, state):
    """One cascade; returns (new state, non-initial activation count).

    ``stamp[v] == tag`` marks v active; attempts toward already-active or
    blocked nodes consume no randomness (they cannot change the state).
    """
    ncur = 0
    for i in range(n_init):
        v = init[i]
        stamp[v] = tag
        cur[ncur] = v
        ncur += 1
    count = 0
    depth = 0
    while ncur > 0 and depth < bound:
        depth += 1
        nnxt = 0
        for fi in range(ncur):
            u = cur[fi]
            for ei in range(out_indptr[u], out_indptr[u + 1]):
                v = out_dst[ei]
                if stamp[v] == tag or blocked[v] == 1:
                    continue
                state, r = _u01(state)
                if r < out_prob[ei]:
                    stamp[v] = tag
                    nxt[nnxt] = v
                    nnxt += 1
        t = cur
        cur = nxt
        nxt = t
        ncur = nnxt
        count += nnxt
    return state, count


@njit(cache=True, nogil=True)
def cascade_counts(out_indptr, out_dst, out_prob, init, blocked, bound,
                   base, start, stop, counts):
    """Independent cascades from `init`; counts[j-start] = activations of sample j."""
    n = blocked.shape[0]
    stamp = np.full(n, -1, np.int64)
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    for j in range(start, stop):
        state = _stream_init(base, j)
        state, c = _cascade(out_indptr, out_dst, out_prob, init, init.shape[0],
                            blocked, bound, stamp, j, cur, nxt, state)
        counts[j - start] = c


@njit(cache=True, nogil=True)
def permute_mc_batch(out_indptr, out_dst, out_prob, seed_ids, blocked, bound,
                     n_mc, base, start, stop):
    """Permutation-walk marginal sums for permutations [start, stop).

    Per permutation: shuffle the seed order, then for each seed in turn
    estimate the values of the prefix with and without it, each from
    ``n_mc`` fresh cascades, and accumulate the difference.  Returns the
    per-seed sum of estimated marginals over the processed permutations.
    """
    n = blocked.shape[0]
    t_count = seed_ids.shape[0]
    est = np.zeros(t_count, np.float64)
    perm = np.empty(t_count, np.int64)
    prefix = np.empty(t_count, np.int64)
    stamp = np.full(n, -1, np.int64)
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    tag = start * (2 * t_count * n_mc)  # unique per cascade below
    for j in range(start, stop):
        state = _stream_init(base, j)
        for i in range(t_count):
            perm[i] = i
        for i in range(t_count - 1, 0, -1):  # Fisher-Yates
            state, r = _u01(state)
            k = int(r * (i + 1))
            if k > i:
                k = i
            tmp = perm[i]
            perm[i] = perm[k]
            perm[k] = tmp
        for pos in range(t_count):
            slot = perm[pos]
            prefix[pos] = seed_ids[slot]
            with_sum = 0.0
            for _ in range(n_mc):
                tag += 1
                state, c = _cascade(out_indptr, out_dst, out_prob, prefix, pos + 1,
                                    blocked, bound, stamp, tag, cur, nxt, state)
                with_sum += c
            without_sum = 0.0
            for _ in range(n_mc):
                tag += 1
                state, c = _cascade(out_indptr, out_dst, out_prob, prefix, pos,
                                    blocked, bound, stamp, tag, cur, nxt, state)
                without_sum += c
            est[slot] += (with_sum - without_sum) / n_mc
    return est


@njit(cache=True, nogil=True)
def live_edge_credits(out_indptr, out_dst, out_prob, seed_ids, bound,
                      base, start, stop):
    """Credit sums over live-edge samples [start, stop).

    The caller passes the seed-in-edge-removed graph.  Per sample: draw the
    kept mask for all edges, count per node how many seeds reach it within
    the step bound (one bounded BFS per seed), then re-walk the same
    realization adding 1/count to each reaching seed.
    """
    n = out_indptr.shape[0] - 1
    m = out_dst.shape[0]
    t_count = seed_ids.shape[0]
    credits = np.zeros(t_count, np.float64)
    kept = np.empty(m, np.uint8)
    vstamp = np.full(n, -1, np.int64)
    cstamp = np.full(n, -1, np.int64)
    cnt = np.zeros(n, np.int32)
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    for j in range(start, stop):
        state = _stream_init(base, j)
        for ei in range(m):
            state, r = _u01(state)
            kept[ei] = 1 if r < out_prob[ei] else 0
        for phase in range(2):
            for si in range(t_count):
                tag = (j * 2 + phase) * t_count + si
                s = seed_ids[si]
                vstamp[s] = tag
                cur[0] = s
                ncur = 1
                depth = 0
                while ncur > 0 and depth < bound:
                    depth += 1
                    nnxt = 0
                    for fi in range(ncur):
                        u = cur[fi]
                        for ei in range(out_indptr[u], out_indptr[u + 1]):
                            if kept[ei] == 0:
                                continue
                            v = out_dst[ei]
                            if vstamp[v] == tag:
                                continue
                            vstamp[v] = tag
                            nxt[nnxt] = v
                            nnxt += 1
                            if phase == 0:
                                if cstamp[v] != j:
                                    cstamp[v] = j
                                    cnt[v] = 1
                                else:
                                    cnt[v] += 1
                            else:
                                credits[si] += 1.0 / cnt[v]
                    t = cur
                    cur = nxt
                    nxt = t
                    ncur = nnxt
    return credits


@njit(cache=True, nogil=True)
def rr_credits(in_indptr, in_src, in_prob, seed_slot, nonseed_ids, depth_bound,
               base, start, stop):
    """Reverse-reachable credit sums for samples [start, stop).

    The caller passes the seed-in-edge-removed graph.  Per sample: pick a
    uniform non-seed root, walk in-edges backwards drawing each edge's
    live state on first traversal, collect seeds hit within the depth
    bound, and split one unit of credit equally among them.
    """
    n = seed_slot.shape[0]
    t_count = 0
    for v in range(n):
        if seed_slot[v] >= 0:
            t_count += 1
    credits = np.zeros(t_count, np.float64)
    stamp = np.full(n, -1, np.int64)
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    hits = np.empty(t_count, np.int64)
    n_roots = nonseed_ids.shape[0]
    for j in range(start, stop):
        state = _stream_init(base, j)
        state, r = _u01(state)
        ri = int(r * n_roots)
        if ri >= n_roots:
            ri = n_roots - 1
        root = nonseed_ids[ri]
        stamp[root] = j
        cur[0] = root
        ncur = 1
        nhit = 0
        depth = 0
        while ncur > 0 and depth < depth_bound:
            depth += 1
            nnxt = 0
            for fi in range(ncur):
                v = cur[fi]
                for ei in range(in_indptr[v], in_indptr[v + 1]):
                    w = in_src[ei]
                    if stamp[w] == j:
                        continue
                    state, r = _u01(state)
                    if r < in_prob[ei]:
                        stamp[w] = j
                        s = seed_slot[w]
                        if s >= 0:
                            hits[nhit] = s
                            nhit += 1
                        else:
                            nxt[nnxt] = w
                            nnxt += 1
            t = cur
            cur = nxt
            nxt = t
            ncur = nnxt
        if nhit > 0:
            share = 1.0 / nhit
            for hi in range(nhit):
                credits[hits[hi]] += share
    return credits


@njit(cache=True, nogil=True)
def live_edge_value_tables(edge_src, edge_dst, edge_prob, is_seed,
                           seed_ids, bounds, Q):
    """Exact enumeration of every live-edge realization of a tiny graph.

    For each of the 2^m realizations (m <= ~20 edges of the
    seed-in-edge-removed graph) and each step bound b in ``bounds``,
    accumulates Q[b, v, B] += P(realization) where B is the bitmask of
    seeds reaching non-seed v within b steps.  Rows sum to 1 per (b, v).
    """
    m = edge_src.shape[0]
    n = is_seed.shape[0]
    t_count = seed_ids.shape[0]
    n_bounds = bounds.shape[0]
    max_bound = 0
    for bi in range(n_bounds):
        if bounds[bi] > max_bound:
            max_bound = bounds[bi]

    # static out-adjacency over edge ids
    deg = np.zeros(n, np.int64)
    for ei in range(m):
        deg[edge_src[ei]] += 1
    indptr = np.zeros(n + 1, np.int64)
    for v in range(n):
        indptr[v + 1] = indptr[v] + deg[v]
    fill = indptr[:n].copy()
    eids = np.empty(m, np.int64)
    for ei in range(m):
        u = edge_src[ei]
        eids[fill[u]] = ei
        fill[u] += 1

    dist = np.empty((t_count, n), np.int64)
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    for gmask in range(1 << m):
        w = 1.0
        for ei in range(m):
            if (gmask >> ei) & 1:
                w *= edge_prob[ei]
            else:
                w *= 1.0 - edge_prob[ei]
        for si in range(t_count):
            for v in range(n):
                dist[si, v] = -1
            s = seed_ids[si]
            dist[si, s] = 0
            cur[0] = s
            ncur = 1
            depth = 0
            while ncur > 0 and depth < max_bound:
                depth += 1
                nnxt = 0
                for fi in range(ncur):
                    u = cur[fi]
                    for k in range(indptr[u], indptr[u + 1]):
                        ei = eids[k]
                        if (gmask >> ei) & 1 == 0:
                            continue
                        v = edge_dst[ei]
                        if dist[si, v] >= 0:
                            continue
                        dist[si, v] = depth
                        nxt[nnxt] = v
                        nnxt += 1
                t = cur
                cur = nxt
                nxt = t
                ncur = nnxt
        for v in range(n):
            if is_seed[v] == 1:
                continue
            for bi in range(n_bounds):
                bmask = 0
                for si in range(t_count):
                    d = dist[si, v]
                    if 0 < d <= bounds[bi]:
                        bmask |= 1 << si
                Q[bi, v, bmask] += w
