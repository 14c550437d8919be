"""Exact Shapley computation: coefficients, subset-sum recurrence, the
polynomial single-step algorithm and the brute-force oracle."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import icshapley as ic
from icshapley.exact import GuardExceededError

from conftest import random_graph, sparse_multi_step_instance

SINGLE = ic.TerminationPolicy.single_step()
COMPLETE = ic.TerminationPolicy.complete()


# -- permutation coefficients ---------------------------------------------------


def test_factorial_coefficients_small():
    assert np.allclose(ic.factorial_coefficients(1), [1.0])
    assert np.allclose(ic.factorial_coefficients(2), [0.5, 0.5])
    assert np.allclose(ic.factorial_coefficients(4), [0.25, 1 / 12, 1 / 12, 0.25])


@given(t=st.integers(min_value=1, max_value=800))
@settings(max_examples=40, deadline=None)
def test_factorial_coefficients_normalized(t):
    coeff = ic.factorial_coefficients(t)
    assert np.all(coeff > 0.0) and np.all(coeff <= 1.0)
    # sum over k of C(t-1, k) * coeff[k] telescopes to 1
    log_binom = [
        math.lgamma(t) - math.lgamma(k + 1) - math.lgamma(t - k) for k in range(t)
    ]
    total = float(np.sum(np.exp(np.array(log_binom) + np.log(coeff))))
    # lgamma noise grows with its argument; ~1e-11 relative near t ~ 800
    assert total == pytest.approx(1.0, rel=1e-9)


def test_factorial_coefficients_range_limits():
    coeff = ic.factorial_coefficients(800)
    assert np.all(coeff > 0.0)
    assert coeff[0] == pytest.approx(1 / 800, rel=1e-12)
    with pytest.raises(ic.GraphError, match="underflow"):
        ic.factorial_coefficients(2000)


# -- subset failure sums ----------------------------------------------------------


def test_failure_subset_sums_unit_case():
    alpha = ic.failure_subset_sums([1 - 0.5, 1 - 0.25])
    assert np.allclose(alpha, [1.0, 1.25, 0.375], atol=1e-15)


def _alpha_by_enumeration(fails):
    out = np.zeros(len(fails) + 1)
    for k in range(len(fails) + 1):
        out[k] = sum(
            np.prod([fails[i] for i in combo]) if combo else 1.0
            for combo in itertools.combinations(range(len(fails)), k)
        )
    return out


@given(
    fails=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0, max_size=12)
)
@settings(max_examples=60, deadline=None)
def test_failure_subset_sums_match_enumeration(fails):
    got = ic.failure_subset_sums(fails)
    want = _alpha_by_enumeration(fails)
    assert np.allclose(got, want, atol=1e-12)
    assert got[0] == 1.0


# -- exact single-step algorithm ----------------------------------------------------


def test_exact_single_step_diamond(diamond):
    g, seeds = diamond
    rep = ic.exact_single_step(g, seeds)
    for t in seeds:
        assert rep.values[t] == pytest.approx(0.75, abs=1e-12)


def test_exact_single_step_null_seed():
    # Seed 1 only points at seed 0: a null player.
    g = ic.graph_from_edges([(0, 2, 0.5), (1, 0, 0.9)])
    seeds = ic.SeedSet([0, 1], g)
    rep = ic.exact_single_step(g, seeds)
    assert rep.values[1] == 0.0
    assert rep.values[0] == pytest.approx(0.5, abs=1e-12)


def test_exact_single_step_symmetric_seeds():
    g = ic.graph_from_edges([(0, 2, 0.4), (0, 3, 0.7), (1, 2, 0.4), (1, 3, 0.7)])
    seeds = ic.SeedSet([0, 1], g)
    rep = ic.exact_single_step(g, seeds)
    assert rep.values[0] == pytest.approx(rep.values[1], abs=1e-12)


def _global_formula_single_step(g, seeds):
    """Whole-graph evaluation of the closed form, without the local split.

    Uses the full competing-seed list per target and the |T|-sized
    coefficient table; serves as an independent route to the same values.
    """
    t_count = len(seeds)
    coeff = ic.factorial_coefficients(t_count)
    values = {}
    for t in seeds:
        others = [s for s in seeds if s != t]
        total = 0.0
        for u, p_tu in g.out_edges(t):
            if u in seeds:
                continue
            fail_by_seed = {w: 1.0 for w in others}
            for w, p_wu in g.in_edges(u):
                if w in fail_by_seed:
                    fail_by_seed[w] = 1.0 - p_wu
            alpha = ic.failure_subset_sums(list(fail_by_seed.values()))
            total += p_tu * float(np.dot(coeff, alpha[:t_count]))
        values[t] = total
    return values


def test_exact_single_step_matches_global_formula():
    rng = np.random.default_rng(17)
    for _ in range(25):
        g, seeds = random_graph(rng)
        rep = ic.exact_single_step(g, seeds)
        direct = _global_formula_single_step(g, seeds)
        for t in seeds:
            assert rep.values[t] == pytest.approx(direct[t], abs=1e-12)


def test_exact_single_step_efficiency_axiom():
    rng = np.random.default_rng(29)
    for _ in range(50):
        g, seeds = random_graph(rng, max_nodes=200, max_seeds=20)
        rep = ic.exact_single_step(g, seeds)
        grand = ic.exact_value_single_step(g, seeds, list(seeds))
        assert rep.total() == pytest.approx(grand, abs=1e-9)


def test_exact_single_step_huge_crowded_neighborhood():
    # 1200 seeds all pointing at one node: past the coefficient underflow
    # boundary, handled by the normalized recurrence.
    nt = 1200
    p = 0.002
    g = ic.graph_from_edges([(i, nt, p) for i in range(nt)], node_count=nt + 1)
    seeds = ic.SeedSet(range(nt), g)
    rep = ic.exact_single_step(g, seeds)
    expected_each = (1.0 - (1.0 - p) ** nt) / nt  # symmetry + efficiency
    for t in (0, 700, nt - 1):
        assert rep.values[t] == pytest.approx(expected_each, rel=1e-10)


def test_mean_failure_products_match_subset_sums():
    rng = np.random.default_rng(2)
    for size in (0, 1, 2, 5, 9):
        fails = rng.uniform(0.0, 1.0, size)
        beta = ic.mean_failure_products(fails)
        alpha = ic.failure_subset_sums(fails)
        binom = np.array([math.comb(size, k) for k in range(size + 1)], dtype=float)
        assert np.allclose(beta * binom, alpha, atol=1e-12)


# -- brute force ------------------------------------------------------------------


def test_bruteforce_diamond_single_step(diamond):
    g, seeds = diamond
    rep = ic.shapley_bruteforce(g, seeds, SINGLE)
    for t in seeds:
        assert rep.values[t] == pytest.approx(0.75, abs=1e-12)
    assert rep.params["value_mode"] == "closed-form-single-step"


def test_bruteforce_single_seed_gets_grand_value(diamond):
    g, _ = diamond
    solo = ic.SeedSet([g.id_of("t1")], g)
    rep = ic.shapley_bruteforce(g, solo, COMPLETE)
    enumerated = ic.shapley_bruteforce(g, solo, COMPLETE).values[g.id_of("t1")]
    assert rep.values[g.id_of("t1")] == pytest.approx(enumerated, abs=1e-12)
    single = ic.shapley_bruteforce(g, solo, SINGLE)
    assert single.values[g.id_of("t1")] == pytest.approx(
        ic.exact_value_single_step(g, solo, [g.id_of("t1")]), abs=1e-12
    )


def test_bruteforce_symmetry_multi_step(diamond):
    g, seeds = diamond
    rep = ic.shapley_bruteforce(g, seeds, COMPLETE)
    assert rep.params["value_mode"] == "live-edge-enumeration"
    assert rep.values[g.id_of("t1")] == pytest.approx(
        rep.values[g.id_of("t2")], abs=1e-12
    )


def test_bruteforce_matches_permutation_definition():
    """Subset-weighted evaluation equals the all-permutations average."""
    rng = np.random.default_rng(41)
    for _ in range(10):
        g, seeds = sparse_multi_step_instance(rng)
        policy = ic.TerminationPolicy.k_steps(2)
        rep = ic.shapley_bruteforce(g, seeds, policy)

        slots = list(seeds)
        u_cache = {}

        def u_of(subset):
            key = frozenset(subset)
            if key not in u_cache:
                bound = policy.step_bound(g.node_count, len(seeds))
                Q = ic.live_edge_value_tables(g, seeds, [bound])[0]
                # P[reach-set subset of M] per node via subset-sum
                t = len(slots)
                F = Q.copy()
                for b in range(t):
                    has = np.flatnonzero((np.arange(1 << t) >> b) & 1)
                    F[:, has] += F[:, has ^ (1 << b)]
                mask = 0
                for i, s in enumerate(slots):
                    if s in key:
                        mask |= 1 << i
                full = (1 << t) - 1
                u_cache[key] = float(Q.sum() - F[:, full ^ mask].sum())
            return u_cache[key]

        for t in slots:
            acc = 0.0
            n_perm = 0
            for perm in itertools.permutations(slots):
                before = perm[: perm.index(t)]
                acc += u_of(set(before) | {t}) - u_of(set(before))
                n_perm += 1
            assert rep.values[t] == pytest.approx(acc / n_perm, abs=1e-9)


def test_bruteforce_single_step_matches_exact_sweep():
    rng = np.random.default_rng(53)
    for _ in range(30):
        g, seeds = random_graph(rng)
        fast = ic.exact_single_step(g, seeds)
        slow = ic.shapley_bruteforce(g, seeds, SINGLE)
        for t in seeds:
            assert fast.values[t] == pytest.approx(slow.values[t], abs=1e-9)


def test_bruteforce_guards():
    g = ic.generate_erdos_renyi(30, 2, rng_seed=1)
    with pytest.raises(GuardExceededError):
        ic.shapley_bruteforce(g, ic.SeedSet(range(13), g), SINGLE)
    g2, seeds2 = random_graph(np.random.default_rng(0), max_nodes=20, avg_degree=3.0)
    if g2.edge_count <= 20:
        g2 = ic.generate_erdos_renyi(20, 2.0, rng_seed=3)
        seeds2 = ic.SeedSet([0, 1], g2)
    with pytest.raises(GuardExceededError):
        ic.shapley_bruteforce(g2, seeds2, COMPLETE, value_mode="exact")


def test_bruteforce_monte_carlo_mode():
    g = ic.generate_erdos_renyi(25, 2.0, rng_seed=5)
    g = ic.assign_weighted_cascade(g)
    seeds = ic.SeedSet([0, 1], g)
    rep = ic.shapley_bruteforce(
        g, seeds, COMPLETE, value_mode="monte-carlo", n_samples=2000,
        rng=np.random.default_rng(7),
    )
    assert rep.params["value_mode"] == "monte-carlo"
    assert all(np.isfinite(v) for v in rep.values.values())
    with pytest.raises(ic.GraphError):
        ic.shapley_bruteforce(g, seeds, COMPLETE, value_mode="monte-carlo")


def test_bruteforce_explicit_monte_carlo_under_single_step(diamond):
    # an explicit monte-carlo request is honored even when the closed form
    # is available; it estimates the same values
    g, seeds = diamond
    rep = ic.shapley_bruteforce(
        g, seeds, SINGLE, value_mode="monte-carlo", n_samples=30_000,
        rng=np.random.default_rng(9),
    )
    assert rep.params["value_mode"] == "monte-carlo"
    for t in seeds:
        assert rep.values[t] == pytest.approx(0.75, abs=0.03)


def test_reach_tables_rows_are_distributions(diamond):
    g, seeds = diamond
    Q = ic.live_edge_value_tables(g, seeds, [1, 2, g.node_count])
    is_seed = seeds.mask(g.node_count).astype(bool)
    sums = Q.sum(axis=2)
    assert np.allclose(sums[:, ~is_seed], 1.0, atol=1e-12)
    assert np.allclose(sums[:, is_seed], 0.0)
    # single-step tables reproduce the closed-form value of the full set
    t = len(seeds)
    F = Q[0].copy()
    for b in range(t):
        has = np.flatnonzero((np.arange(1 << t) >> b) & 1)
        F[:, has] += F[:, has ^ (1 << b)]
    u_full = float(Q[0].sum() - F[:, 0].sum())
    assert u_full == pytest.approx(
        ic.exact_value_single_step(g, seeds, list(seeds)), abs=1e-12
    )
