"""Seed selection, PageRank, the error metric and ground-truth management."""

import numpy as np
import pytest

import icshapley as ic
from icshapley.graph import GraphError

COMPLETE = ic.TerminationPolicy.complete()


# -- seed selection -----------------------------------------------------------


def test_top_out_degree_star():
    n = 8
    g = ic.graph_from_edges([(0, v, 0.5) for v in range(1, n)], node_count=n)
    seeds = ic.select_seeds(g, ic.SeedStrategy.top_out_degree(1))
    assert list(seeds) == [0]


def test_top_out_degree_tiebreak_lowest_id():
    edges = [(3, 0, 0.5), (3, 1, 0.5), (7, 0, 0.5), (7, 2, 0.5), (5, 0, 0.5)]
    g = ic.graph_from_edges(edges, node_count=8)
    # out-degrees: 3 -> 2, 7 -> 2, 5 -> 1; for the last slot 3 beats 7
    seeds = ic.select_seeds(g, ic.SeedStrategy.top_out_degree(1))
    assert list(seeds) == [3]
    two = ic.select_seeds(g, ic.SeedStrategy.top_out_degree(2))
    assert list(two) == [3, 7]


def test_top_out_degree_k_too_large():
    g = ic.graph_from_edges([(0, 1, 0.5)])
    with pytest.raises(GraphError):
        ic.select_seeds(g, ic.SeedStrategy.top_out_degree(5))


def test_greedy_im_two_disjoint_stars():
    # two certain stars: center 0 covers 5 leaves, center 1 covers 3
    edges = [(0, v, 1.0) for v in range(2, 7)] + [(1, v, 1.0) for v in range(7, 10)]
    g = ic.graph_from_edges(edges, node_count=10)
    seeds = ic.select_seeds(
        g, ic.SeedStrategy.greedy_im(2, rr_budget=2000), rng=np.random.default_rng(1)
    )
    assert list(seeds) == [0, 1]  # larger star first


def test_greedy_im_needs_rng():
    g = ic.graph_from_edges([(0, 1, 0.5)])
    with pytest.raises(GraphError):
        ic.select_seeds(g, ic.SeedStrategy.greedy_im(1, 10))


def test_greedy_im_coverage_monotone():
    g = ic.assign_weighted_cascade(ic.generate_erdos_renyi(60, 4, rng_seed=3))
    rng = np.random.default_rng(5)
    rr_sets = [
        ic.bench._reverse_reachable_nodes(g, int(rng.integers(60)), rng)
        for _ in range(500)
    ]
    seeds = ic.select_seeds(g, ic.SeedStrategy.greedy_im(5, 500),
                            rng=np.random.default_rng(5))
    # marginal coverage of the drawn sets is non-increasing along the pick order
    covered: set[int] = set()
    gains = []
    for t in seeds:
        newly = [i for i, rr in enumerate(rr_sets) if i not in covered and t in rr]
        gains.append(len(newly))
        covered.update(newly)
    assert all(gains[i] >= gains[i + 1] for i in range(len(gains) - 1))


def test_explicit_seed_file(tmp_path, diamond):
    g, _ = diamond
    p = tmp_path / "seeds.txt"
    p.write_text("t2\nt1\n", encoding="utf-8")
    seeds = ic.select_seeds(g, ic.SeedStrategy.explicit_file(p))
    assert [g.labels[t] for t in seeds] == ["t2", "t1"]
    p2 = tmp_path / "bad.txt"
    p2.write_text("nope\n", encoding="utf-8")
    with pytest.raises(GraphError, match="unknown node label"):
        ic.select_seeds(g, ic.SeedStrategy.explicit_file(p2))


def test_seed_strategy_parse():
    s = ic.SeedStrategy.parse("top-degree:5")
    assert (s.kind, s.k) == ("top-out-degree", 5)
    s = ic.SeedStrategy.parse("greedy-im:3:1000")
    assert (s.kind, s.k, s.rr_budget) == ("greedy-im", 3, 1000)
    with pytest.raises(GraphError):
        ic.SeedStrategy.parse("magic:1")


# -- pagerank -------------------------------------------------------------------


def test_pagerank_two_cycle():
    g = ic.graph_from_edges([(0, 1, 0.5), (1, 0, 0.5)])
    pr = ic.pagerank(g)
    assert pr[0] == pytest.approx(0.5, abs=1e-9)
    assert pr[1] == pytest.approx(0.5, abs=1e-9)


def test_pagerank_isolated_node_normalization():
    g = ic.graph_from_edges([(0, 1, 0.5), (1, 0, 0.5)], node_count=3)
    pr = ic.pagerank(g)
    assert sum(pr.values()) == pytest.approx(1.0, abs=1e-9)
    # fixpoint of "teleport share plus damped third of its own dangling mass"
    d = 0.85
    assert pr[2] == pytest.approx((1 - d) / (3 - d), abs=1e-9)
    assert pr[2] < pr[0]


def test_pagerank_relabel_invariance():
    rng = np.random.default_rng(7)
    g = ic.generate_erdos_renyi(40, 3, rng_seed=9)
    perm = rng.permutation(40)
    remapped = ic.DirectedGraph(
        40, perm[g.edge_src], perm[g.edge_dst], g.edge_prob,
    )
    pr = ic.pagerank(g)
    pr2 = ic.pagerank(remapped)
    for v in range(40):
        assert pr2[int(perm[v])] == pytest.approx(pr[v], abs=1e-12)


# -- average relative error ---------------------------------------------------------


def _report(values):
    return ic.ShapleyReport(values=dict(values), algorithm="test", params={})


def test_are_identical_reports():
    r = _report({1: 0.5, 2: 1.5})
    summary = ic.average_relative_error(r, r)
    assert summary.avg_relative_error == 0.0
    assert summary.excluded_zero_truth == 0


def test_are_arithmetic():
    truth = _report({1: 1.0, 2: 2.0})
    est = _report({1: 1.1, 2: 1.8})
    summary = ic.average_relative_error(est, truth)
    assert summary.avg_relative_error == pytest.approx(0.1, abs=1e-12)
    assert summary.per_seed_errors[1] == pytest.approx(0.1, abs=1e-12)
    assert summary.per_seed_errors[2] == pytest.approx(0.1, abs=1e-12)


def test_are_excludes_zero_truth():
    truth = _report({1: 0.0, 2: 2.0})
    est = _report({1: 0.3, 2: 2.2})
    summary = ic.average_relative_error(est, truth)
    assert summary.excluded_zero_truth == 1
    assert summary.avg_relative_error == pytest.approx(0.1, abs=1e-12)
    assert 1 not in summary.per_seed_errors


def test_are_rejects_mismatched_seed_sets():
    with pytest.raises(GraphError):
        ic.average_relative_error(_report({1: 1.0}), _report({2: 1.0}))


# -- ground truth routing ----------------------------------------------------------


def test_ground_truth_single_step_routes_exact(diamond):
    g, seeds = diamond
    truth = ic.make_ground_truth(
        g, seeds, ic.TerminationPolicy.single_step(), np.random.default_rng(0)
    )
    assert truth.algorithm == "exact-single-step"
    for t in seeds:
        assert truth.values[t] == pytest.approx(0.75, abs=1e-12)


def test_ground_truth_small_multi_step_routes_enumeration(diamond):
    g, seeds = diamond
    truth = ic.make_ground_truth(g, seeds, COMPLETE, np.random.default_rng(0))
    assert truth.algorithm == "exact-live-edge-enumeration"
    ref = ic.shapley_bruteforce(g, seeds, COMPLETE)
    for t in seeds:
        assert truth.values[t] == pytest.approx(ref.values[t], abs=1e-12)


def test_ground_truth_large_routes_rr():
    g = ic.assign_weighted_cascade(ic.generate_erdos_renyi(150, 3, rng_seed=5))
    seeds = ic.select_seeds(g, ic.SeedStrategy.top_out_degree(4))
    truth = ic.make_ground_truth(g, seeds, COMPLETE, ic.spawn_rng(1, "gt"))
    assert truth.algorithm == "approx-rr-set"
    assert truth.params["epsilon"] == 0.01
    assert truth.params["ell"] == 1.0
    ref = ic.approx_rr_set(
        g, seeds, COMPLETE, ic.SampleBudget.explicit(300_000), ic.spawn_rng(2, "ref"),
    )
    for t in seeds:
        assert truth.values[t] == pytest.approx(ref.values[t], rel=0.05, abs=0.05)


def test_ground_truth_cache_round_trip(tmp_path, diamond):
    g, seeds = diamond
    a = ic.make_ground_truth(g, seeds, COMPLETE, np.random.default_rng(0),
                             cache_dir=tmp_path)
    files = list(tmp_path.glob("truth-*.json"))
    assert len(files) == 1
    b = ic.make_ground_truth(g, seeds, COMPLETE, np.random.default_rng(99),
                             cache_dir=tmp_path)
    assert a.values == b.values
    assert list(tmp_path.glob("truth-*.json")) == files
