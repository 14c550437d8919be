"""Command-line interface.

Subcommands: ``generate`` (random graphs), ``seeds`` (seed selection),
``attribute`` (one attribution run), ``compare`` (estimator vs. ground
truth), ``case-study`` (out-degree / PageRank / Shapley ranking table).

Output files are byte-deterministic for a fixed configuration and master
seed, independent of worker count; volatile data such as wall time goes to
stderr only.  Exit codes: 0 ok, 1 input/output error, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .approx import (
    BudgetCeilingError,
    SampleBudget,
    approx_live_edge,
    approx_permute_mc,
    approx_rr_set,
)
from .bench import (
    ErrorSummary,
    SeedStrategy,
    average_relative_error,
    load_seed_file,
    make_ground_truth,
    pagerank,
    select_seeds,
)
from .exact import (
    GuardExceededError,
    ShapleyReport,
    exact_single_step,
    shapley_bruteforce,
)
from .graph import (
    DirectedGraph,
    GraphError,
    SeedSet,
    TerminationPolicy,
    assign_uniform,
    assign_weighted_cascade,
    generate_erdos_renyi,
    load_edge_list,
    save_edge_list,
)
from .parallel import default_workers
from .rng import spawn_rng

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2

DEFAULT_SAMPLES = {
    "permute-mc": (500, 500),
    "live-edge": (5000,),
    "rr-set": (500_000,),
    "bruteforce": (10_000,),  # monte-carlo fallback mode only
}

ALGORITHMS = ("exact-single-step", "bruteforce", "permute-mc", "live-edge", "rr-set")


class ConfigError(ValueError):
    pass


# -- deterministic serialization --------------------------------------------


def format_value(x: float) -> str:
    """Floats are printed with 17 significant digits so runs are byte-comparable."""
    return f"{float(x):.17g}"


def to_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [
            f'{pad}  {json.dumps(str(k))}: {to_json(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        rows = [f"{pad}  {to_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return format_value(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(str(obj))


def _emit(payload_text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload_text)
    else:
        sys.stdout.write(payload_text)


def _log(msg: str) -> None:
    print(f"[icshapley] {msg}", file=sys.stderr)


# -- shared config -----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything one attribution run depends on."""

    graph_path: str
    prob_mode: str                      # "file" | "wc" | "uniform:<p>"
    seeds_path: Optional[str]
    seed_strategy: Optional[str]
    policy: TerminationPolicy
    algorithm: str
    budget: Optional[SampleBudget]
    rng_seed: int
    workers: int
    mc_samples: int

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "exact-single-step" and self.policy.kind != TerminationPolicy.SINGLE:
            raise ConfigError(
                "exact-single-step only supports --policy single; "
                "use bruteforce or a sampling estimator for multi-step runs"
            )
        if self.seeds_path is None and self.seed_strategy is None:
            raise ConfigError("one of --seeds or --seed-strategy is required")
        if self.seeds_path is not None and self.seed_strategy is not None:
            raise ConfigError("--seeds and --seed-strategy are mutually exclusive")


def _load_graph(path: str, prob_mode: str) -> DirectedGraph:
    if prob_mode == "file":
        return load_edge_list(path)
    g = load_edge_list(path, default_prob=1.0)
    if prob_mode == "wc":
        return assign_weighted_cascade(g)
    if prob_mode.startswith("uniform:"):
        return assign_uniform(g, float(prob_mode.split(":", 1)[1]))
    raise ConfigError(f"bad --prob {prob_mode!r}; expected file, wc or uniform:<p>")


def _resolve_seeds(cfg: RunConfig, graph: DirectedGraph) -> SeedSet:
    if cfg.seeds_path is not None:
        return load_seed_file(cfg.seeds_path, graph)
    try:
        strategy = SeedStrategy.parse(cfg.seed_strategy)
    except GraphError as exc:
        raise ConfigError(str(exc)) from None
    return select_seeds(graph, strategy, rng=spawn_rng(cfg.rng_seed, "seed-selection"))


def _parse_counts(text: str, algo: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad --samples {text!r}") from None
    if algo == "permute-mc":
        if len(counts) == 1:
            counts = (counts[0], DEFAULT_SAMPLES["permute-mc"][1])
        if len(counts) != 2:
            raise ConfigError("permute-mc --samples takes `nperm,nmc`")
    elif len(counts) != 1:
        raise ConfigError(f"{algo} --samples takes a single count")
    return counts


def _build_budget(args, algo: str) -> Optional[SampleBudget]:
    wants_budget = algo in ("permute-mc", "live-edge", "rr-set")
    if args.epsilon is not None:
        if not wants_budget:
            raise ConfigError(f"--epsilon does not apply to {algo}")
        if algo == "rr-set":
            return SampleBudget.guarantee(args.epsilon, ell=args.ell, k=args.topk)
        if args.delta is None:
            raise ConfigError(f"{algo} guarantee mode needs --delta")
        return SampleBudget.guarantee(args.epsilon, delta=args.delta)
    if not wants_budget:
        return None
    counts = (
        _parse_counts(args.samples, algo)
        if args.samples is not None
        else DEFAULT_SAMPLES[algo]
    )
    return SampleBudget.explicit(*counts)


def run_attribution(cfg: RunConfig, graph: DirectedGraph, seeds: SeedSet) -> ShapleyReport:
    rng = spawn_rng(cfg.rng_seed, "attribute", cfg.algorithm)
    if cfg.algorithm == "exact-single-step":
        return exact_single_step(graph, seeds)
    if cfg.algorithm == "bruteforce":
        return shapley_bruteforce(
            graph, seeds, cfg.policy,
            n_samples=cfg.mc_samples, rng=rng, workers=cfg.workers,
        )
    runner = {
        "permute-mc": approx_permute_mc,
        "live-edge": approx_live_edge,
        "rr-set": approx_rr_set,
    }[cfg.algorithm]
    return runner(graph, seeds, cfg.policy, cfg.budget, rng, workers=cfg.workers)


def _values_by_label(report: ShapleyReport, graph: DirectedGraph) -> list[dict]:
    rows = [
        {"seed": graph.labels[t], "value": float(v)}
        for t, v in report.values.items()
    ]
    rows.sort(key=lambda r: r["seed"])
    return rows


def _attribution_payload(cfg: RunConfig, graph: DirectedGraph, report: ShapleyReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "attribution",
        "algorithm": report.algorithm,
        "policy": cfg.policy.label(),
        "graph": {
            "path": cfg.graph_path,
            "nodes": graph.node_count,
            "edges": graph.edge_count,
            "prob_mode": cfg.prob_mode,
        },
        "seed_source": cfg.seeds_path or cfg.seed_strategy,
        "rng_seed": cfg.rng_seed,
        "params": dict(report.params),
        "values": _values_by_label(report, graph),
    }


def _render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(payload) + "\n"
    rows = payload.get("values") or payload.get("rows") or []
    if fmt == "csv":
        if not rows:
            return ""
        header = list(rows[0].keys())
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(
                format_value(v) if isinstance(v, float) else str(v) for v in r.values()
            ))
        return "\n".join(lines) + "\n"
    if fmt == "table":
        if not rows:
            return "(empty)\n"
        header = list(rows[0].keys())
        cells = [
            [format_value(v) if isinstance(v, float) else str(v) for v in r.values()]
            for r in rows
        ]
        widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(header)]
        out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for c in cells:
            out.append("  ".join(x.ljust(w) for x, w in zip(c, widths)))
        return "\n".join(out) + "\n"
    raise ConfigError(f"bad --format {fmt!r}")


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.prob == "file":
        raise ConfigError("generate needs --prob wc or uniform:<p>")
    g = generate_erdos_renyi(args.nodes, args.avg_degree, args.rng_seed)
    if args.prob == "wc":
        g = assign_weighted_cascade(g)
    elif args.prob.startswith("uniform:"):
        g = assign_uniform(g, float(args.prob.split(":", 1)[1]))
    else:
        raise ConfigError(f"bad --prob {args.prob!r}")
    save_edge_list(g, args.out)
    _log(f"wrote {g.edge_count} edges over {g.node_count} nodes to {args.out}")
    return EXIT_OK


def cmd_seeds(args) -> int:
    graph = _load_graph(args.graph, args.prob)
    strategy = SeedStrategy.parse(args.seed_strategy)
    seeds = select_seeds(graph, strategy, rng=spawn_rng(args.rng_seed, "seed-selection"))
    text = "".join(f"{graph.labels[t]}\n" for t in seeds)
    _emit(text, args.out)
    _log(f"selected {len(seeds)} seeds via {args.seed_strategy}")
    return EXIT_OK


def _parse_policy(text: str) -> TerminationPolicy:
    try:
        return TerminationPolicy.parse(text)
    except GraphError as exc:
        raise ConfigError(str(exc)) from None


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        graph_path=args.graph,
        prob_mode=args.prob,
        seeds_path=args.seeds,
        seed_strategy=args.seed_strategy,
        policy=_parse_policy(args.policy),
        algorithm=args.algo,
        budget=None,
        rng_seed=args.rng_seed,
        workers=args.workers,
        mc_samples=int(args.samples.split(",")[0]) if args.samples else DEFAULT_SAMPLES["bruteforce"][0],
    )
    cfg.budget = _build_budget(args, cfg.algorithm)
    cfg.validate()
    return cfg


def cmd_attribute(args) -> int:
    cfg = _config_from_args(args)
    graph = _load_graph(cfg.graph_path, cfg.prob_mode)
    seeds = _resolve_seeds(cfg, graph)
    report = run_attribution(cfg, graph, seeds)
    payload = _attribution_payload(cfg, graph, report)
    _emit(_render(payload, args.format), args.out)
    _log(f"{report.algorithm} on {len(seeds)} seeds finished in {report.elapsed:.3f}s")
    return EXIT_OK


def _load_truth_file(path: str, graph: DirectedGraph) -> ShapleyReport:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    values = {graph.id_of(row["seed"]): float(row["value"]) for row in doc["values"]}
    return ShapleyReport(values=values, algorithm=doc.get("algorithm", "file"),
                         params=doc.get("params", {}))


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    graph = _load_graph(cfg.graph_path, cfg.prob_mode)
    seeds = _resolve_seeds(cfg, graph)
    if args.truth:
        truth = _load_truth_file(args.truth, graph)
    else:
        truth = make_ground_truth(
            graph, seeds, cfg.policy,
            spawn_rng(cfg.rng_seed, "ground-truth"),
            cache_dir=args.cache_dir, workers=cfg.workers,
        )
        _log(f"ground truth via {truth.algorithm}")

    summaries: list[ErrorSummary] = []
    per_seed_sums: dict[int, float] = {t: 0.0 for t in seeds}
    for rep in range(args.repeats):
        rng = spawn_rng(cfg.rng_seed, "compare", cfg.algorithm, rep)
        if cfg.algorithm == "exact-single-step":
            estimate = exact_single_step(graph, seeds)
        elif cfg.algorithm == "bruteforce":
            estimate = shapley_bruteforce(
                graph, seeds, cfg.policy, n_samples=cfg.mc_samples, rng=rng,
                workers=cfg.workers,
            )
        else:
            runner = {
                "permute-mc": approx_permute_mc,
                "live-edge": approx_live_edge,
                "rr-set": approx_rr_set,
            }[cfg.algorithm]
            estimate = runner(graph, seeds, cfg.policy, cfg.budget, rng, workers=cfg.workers)
        summary = average_relative_error(estimate, truth)
        summaries.append(summary)
        for t, e in summary.per_seed_errors.items():
            per_seed_sums[t] += e

    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "comparison",
        "algorithm": cfg.algorithm,
        "policy": cfg.policy.label(),
        "ground_truth_source": summaries[0].ground_truth_source,
        "repeats": [
            {
                "avg_relative_error": s.avg_relative_error,
                "excluded_zero_truth": s.excluded_zero_truth,
            }
            for s in summaries
        ],
        "mean_avg_relative_error": float(
            np.mean([s.avg_relative_error for s in summaries])
        ),
    }
    if args.per_seed:
        payload["per_seed_mean_relative_error"] = [
            {"seed": graph.labels[t], "value": per_seed_sums[t] / args.repeats}
            for t in sorted(per_seed_sums, key=lambda t: graph.labels[t])
            if t in summaries[0].per_seed_errors
        ]
    _emit(_render(payload, args.format), args.out)
    _log(f"mean avg relative error {payload['mean_avg_relative_error']:.4f} "
         f"over {args.repeats} repeats")
    return EXIT_OK


def _rank_by_value(rows: list[dict], value_key: str, rank_key: str) -> None:
    order = sorted(rows, key=lambda r: (-r[value_key], r["seed"]))
    for i, r in enumerate(order):
        r[rank_key] = i + 1


def cmd_case_study(args) -> int:
    graph = _load_graph(args.graph, args.prob)
    if args.topk > graph.node_count:
        raise ConfigError(f"--topk {args.topk} exceeds node count {graph.node_count}")
    policy = _parse_policy(args.policy)
    if args.algo == "exact-single-step" and policy.kind != TerminationPolicy.SINGLE:
        raise ConfigError("exact-single-step only supports --policy single")
    seeds = select_seeds(graph, SeedStrategy.top_out_degree(args.topk))
    outdeg = {t: graph.out_degree(t) for t in seeds}

    pr = pagerank(graph)
    cfg = RunConfig(
        graph_path=args.graph, prob_mode=args.prob, seeds_path=None,
        seed_strategy=f"top-degree:{args.topk}", policy=policy, algorithm=args.algo,
        budget=_build_budget(args, args.algo), rng_seed=args.rng_seed,
        workers=args.workers, mc_samples=DEFAULT_SAMPLES["bruteforce"][0],
    )
    report = run_attribution(cfg, graph, seeds)

    rows = [
        {
            "seed": graph.labels[t],
            "out_degree": outdeg[t],
            "out_degree_rank": 0,
            "pagerank": pr[t],
            "pagerank_rank": 0,
            "shapley": report.values[t],
            "shapley_rank": 0,
        }
        for t in seeds
    ]
    _rank_by_value(rows, "out_degree", "out_degree_rank")
    _rank_by_value(rows, "pagerank", "pagerank_rank")
    _rank_by_value(rows, "shapley", "shapley_rank")
    rows.sort(key=lambda r: r["out_degree_rank"])

    notes = []
    degs = [r["out_degree"] for r in rows]
    if len(set(degs)) < len(degs):
        notes.append("out-degree ties broken by ascending node label")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "case-study",
        "k": args.topk,
        "policy": policy.label(),
        "algorithm": report.algorithm,
        "rng_seed": args.rng_seed,
        "notes": notes,
        "rows": rows,
    }
    _emit(_render(payload, args.format), args.out)
    _log(f"case study over top-{args.topk} out-degree seeds done")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _add_common_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--prob", default="file",
                   help="edge probabilities: file, wc, or uniform:<p> (default: file)")
    p.add_argument("--rng-seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $ICSHAPLEY_WORKERS or 1)")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", default="json", choices=("json", "csv", "table"))


def _add_budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", default=None,
                   help="explicit sample budget; permute-mc takes `nperm,nmc`")
    p.add_argument("--epsilon", type=float, default=None,
                   help="guarantee-mode error bound")
    p.add_argument("--delta", type=float, default=None,
                   help="guarantee-mode failure probability (permute-mc, live-edge)")
    p.add_argument("--ell", type=float, default=1.0,
                   help="rr-set confidence exponent (default: 1)")
    p.add_argument("--topk", type=int, default=1,
                   help="rr-set guarantee pivot: k-th largest value (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="icshapley",
        description="Shapley-value influence attribution under the independent cascade model",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random graph as an edge list")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--avg-degree", type=float, required=True)
    g.add_argument("--prob", default="wc", help="wc or uniform:<p> (default: wc)")
    g.add_argument("--rng-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("seeds", help="select and print a seed set")
    _add_common_io(s)
    s.add_argument("--seed-strategy", required=True,
                   help="top-degree:<k> or greedy-im:<k>:<rr_budget>")
    s.set_defaults(func=cmd_seeds)

    for name, fn, extra in (
        ("attribute", cmd_attribute, False),
        ("compare", cmd_compare, True),
    ):
        p = sub.add_parser(name, help=f"{name} run")
        _add_common_io(p)
        p.add_argument("--seeds", default=None, help="seed file: one label per line")
        p.add_argument("--seed-strategy", default=None,
                       help="top-degree:<k> or greedy-im:<k>:<rr_budget>")
        p.add_argument("--policy", default="complete", help="single, k:<K> or complete")
        p.add_argument("--algo", required=True, choices=ALGORITHMS)
        _add_budget_flags(p)
        if extra:
            p.add_argument("--truth", default=None,
                           help="attribution JSON to use as ground truth")
            p.add_argument("--cache-dir", default=None,
                           help="directory for cached ground-truth reports")
            p.add_argument("--repeats", type=int, default=5)
            p.add_argument("--per-seed", action="store_true",
                           help="include the per-seed error table")
        p.set_defaults(func=fn)

    c = sub.add_parser("case-study", help="rank seeds by degree, PageRank and Shapley")
    _add_common_io(c)
    c.add_argument("--topk", type=int, required=True)
    c.add_argument("--policy", default="complete")
    c.add_argument("--algo", default="live-edge", choices=ALGORITHMS)
    c.add_argument("--samples", default=None)
    c.add_argument("--epsilon", type=float, default=None)
    c.add_argument("--delta", type=float, default=None)
    c.add_argument("--ell", type=float, default=1.0)
    c.set_defaults(func=cmd_case_study)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "workers", None) is None:
        args.workers = default_workers()
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except BudgetCeilingError as exc:
        _log(f"refused: {exc}")
        return EXIT_CONFIG
    except GuardExceededError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return EXIT_IO
    except GraphError as exc:
        _log(f"input error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
