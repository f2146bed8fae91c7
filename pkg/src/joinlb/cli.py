"""Command-line interface.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 a lower bound exceeded a
provided true cardinality.
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from collections import defaultdict
from importlib import resources
from pathlib import Path

import jsonschema

from . import bounds, oracle
from .builder import IngestError, build_catalog_from_plan
from .model import (
    BuildConfig,
    CatalogError,
    JoinQuery,
    QueryError,
    load_catalog,
    query_from_json,
    query_to_json,
    save_catalog,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BREACH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _schema(name: str) -> dict:
    return json.loads(resources.files("joinlb").joinpath("schemas", name).read_text())


def load_queries(path) -> list[JoinQuery]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        jsonschema.validate(doc, _schema("query.schema.json"))
    except jsonschema.ValidationError as exc:
        raise QueryError(f"{path}: {exc.message}") from None
    return [query_from_json(q, default_id=str(i)) for i, q in enumerate(doc["queries"])]


def _result_record(q: JoinQuery, res: bounds.BoundResult) -> dict:
    return {
        "query_id": q.id,
        "lower_bound": res.lower_bound,
        "m": res.m,
        "winning_candidate": res.winning_candidate,
        "candidates": res.candidates,
    }


# ---------------------------------------------------------------------------


def cmd_build(args) -> int:
    config = BuildConfig(args.partitions, args.mcvs, args.histogram_buckets)
    plan = json.loads(Path(args.plan).read_text())
    try:
        jsonschema.validate(plan, _schema("ingest.schema.json"))
    except jsonschema.ValidationError as exc:
        raise IngestError(f"{args.plan}: {exc.message}") from None
    catalog, report = build_catalog_from_plan(args.plan, config)
    save_catalog(catalog, args.out)
    print(report.render())
    print(f"catalog written to {args.out} ({Path(args.out).stat().st_size} bytes)")
    return EXIT_OK


def cmd_estimate(args) -> int:
    catalog = load_catalog(args.catalog)
    queries = load_queries(args.queries)
    status = EXIT_OK
    rows = []
    for q in queries:
        try:
            res = bounds.estimate(catalog, q, args.mode, args.perm_cap)
        except QueryError as exc:
            rows.append({"query_id": q.id, "error": str(exc)})
            status = EXIT_DATA
            continue
        rows.append(_result_record(q, res))
    if args.pretty:
        print(f"{'query':<12} {'lower bound':>14} {'m':>10} {'winner':<11}")
        for r in rows:
            if "error" in r:
                print(f"{r['query_id']:<12} error: {r['error']}")
            else:
                print(f"{r['query_id']:<12} {r['lower_bound']:>14} {r['m']:>10} {r['winning_candidate']:<11}")
    else:
        for r in rows:
            print(json.dumps(r))
    return status


def cmd_bench(args) -> int:
    catalog = load_catalog(args.catalog)
    queries = load_queries(args.queries)
    for q in queries:
        if q.true_cardinality is None or q.system_estimate is None:
            raise QueryError(f"query {q.id}: bench needs true_cardinality and system_estimate")
    groups: dict[int, list[dict]] = defaultdict(list)
    breaches = []
    for q in queries:
        res = bounds.estimate(catalog, q, args.mode, args.perm_cap)
        if res.lower_bound > q.true_cardinality:
            breaches.append((q.id, res.lower_bound, q.true_cardinality))
        clipped = bounds.clip(q.system_estimate, res)
        groups[q.n - 1].append(
            {
                "violation": q.system_estimate < res.lower_bound,
                "under": q.system_estimate < q.true_cardinality,
                "q_before": bounds.q_error(q.system_estimate, q.true_cardinality),
                "q_after": bounds.q_error(clipped, q.true_cardinality),
            }
        )
    summary = []
    for joins in sorted(groups):
        g = groups[joins]
        summary.append(
            {
                "joins": joins,
                "queries": len(g),
                "underestimated_pct": 100.0 * sum(r["under"] for r in g) / len(g),
                "below_bound_pct": 100.0 * sum(r["violation"] for r in g) / len(g),
                "median_q_error": statistics.median(r["q_before"] for r in g),
                "median_q_error_clipped": statistics.median(r["q_after"] for r in g),
            }
        )
    if args.pretty:
        print(f"{'joins':>5} {'queries':>8} {'underest.':>10} {'< bound':>8} {'median q':>10} {'clipped':>10}")
        for s in summary:
            print(
                f"{s['joins']:>5} {s['queries']:>8} {s['underestimated_pct']:>9.1f}% {s['below_bound_pct']:>7.1f}% "
                f"{s['median_q_error']:>10.2f} {s['median_q_error_clipped']:>10.2f}"
            )
    else:
        for s in summary:
            print(json.dumps(s))
    for qid, lb, truth in breaches:
        print(f"SOUNDNESS BREACH: query {qid}: lower bound {lb} > true cardinality {truth}", file=sys.stderr)
    return EXIT_BREACH if breaches else EXIT_OK


def explain_text(q: JoinQuery, res: bounds.BoundResult, perm_cap: int, max_cells: int = 20) -> str:
    out = [f"query {q.id} (mode={res.mode}, perm_cap={perm_cap}, {q.n} relation(s))", "resolved contexts:"]
    for ref, rr in zip(q.relations, res.resolved):
        parts = f" {rr.combine} of " if rr.combine != "single" else " "
        desc = "; ".join(
            f"{p.describe()} l0={p.l0} rows={p.context.profile.row_count}" for p in rr.parts
        )
        out.append(f"  {ref.label}.{ref.join_column}:{parts}{desc}")
    out.append(f"(a) joining keys: m = {res.m}")
    if res.m == 0:
        out.append("  no key is guaranteed to appear in every relation; lower bound is 0")
        out.append("lower bound: 0 (m)")
        return "\n".join(out)
    positive = [c for c in res.cells if c.intersection_lb > 0]
    out.append(f"  {len(res.cells)} cell(s), {len(positive)} contributing")
    for c in positive[:max_cells]:
        out.append(f"  cell [{c.lo}, {c.hi}]: per-set lb {list(c.relation_lbs)} -> {c.intersection_lb}")
    if len(positive) > max_cells:
        out.append(f"  ... {len(positive) - max_cells} more")
    out.append(f"(b) norms at prefix {res.m}:")
    for ref, e in zip(q.relations, res.estimates):
        out.append(
            f"  {ref.label}: l1 >= {e.l1_lb}, l2 >= {e.l2_lb:.4f} (l2sq >= {e.l2sq_lb}), "
            f"linf in [{e.linf_lb}, {e.linf_ub}], lminf >= {e.lminf_lb}"
        )
    out.append("(c) candidates:")
    out.append(f"  m           {res.m_bound}")
    if res.holder_bound is not None:
        out.append(f"  holder      {res.holder_bound:.4f}  ordering {', '.join(res.ordering)}")
    out.append(f"  min_degree  {res.min_degree_bound}")
    out.append(f"lower bound: {res.lower_bound} ({res.winning_candidate})")
    return "\n".join(out)


def cmd_explain(args) -> int:
    catalog = load_catalog(args.catalog)
    queries = load_queries(args.queries)
    if args.query_id is not None:
        queries = [q for q in queries if q.id == args.query_id]
        if not queries:
            raise QueryError(f"no query with id {args.query_id!r}")
    elif len(queries) != 1:
        raise QueryError("query file holds several queries; pick one with --query-id")
    q = queries[0]
    res = bounds.estimate(catalog, q, args.mode, args.perm_cap, keep_cells=True)
    print(explain_text(q, res, args.perm_cap))
    return EXIT_OK


def cmd_generate(args) -> int:
    """Synthetic instance as CSVs plus random queries with exact cardinalities."""
    import numpy as np

    spec = oracle.InstanceSpec(
        relations=args.relations,
        key_range=args.key_range,
        rows=(args.rows,),
        skew=args.skew,
        overlap=args.overlap,
        seed=args.seed,
    )
    inst = oracle.generate_instance(spec)
    out = Path(args.out)
    plan = oracle.dump_instance(inst, out)
    rng = np.random.default_rng(args.seed + 1)
    queries = []
    for i in range(args.queries):
        n = int(rng.integers(1, args.relations + 1))
        names = sorted(rng.choice(inst.names, size=n, replace=False).tolist())
        rels = []
        for name in names:
            r = rng.random()
            if r < 0.4:
                pred = None
            elif r < 0.7:
                pred = {"op": "eq", "column": "p0", "value": int(rng.integers(0, 3))}
            else:
                lo = int(rng.integers(0, 10))
                pred = {"op": "range", "column": "p0", "lo": lo, "hi": lo + int(rng.integers(0, 10))}
            rels.append({"name": name, "join_column": "x", "predicate": pred})
        q = query_from_json({"id": f"q{i}", "relations": rels})
        truth = oracle.true_join_size(inst, q)
        doc = query_to_json(q)
        doc["true_cardinality"] = truth
        doc["system_estimate"] = round(truth * float(rng.choice([0.1, 0.5, 1.0, 2.0])), 3)
        queries.append(doc)
    (out / "queries.json").write_text(json.dumps({"queries": queries}, indent=1))
    print(f"wrote {plan} and {out / 'queries.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="joinlb", description="Provable lower bounds on same-key multi-way join sizes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="build a statistics catalog from CSV files")
    b.add_argument("plan", help="ingest plan (JSON)")
    b.add_argument("--partitions", type=int, default=256)
    b.add_argument("--mcvs", type=int, default=5000)
    b.add_argument("--histogram-buckets", type=int, default=128)
    b.add_argument("--out", required=True, help="catalog file to write")
    b.set_defaults(func=cmd_build)

    def estimator_flags(sp):
        sp.add_argument("catalog")
        sp.add_argument("queries", help="query file (JSON)")
        sp.add_argument("--mode", choices=("strict", "paper"), default="strict")
        sp.add_argument("--perm-cap", type=int, default=bounds.PERM_CAP)

    e = sub.add_parser("estimate", help="print a lower bound per query (JSON lines)")
    estimator_flags(e)
    e.add_argument("--pretty", action="store_true")
    e.set_defaults(func=cmd_estimate)

    be = sub.add_parser("bench", help="bound violations and q-error before/after clipping")
    estimator_flags(be)
    be.add_argument("--pretty", action="store_true")
    be.set_defaults(func=cmd_bench)

    x = sub.add_parser("explain", help="show how a single query's bound is derived")
    estimator_flags(x)
    x.add_argument("--query-id")
    x.set_defaults(func=cmd_explain)

    g = sub.add_parser("generate", help="write a synthetic instance and a query workload")
    g.add_argument("out")
    g.add_argument("--relations", type=int, default=3)
    g.add_argument("--key-range", type=int, default=1000)
    g.add_argument("--rows", type=int, default=5000)
    g.add_argument("--skew", type=float, default=2.0)
    g.add_argument("--overlap", type=float, default=0.8)
    g.add_argument("--queries", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "perm_cap", 2) < 2:
        print("joinlb: error: --perm-cap must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "build" and (args.partitions < 1 or args.mcvs < 0 or args.histogram_buckets < 1):
        print("joinlb: error: --partitions and --histogram-buckets must be >= 1, --mcvs >= 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (IngestError, CatalogError, QueryError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"joinlb: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
