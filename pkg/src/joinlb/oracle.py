"""Brute-force ground truth: exact join sizes, prefix norms and synthetic instances.

Nothing here is used by the estimator; these functions exist to check it.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .builder import Table
from .model import And, Eq, JoinQuery, Or, Range


@dataclass(frozen=True)
class InstanceSpec:
    """Parameters of a synthetic database with one shared join key ``x``.

    ``overlap`` in [0, 1] is the fraction of key range shared by consecutive
    relations (0 gives disjoint ranges).  ``skew`` is the mean extra degree of
    a geometric distribution; 0 gives uniform degrees.
    """

    relations: int = 2
    key_range: int = 100
    rows: Sequence[int] = (200, 200)
    skew: float = 1.0
    overlap: float = 1.0
    density: float = 0.7
    base_degree: int = 1
    predicate_columns: int = 1
    predicate_domain: int = 20
    null_fraction: float = 0.0
    pin_range: bool = False
    seed: int = 0


@dataclass
class Instance:
    tables: dict[str, Table]
    spec: Optional[InstanceSpec] = None
    names: list[str] = field(default_factory=list)


def generate_instance(spec: InstanceSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)
    width = spec.key_range
    shift = int(round((1.0 - spec.overlap) * width))
    tables = {}
    names = []
    for i in range(spec.relations):
        name = f"R{i}"
        names.append(name)
        lo = 1 + i * shift
        rows = int(spec.rows[i % len(spec.rows)])
        present = np.nonzero(rng.random(width) < spec.density)[0] + lo
        if spec.pin_range:
            present = np.union1d(present, [lo, lo + width - 1])
        if present.size == 0:
            present = np.array([lo])
        if spec.skew > 0:
            deg = spec.base_degree - 1 + rng.geometric(1.0 / (1.0 + spec.skew), size=present.size)
        else:
            deg = np.full(present.size, spec.base_degree)
        keys = np.repeat(present, deg)
        if spec.skew > 0 and keys.size > rows and not spec.pin_range:
            keys = rng.choice(keys, size=rows, replace=False)
        rng.shuffle(keys)
        cols = {"x": keys}
        valid = {"x": rng.random(keys.size) >= spec.null_fraction}
        for p in range(spec.predicate_columns):
            # zipf-like values so that a few values dominate
            vals = np.minimum(rng.zipf(1.6, size=keys.size), spec.predicate_domain) - 1
            cols[f"p{p}"] = vals
            valid[f"p{p}"] = rng.random(keys.size) >= spec.null_fraction
        tables[name] = Table.from_arrays(name, cols, ["x"], valid)
    return Instance(tables, spec, names)


# ---------------------------------------------------------------------------
# predicates, evaluated row by row


def _atom_holds(pred, value: int, is_valid: bool) -> bool:
    if not is_valid:
        return False
    if isinstance(pred, Eq):
        return value == pred.value
    return pred.lo <= value <= pred.hi


def row_qualifies(pred, row: dict, valid: dict) -> bool:
    if pred is None:
        return True
    if isinstance(pred, (Eq, Range)):
        return _atom_holds(pred, row[pred.column], valid[pred.column])
    if isinstance(pred, And):
        return all(_atom_holds(p, row[p.column], valid[p.column]) for p in pred.items)
    if isinstance(pred, Or):
        return any(_atom_holds(p, row[p.column], valid[p.column]) for p in pred.items)
    raise TypeError(pred)


def qualifying_keys(table: Table, join_column: str, pred) -> list[int]:
    cols = {c: a.tolist() for c, a in table.columns.items()}
    valid = {c: a.tolist() for c, a in table.valid.items()}
    out = []
    for i in range(table.row_count):
        if not valid[join_column][i]:
            continue
        row = {c: cols[c][i] for c in cols}
        vrow = {c: valid[c][i] for c in valid}
        if row_qualifies(pred, row, vrow):
            out.append(row[join_column])
    return out


def _filtered(instance: Instance, query: JoinQuery) -> list[list[int]]:
    return [qualifying_keys(instance.tables[r.name], r.join_column, r.predicate) for r in query.relations]


def true_join_size(instance: Instance, query: JoinQuery) -> int:
    """Bag-semantics join size: sum over shared keys of the product of degrees."""
    degs = [Counter(keys) for keys in _filtered(instance, query)]
    shared = set(degs[0])
    for d in degs[1:]:
        shared &= set(d)
    return sum(math.prod(d[k] for d in degs) for k in shared)


def hash_join_size(instance: Instance, query: JoinQuery) -> int:
    """Same quantity by folding pairwise hash joins over the filtered rows."""
    rels = _filtered(instance, query)
    acc: dict[int, int] = {}
    for k in rels[0]:
        acc[k] = acc.get(k, 0) + 1
    for rows in rels[1:]:
        nxt: dict[int, int] = {}
        for k in rows:
            hit = acc.get(k)
            if hit:
                nxt[k] = nxt.get(k, 0) + hit
        acc = nxt
    return sum(acc.values())


def true_joining_keys(instance: Instance, query: JoinQuery) -> int:
    sets = [set(keys) for keys in _filtered(instance, query)]
    return len(set.intersection(*sets))


def true_degree_sequence(keys: Sequence[int]) -> list[int]:
    return sorted(Counter(keys).values())


# ---------------------------------------------------------------------------
# degree-sequence oracles


def crosswise_lb(a: Sequence[int], b: Sequence[int], m: int) -> int:
    """Dot product of the first ``m`` entries of two ascending sequences, one reversed."""
    if m > len(a) or m > len(b):
        raise ValueError("prefix longer than a sequence")
    return sum(a[i] * b[m - 1 - i] for i in range(m))


def elementwise_ub(a: Sequence[int], b: Sequence[int]) -> int:
    """Largest dot product over key assignments: both sequences sorted the same way."""
    n = min(len(a), len(b))
    return sum(x * y for x, y in zip(sorted(a)[-n:], sorted(b)[-n:]))


def exact_prefix_norms(seq: Sequence[int], m: int) -> tuple[int, float, int, int]:
    """``(l1, l2, linf, lminf)`` of the first ``m`` entries."""
    if not 1 <= m <= len(seq):
        raise ValueError("bad prefix length")
    head = list(seq[:m])
    return sum(head), math.sqrt(sum(v * v for v in head)), max(head), min(head)


# ---------------------------------------------------------------------------
# CSV export


def dump_instance(instance: Instance, directory) -> Path:
    """Write one CSV per table plus an ``ingest.json`` plan; returns the plan path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    plan = {"tables": {}}
    for name, t in instance.tables.items():
        path = directory / f"{name}.csv"
        cols = list(t.columns)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            data = [t.columns[c].tolist() for c in cols]
            valid = [t.valid[c].tolist() for c in cols]
            for i in range(t.row_count):
                fh.write(",".join(str(data[j][i]) if valid[j][i] else "" for j in range(len(cols))) + "\n")
        plan["tables"][name] = {
            "path": path.name,
            "columns": {c: ("key" if c in t.key_columns else "int") for c in cols},
        }
    plan_path = directory / "ingest.json"
    plan_path.write_text(json.dumps(plan, indent=2))
    return plan_path


# ---------------------------------------------------------------------------
# randomized workloads

PREDICATE_KINDS = ("none", "mcv_hit", "mcv_miss", "range", "and", "or")


def _top_values(values: np.ndarray, valid: np.ndarray, k: int) -> list[int]:
    v = values[valid]
    if v.size == 0 or k <= 0:
        return []
    vals, counts = np.unique(v, return_counts=True)
    return vals[np.lexsort((vals, -counts))[:k]].tolist()


def random_predicate(rng: np.random.Generator, table: Table, kind: str, mcv_count: int, domain: int):
    col = "p0"
    if kind == "none" or col not in table.columns:
        return None
    top = _top_values(table.columns[col], table.valid[col], mcv_count)
    if kind == "mcv_hit":
        return Eq(col, int(rng.choice(top))) if top else Eq(col, 0)
    if kind == "mcv_miss":
        rest = [v for v in range(domain + 2) if v not in top]
        return Eq(col, int(rng.choice(rest)))

    def rand_range():
        lo = int(rng.integers(-1, domain))
        return Range(col, lo, lo + int(rng.integers(0, domain)))

    if kind == "range":
        return rand_range()
    if kind == "and":
        return And((rand_range(), rand_range()))
    if kind == "or":
        items = [rand_range() if rng.random() < 0.5 else Eq(col, int(rng.integers(0, domain))) for _ in range(2)]
        return Or(tuple(items))
    raise ValueError(kind)


def random_query(rng: np.random.Generator, instance: Instance, mcv_count: int, kinds=PREDICATE_KINDS) -> JoinQuery:
    from .model import RelationRef

    spec = instance.spec
    domain = spec.predicate_domain if spec else 20
    rels = []
    for name in instance.names:
        kind = str(rng.choice(kinds))
        rels.append(RelationRef(name, "x", random_predicate(rng, instance.tables[name], kind, mcv_count, domain)))
    return JoinQuery(tuple(rels))
