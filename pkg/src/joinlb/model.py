"""Core domain types and the persisted statistics catalog.

Degree statistics are stored as exact integers (``l1``, ``l2sq``, ``linf``
per prefix point); square roots are only taken by the bound engine.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Optional, Union

import numpy as np

SCHEMA_VERSION = 1

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class CatalogError(ValueError):
    """Malformed catalog file or a statistics object that violates its invariants."""


class QueryError(ValueError):
    """Query refers to unknown statistics or has an unsupported shape."""


# ---------------------------------------------------------------------------
# degree sequences and norm profiles


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    """Ascending per-key frequencies of a join column under some predicate."""

    degrees: np.ndarray
    context: str = "unfiltered"

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        object.__setattr__(self, "degrees", d)
        if d.size and (d[0] < 1 or np.any(np.diff(d) < 0)):
            raise ValueError("degree sequence must be positive and ascending")

    def __len__(self) -> int:
        return int(self.degrees.size)

    def __eq__(self, other):
        if not isinstance(other, DegreeSequence):
            return NotImplemented
        return np.array_equal(self.degrees, other.degrees)

    @property
    def l0(self) -> int:
        return len(self)


@dataclass(frozen=True)
class NormPoint:
    prefix_len: int
    l1: int
    l2sq: int
    linf: int


def stored_prefix_lengths(l0: int) -> list[int]:
    """Prefix lengths kept in a profile: powers of two up to ``l0`` plus ``l0``."""
    if l0 <= 0:
        return []
    out = []
    p = 1
    while p <= l0:
        out.append(p)
        p *= 2
    if out[-1] != l0:
        out.append(l0)
    return out


@dataclass(frozen=True, eq=False)
class NormProfile:
    """Prefix norms at lengths {1, 2, 4, ..., 2^k, l0} of an ascending degree sequence.

    ``l_minus_inf`` is the smallest degree (0 for an empty sequence).
    """

    prefix_len: np.ndarray
    l1: np.ndarray
    l2sq: np.ndarray
    linf: np.ndarray
    l_minus_inf: int
    l0: int

    def __post_init__(self):
        for name in ("prefix_len", "l1", "l2sq", "linf"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "l_minus_inf", int(self.l_minus_inf))
        object.__setattr__(self, "l0", int(self.l0))

    @classmethod
    def empty(cls) -> NormProfile:
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, 0, 0)

    @classmethod
    def from_points(cls, points, l_minus_inf: int, l0: int) -> NormProfile:
        points = list(points)
        arr = np.array([[p.prefix_len, p.l1, p.l2sq, p.linf] for p in points], dtype=np.int64).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], l_minus_inf, l0)

    @property
    def points(self) -> list[NormPoint]:
        return [
            NormPoint(int(p), int(a), int(b), int(c))
            for p, a, b, c in zip(self.prefix_len, self.l1, self.l2sq, self.linf)
        ]

    def point(self, prefix_len: int) -> NormPoint:
        i = int(np.searchsorted(self.prefix_len, prefix_len))
        if i >= self.prefix_len.size or self.prefix_len[i] != prefix_len:
            raise KeyError(prefix_len)
        return self.points[i]

    @property
    def row_count(self) -> int:
        return int(self.l1[-1]) if self.l0 else 0

    @property
    def max_degree(self) -> int:
        return int(self.linf[-1]) if self.l0 else 0

    def __eq__(self, other):
        if not isinstance(other, NormProfile):
            return NotImplemented
        return (
            self.l0 == other.l0
            and self.l_minus_inf == other.l_minus_inf
            and np.array_equal(self.prefix_len, other.prefix_len)
            and np.array_equal(self.l1, other.l1)
            and np.array_equal(self.l2sq, other.l2sq)
            and np.array_equal(self.linf, other.linf)
        )

    def validate(self, where: str = "profile") -> None:
        expected = stored_prefix_lengths(self.l0)
        if list(map(int, self.prefix_len)) != expected:
            raise CatalogError(f"{where}: prefix lengths {list(map(int, self.prefix_len))} != {expected}")
        if self.l0 == 0:
            if self.l_minus_inf != 0:
                raise CatalogError(f"{where}: empty profile must have l_minus_inf = 0")
            return
        lmi = self.l_minus_inf
        if lmi < 1:
            raise CatalogError(f"{where}: l_minus_inf must be >= 1")
        prev = None
        for pt in self.points:
            p, l1, l2sq, linf = pt.prefix_len, pt.l1, pt.l2sq, pt.linf
            if linf < 1 or not (linf <= l1 <= p * linf):
                raise CatalogError(f"{where}: prefix {p}: l1={l1} outside [linf, p*linf]")
            if not (p * lmi <= l1):
                raise CatalogError(f"{where}: prefix {p}: l1={l1} < p*l_minus_inf")
            if not (l1 * lmi <= l2sq <= l1 * linf):
                raise CatalogError(f"{where}: prefix {p}: l2sq={l2sq} outside [l1*l_minus_inf, l1*linf]")
            if lmi > linf:
                raise CatalogError(f"{where}: prefix {p}: l_minus_inf > linf")
            if prev is not None:
                if l1 < prev.l1 or l2sq < prev.l2sq or linf < prev.linf:
                    raise CatalogError(
                        f"{where}: norms decrease between prefix {prev.prefix_len} and {p} "
                        "(degrees not ascending)"
                    )
                gap = p - prev.prefix_len
                # entries in the gap lie between the previous and the current max degree
                if not (gap * prev.linf <= l1 - prev.l1 <= gap * linf):
                    raise CatalogError(f"{where}: prefix {p}: l1 increment inconsistent with ascending degrees")
            prev = pt


# ---------------------------------------------------------------------------
# partitioned l0 statistics


@dataclass(frozen=True)
class Bin:
    lo: int
    hi: int
    l0: int
    min_key: Optional[int]
    max_key: Optional[int]


@dataclass(frozen=True, eq=False)
class PartitionStats:
    """Equi-width bins over the key range ``[start, end]``.

    Bin i covers ``[start + i*width, start + (i+1)*width - 1]``; the last bin is
    clipped at ``end``.  ``min_key``/``max_key`` are 0 for empty bins.
    """

    bin_count: int
    start: int
    end: int
    width: int
    l0: np.ndarray
    min_key: np.ndarray
    max_key: np.ndarray

    def __post_init__(self):
        for name in ("l0", "min_key", "max_key"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))

    @classmethod
    def empty(cls, bin_count: int = 1) -> PartitionStats:
        z = np.zeros(0, dtype=np.int64)
        return cls(bin_count, 0, -1, 1, z, z, z)

    @property
    def n_bins(self) -> int:
        return int(self.l0.size)

    @property
    def total_l0(self) -> int:
        return int(self.l0.sum())

    @cached_property
    def lo(self) -> np.ndarray:
        return self.start + self.width * np.arange(self.n_bins, dtype=np.int64)

    @cached_property
    def hi(self) -> np.ndarray:
        if not self.n_bins:
            return np.zeros(0, dtype=np.int64)
        hi = self.lo + (self.width - 1)
        hi[-1] = self.end
        return hi

    @property
    def bins(self) -> list[Bin]:
        out = []
        for lo, hi, c, a, b in zip(self.lo, self.hi, self.l0, self.min_key, self.max_key):
            c = int(c)
            out.append(Bin(int(lo), int(hi), c, int(a) if c else None, int(b) if c else None))
        return out

    def __eq__(self, other):
        if not isinstance(other, PartitionStats):
            return NotImplemented
        return (
            (self.bin_count, self.start, self.end, self.width)
            == (other.bin_count, other.start, other.end, other.width)
            and np.array_equal(self.l0, other.l0)
            and np.array_equal(self.min_key, other.min_key)
            and np.array_equal(self.max_key, other.max_key)
        )

    def validate(self, l0: int, where: str = "partitions") -> None:
        if self.bin_count < 1:
            raise CatalogError(f"{where}: bin_count must be >= 1")
        if self.n_bins == 0:
            if l0 != 0:
                raise CatalogError(f"{where}: no bins but context l0 = {l0}")
            return
        span = self.end - self.start + 1
        width = -(-span // self.bin_count)
        if self.width != width or self.n_bins != -(-span // width):
            raise CatalogError(f"{where}: bins are not the equi-width tiling of [{self.start}, {self.end}]")
        if self.total_l0 != l0:
            raise CatalogError(f"{where}: sum of bin l0 ({self.total_l0}) != context l0 ({l0})")
        for b in self.bins:
            if b.l0 < 0:
                raise CatalogError(f"{where}: negative bin l0")
            if b.l0 == 0:
                continue
            if not (b.lo <= b.min_key <= b.max_key <= b.hi):
                raise CatalogError(f"{where}: bin [{b.lo}, {b.hi}] has keys outside its range")
            if b.l0 > b.max_key - b.min_key + 1:
                raise CatalogError(f"{where}: bin [{b.lo}, {b.hi}] l0 exceeds its key span")
        if self.l0[0] == 0 or self.l0[-1] == 0 or self.min_key[0] != self.start or self.max_key[-1] != self.end:
            raise CatalogError(f"{where}: bins do not cover the observed key range exactly")


# ---------------------------------------------------------------------------
# predicate contexts and the catalog

ContextKind = Literal["unfiltered", "mcv", "bucket", "empty"]


@dataclass(frozen=True)
class PredicateContext:
    """Statistics of one join column restricted to the rows of a predicate."""

    kind: ContextKind
    profile: NormProfile
    partitions: PartitionStats
    column: Optional[str] = None
    value: Optional[int] = None
    lo: Optional[int] = None
    hi: Optional[int] = None

    @property
    def l0(self) -> int:
        return self.profile.l0

    @classmethod
    def empty(cls, bin_count: int = 1) -> PredicateContext:
        return cls("empty", NormProfile.empty(), PartitionStats.empty(bin_count))

    def describe(self) -> str:
        if self.kind == "mcv":
            return f"mcv({self.column}={self.value})"
        if self.kind == "bucket":
            return f"bucket({self.column} in [{self.lo}, {self.hi}])"
        return self.kind

    def validate(self, where: str) -> None:
        self.profile.validate(f"{where} profile")
        self.partitions.validate(self.profile.l0, f"{where} partitions")


@dataclass(frozen=True)
class HistogramBucket:
    lo: int
    hi: int
    context: PredicateContext


@dataclass(frozen=True)
class Histogram:
    """Layered equi-width histogram; layer 0 is the finest, the last layer has one bucket."""

    column: str
    layers: tuple[tuple[HistogramBucket, ...], ...]

    @property
    def domain(self) -> tuple[int, int]:
        top = self.layers[-1][0]
        return top.lo, top.hi

    def validate(self, where: str) -> None:
        if not self.layers or len(self.layers[-1]) != 1:
            raise CatalogError(f"{where}: top layer must hold exactly one bucket")
        for li in range(len(self.layers) - 1):
            lower, upper = self.layers[li], self.layers[li + 1]
            if len(upper) != -(-len(lower) // 2):
                raise CatalogError(f"{where}: layer {li + 1} must have half the buckets of layer {li}")
            for j, b in enumerate(upper):
                kids = lower[2 * j : 2 * j + 2]
                if b.lo != kids[0].lo or b.hi != kids[-1].hi:
                    raise CatalogError(f"{where}: layer {li + 1} bucket {j} is not the union of its children")
        for li, layer in enumerate(self.layers):
            for j, b in enumerate(layer):
                if b.lo > b.hi or (j and layer[j - 1].hi + 1 != b.lo):
                    raise CatalogError(f"{where}: layer {li} buckets are not contiguous")
                b.context.validate(f"{where} layer {li} bucket [{b.lo}, {b.hi}]")


@dataclass(frozen=True)
class ColumnStats:
    """All contexts kept for one (relation, join column)."""

    base: PredicateContext
    mcvs: dict[str, dict[int, PredicateContext]] = field(default_factory=dict)
    histograms: dict[str, Histogram] = field(default_factory=dict)


@dataclass(frozen=True)
class BuildConfig:
    partitions: int = 256
    mcv_count: int = 5000
    histogram_buckets: int = 128

    def __post_init__(self):
        if self.partitions < 1 or self.mcv_count < 0 or self.histogram_buckets < 1:
            raise ValueError(f"invalid build config {self}")


@dataclass(frozen=True)
class StatisticsCatalog:
    build_config: BuildConfig = field(default_factory=BuildConfig)
    relations: dict[str, dict[str, ColumnStats]] = field(default_factory=dict)

    def column(self, relation: str, join_column: str) -> ColumnStats:
        try:
            cols = self.relations[relation]
        except KeyError:
            raise QueryError(f"unknown relation {relation!r}") from None
        try:
            return cols[join_column]
        except KeyError:
            raise QueryError(f"unknown join column {relation}.{join_column}") from None

    def validate(self) -> None:
        for rel, cols in self.relations.items():
            for col, cs in cols.items():
                where = f"{rel}.{col}"
                cs.base.validate(f"{where} base")
                for pcol, by_value in cs.mcvs.items():
                    for v, ctx in by_value.items():
                        ctx.validate(f"{where} mcv {pcol}={v}")
                for pcol, hist in cs.histograms.items():
                    hist.validate(f"{where} histogram {pcol}")


# ---------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class Eq:
    column: str
    value: int


@dataclass(frozen=True)
class Range:
    """Inclusive range predicate ``lo <= column <= hi``."""

    column: str
    lo: int
    hi: int


@dataclass(frozen=True)
class And:
    items: tuple[Union[Eq, Range], ...]


@dataclass(frozen=True)
class Or:
    items: tuple[Union[Eq, Range], ...]


Atomic = Union[Eq, Range]
PredicateExpr = Optional[Union[Eq, Range, And, Or]]


@dataclass(frozen=True)
class RelationRef:
    name: str
    join_column: str
    predicate: PredicateExpr = None
    alias: Optional[str] = None

    @property
    def label(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class JoinQuery:
    relations: tuple[RelationRef, ...]
    id: Optional[str] = None
    system_estimate: Optional[float] = None
    true_cardinality: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.relations)


def predicate_from_json(obj: Any, nested: bool = False) -> PredicateExpr:
    if obj is None:
        return None
    op = obj.get("op")
    if op == "eq":
        return Eq(obj["column"], _as_int(obj["value"]))
    if op == "range":
        return Range(obj["column"], _as_int(obj["lo"]), _as_int(obj["hi"]))
    if op in ("and", "or"):
        if nested:
            raise QueryError("nested boolean predicates are not supported")
        items = tuple(predicate_from_json(x, nested=True) for x in obj["args"])
        if not items:
            raise QueryError(f"empty {op!r} predicate")
        return And(items) if op == "and" else Or(items)
    raise QueryError(f"unknown predicate op {op!r}")


def predicate_to_json(pred: PredicateExpr) -> Any:
    if pred is None:
        return None
    if isinstance(pred, Eq):
        return {"op": "eq", "column": pred.column, "value": pred.value}
    if isinstance(pred, Range):
        return {"op": "range", "column": pred.column, "lo": pred.lo, "hi": pred.hi}
    op = "and" if isinstance(pred, And) else "or"
    return {"op": op, "args": [predicate_to_json(p) for p in pred.items]}


def query_from_json(obj: dict, default_id: Optional[str] = None) -> JoinQuery:
    rels = tuple(
        RelationRef(r["name"], r["join_column"], predicate_from_json(r.get("predicate")), r.get("alias"))
        for r in obj["relations"]
    )
    if not rels:
        raise QueryError("query has no relations")
    return JoinQuery(
        rels,
        id=str(obj.get("id", default_id)),
        system_estimate=obj.get("system_estimate"),
        true_cardinality=obj.get("true_cardinality"),
    )


def query_to_json(q: JoinQuery) -> dict:
    out: dict[str, Any] = {"id": q.id, "relations": []}
    for r in q.relations:
        d: dict[str, Any] = {"name": r.name, "join_column": r.join_column, "predicate": predicate_to_json(r.predicate)}
        if r.alias:
            d["alias"] = r.alias
        out["relations"].append(d)
    if q.system_estimate is not None:
        out["system_estimate"] = q.system_estimate
    if q.true_cardinality is not None:
        out["true_cardinality"] = q.true_cardinality
    return out


def _as_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise QueryError(f"predicate constants must be integers, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# catalog (de)serialization


def _profile_to_json(p: NormProfile) -> dict:
    return {
        "l0": p.l0,
        "l_minus_inf": p.l_minus_inf,
        "points": [[pt.prefix_len, pt.l1, pt.l2sq, pt.linf] for pt in p.points],
    }


def _profile_from_json(d: dict) -> NormProfile:
    pts = d["points"]
    arr = np.array(pts, dtype=np.int64).reshape(-1, 4)
    return NormProfile(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], d["l_minus_inf"], d["l0"])


def _partitions_to_json(s: PartitionStats) -> dict:
    nonempty = s.l0 > 0
    return {
        "bin_count": s.bin_count,
        "start": s.start,
        "end": s.end,
        "width": s.width,
        "l0": s.l0.tolist(),
        "min_key": [int(v) if e else None for v, e in zip(s.min_key, nonempty)],
        "max_key": [int(v) if e else None for v, e in zip(s.max_key, nonempty)],
    }


def _partitions_from_json(d: dict) -> PartitionStats:
    def keys(xs):
        return [0 if v is None else v for v in xs]

    if not (len(d["l0"]) == len(d["min_key"]) == len(d["max_key"])):
        raise CatalogError("partition arrays differ in length")
    return PartitionStats(
        d["bin_count"], d["start"], d["end"], d["width"], d["l0"], keys(d["min_key"]), keys(d["max_key"])
    )


def _context_to_json(c: PredicateContext) -> dict:
    out: dict[str, Any] = {"kind": c.kind}
    if c.kind == "mcv":
        out.update(column=c.column, value=c.value)
    elif c.kind == "bucket":
        out.update(column=c.column, lo=c.lo, hi=c.hi)
    out["profile"] = _profile_to_json(c.profile)
    out["partitions"] = _partitions_to_json(c.partitions)
    return out


def _context_from_json(d: dict) -> PredicateContext:
    return PredicateContext(
        kind=d["kind"],
        profile=_profile_from_json(d["profile"]),
        partitions=_partitions_from_json(d["partitions"]),
        column=d.get("column"),
        value=d.get("value"),
        lo=d.get("lo"),
        hi=d.get("hi"),
    )


def catalog_to_json(catalog: StatisticsCatalog) -> dict:
    cfg = catalog.build_config
    rels: dict[str, Any] = {}
    for rel, cols in catalog.relations.items():
        rels[rel] = {}
        for col, cs in cols.items():
            rels[rel][col] = {
                "base": _context_to_json(cs.base),
                "mcvs": {
                    pcol: [{"value": v, "context": _context_to_json(c)} for v, c in by_value.items()]
                    for pcol, by_value in cs.mcvs.items()
                },
                "histograms": {
                    pcol: [
                        [{"lo": b.lo, "hi": b.hi, "context": _context_to_json(b.context)} for b in layer]
                        for layer in h.layers
                    ]
                    for pcol, h in cs.histograms.items()
                },
            }
    return {
        "version": SCHEMA_VERSION,
        "build_config": {
            "partitions": cfg.partitions,
            "mcv_count": cfg.mcv_count,
            "histogram_buckets": cfg.histogram_buckets,
        },
        "relations": rels,
    }


def catalog_from_json(doc: dict) -> StatisticsCatalog:
    if not isinstance(doc, dict) or "version" not in doc:
        raise CatalogError("not a catalog document (missing version)")
    if doc["version"] != SCHEMA_VERSION:
        raise CatalogError(f"unsupported catalog version {doc['version']!r}")
    try:
        cfg = BuildConfig(**doc["build_config"])
        relations: dict[str, dict[str, ColumnStats]] = {}
        for rel, cols in doc["relations"].items():
            relations[rel] = {}
            for col, cd in cols.items():
                mcvs = {
                    pcol: {e["value"]: _context_from_json(e["context"]) for e in entries}
                    for pcol, entries in cd.get("mcvs", {}).items()
                }
                hists = {
                    pcol: Histogram(
                        pcol,
                        tuple(
                            tuple(HistogramBucket(b["lo"], b["hi"], _context_from_json(b["context"])) for b in layer)
                            for layer in layers
                        ),
                    )
                    for pcol, layers in cd.get("histograms", {}).items()
                }
                relations[rel][col] = ColumnStats(_context_from_json(cd["base"]), mcvs, hists)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CatalogError):
            raise
        raise CatalogError(f"malformed catalog: {exc!r}") from exc
    catalog = StatisticsCatalog(cfg, relations)
    catalog.validate()
    return catalog


def save_catalog(catalog: StatisticsCatalog, path: Union[str, os.PathLike]) -> None:
    doc = catalog_to_json(catalog)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_catalog(path: Union[str, os.PathLike]) -> StatisticsCatalog:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: not valid JSON ({exc})") from exc
    return catalog_from_json(doc)
