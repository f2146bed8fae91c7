"""Statistics construction: CSV ingestion, degree sequences, prefix norms,
partitioned distinct counts, MCV and hierarchical-histogram contexts."""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .model import (
    INT64_MAX,
    INT64_MIN,
    BuildConfig,
    ColumnStats,
    DegreeSequence,
    Histogram,
    HistogramBucket,
    NormProfile,
    PartitionStats,
    PredicateContext,
    StatisticsCatalog,
    catalog_to_json,
    stored_prefix_lengths,
)

NULL_TOKENS = frozenset({"", "NULL", "null", "\\N", "NA"})
COLUMN_TYPES = ("key", "int", "ignore")


class IngestError(ValueError):
    pass


@dataclass
class Table:
    """Integer columns of one relation with per-column validity masks.

    ``key_columns`` are the join columns; every other column is a predicate
    column unless listed in ``predicate_columns``.
    """

    name: str
    columns: dict[str, np.ndarray]
    valid: dict[str, np.ndarray]
    key_columns: list[str]
    predicate_columns: Optional[list[str]] = None

    @property
    def row_count(self) -> int:
        return int(next(iter(self.columns.values())).size) if self.columns else 0

    @classmethod
    def from_arrays(cls, name, columns: Mapping[str, Iterable], key_columns, valid=None, predicate_columns=None):
        cols = {c: np.asarray(v, dtype=np.int64) for c, v in columns.items()}
        masks = {c: np.ones(a.size, dtype=bool) for c, a in cols.items()}
        if valid:
            masks.update({c: np.asarray(m, dtype=bool) for c, m in valid.items()})
        return cls(name, cols, masks, list(key_columns), predicate_columns)

    def predicate_column_names(self, join_column: str) -> list[str]:
        if self.predicate_columns is not None:
            return [c for c in self.predicate_columns if c != join_column]
        return [c for c in self.columns if c not in self.key_columns]


@dataclass
class PredicateColumn:
    values: np.ndarray
    valid: np.ndarray


@dataclass
class ColumnData:
    """Join-key values of one column (null keys removed) and the aligned predicate columns."""

    relation: str
    column: str
    values: np.ndarray
    predicates: dict[str, PredicateColumn] = field(default_factory=dict)
    nulls_dropped: int = 0

    @classmethod
    def from_table(cls, table: Table, join_column: str) -> ColumnData:
        keep = table.valid[join_column]
        preds = {
            c: PredicateColumn(table.columns[c][keep], table.valid[c][keep])
            for c in table.predicate_column_names(join_column)
        }
        return cls(
            table.name,
            join_column,
            table.columns[join_column][keep],
            preds,
            nulls_dropped=int(keep.size - keep.sum()),
        )


# ---------------------------------------------------------------------------
# ingestion


def _parse_int(tok: str, path, row: int, col: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise IngestError(f"{path}: row {row}, column {col!r}: cannot parse {tok!r} as integer") from None
    if not INT64_MIN <= v <= INT64_MAX:
        raise IngestError(f"{path}: row {row}, column {col!r}: {v} does not fit in 64 bits")
    return v


def read_csv_table(path, schema: Mapping[str, str], name: Optional[str] = None, predicate_columns=None) -> Table:
    path = Path(path)
    for col, typ in schema.items():
        if typ not in COLUMN_TYPES:
            raise IngestError(f"{path}: column {col!r} has unsupported type {typ!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in schema if c not in header]
        if missing:
            raise IngestError(f"{path}: missing column(s) {missing}")
        wanted = [(header.index(c), c) for c, t in schema.items() if t != "ignore"]
        vals: dict[str, list[int]] = {c: [] for _, c in wanted}
        valid: dict[str, list[bool]] = {c: [] for _, c in wanted}
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                raise IngestError(f"{path}: row {rowno} has {len(row)} fields, expected {len(header)}")
            for i, c in wanted:
                tok = row[i].strip()
                if tok in NULL_TOKENS:
                    vals[c].append(0)
                    valid[c].append(False)
                else:
                    vals[c].append(_parse_int(tok, path, rowno, c))
                    valid[c].append(True)
    keys = [c for c, t in schema.items() if t == "key"]
    return Table(
        name or path.stem,
        {c: np.array(v, dtype=np.int64) for c, v in vals.items()},
        {c: np.array(v, dtype=bool) for c, v in valid.items()},
        keys,
        predicate_columns,
    )


def ingest_csv(path, schema: Mapping[str, str], name: Optional[str] = None) -> dict[str, ColumnData]:
    """Read a CSV and return one :class:`ColumnData` per join-key column."""
    table = read_csv_table(path, schema, name)
    return {c: ColumnData.from_table(table, c) for c in table.key_columns}


def load_ingest_plan(path) -> list[Table]:
    """Read an ingest plan: ``{"tables": {name: {"path": ..., "columns": {col: type}}}}``.

    Relative CSV paths are resolved against the plan's directory.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        plan = json.load(fh)
    tables = []
    try:
        entries = plan["tables"].items()
    except (KeyError, AttributeError):
        raise IngestError(f"{path}: ingest plan needs a 'tables' object") from None
    for name, spec in entries:
        csv_path = Path(spec["path"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        tables.append(read_csv_table(csv_path, spec["columns"], name, spec.get("predicates")))
    return tables


# ---------------------------------------------------------------------------
# statistics


def build_degree_sequence(data: Union[ColumnData, np.ndarray], mask: Optional[np.ndarray] = None) -> DegreeSequence:
    keys = data.values if isinstance(data, ColumnData) else np.asarray(data, dtype=np.int64)
    if mask is not None:
        keys = keys[mask]
    if keys.size == 0:
        return DegreeSequence(np.zeros(0, dtype=np.int64))
    _, counts = np.unique(keys, return_counts=True)
    return DegreeSequence(np.sort(counts))


def profile_from_degrees(degrees: np.ndarray) -> NormProfile:
    d = np.asarray(degrees, dtype=np.int64)
    n = d.size
    if n == 0:
        return NormProfile.empty()
    idx = np.array(stored_prefix_lengths(n), dtype=np.int64) - 1
    c1 = np.cumsum(d)
    c2 = np.cumsum(d * d)
    return NormProfile(idx + 1, c1[idx], c2[idx], d[idx], int(d[0]), n)


def build_norm_profile(seq: DegreeSequence) -> NormProfile:
    return profile_from_degrees(seq.degrees)


def partitions_from_unique(keys: np.ndarray, bin_count: int) -> PartitionStats:
    """Equi-width bins over the sorted distinct ``keys``."""
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    if keys.size == 0:
        return PartitionStats.empty(bin_count)
    start, end = int(keys[0]), int(keys[-1])
    span = end - start + 1
    width = -(-span // bin_count)
    n_bins = -(-span // width)
    # int64 differences may wrap for huge spans; reinterpret as unsigned
    offs = (keys - np.int64(start)).view(np.uint64)
    idx = (offs // np.uint64(width)).astype(np.int64)
    l0 = np.bincount(idx, minlength=n_bins).astype(np.int64)
    first = np.searchsorted(idx, np.arange(n_bins), side="left")
    last = np.searchsorted(idx, np.arange(n_bins), side="right") - 1
    nonempty = l0 > 0
    mins = np.where(nonempty, keys[np.minimum(first, keys.size - 1)], 0)
    maxs = np.where(nonempty, keys[np.maximum(last, 0)], 0)
    return PartitionStats(bin_count, start, end, width, l0, mins, maxs)


def build_partition_stats(data: Union[ColumnData, np.ndarray], bin_count: int, mask=None) -> PartitionStats:
    keys = data.values if isinstance(data, ColumnData) else np.asarray(data, dtype=np.int64)
    if mask is not None:
        keys = keys[mask]
    return partitions_from_unique(np.unique(keys), bin_count)


def context_from_keys(keys: np.ndarray, bin_count: int, kind="unfiltered", **label) -> PredicateContext:
    if keys.size == 0:
        return PredicateContext(kind, NormProfile.empty(), PartitionStats.empty(bin_count), **label)
    uniq, counts = np.unique(keys, return_counts=True)
    counts.sort()
    return PredicateContext(kind, profile_from_degrees(counts), partitions_from_unique(uniq, bin_count), **label)


def _sorted_by_predicate(data: ColumnData, column: str):
    pc = data.predicates[column]
    pv = pc.values[pc.valid]
    keys = data.values[pc.valid]
    order = np.argsort(pv, kind="stable")
    return pv[order], keys[order]


def build_mcv_contexts(data: ColumnData, predicate_column: str, k: int, bin_count: int = 256) -> dict[int, PredicateContext]:
    """Contexts for the ``k`` most frequent predicate values (ties: smaller value first)."""
    if k <= 0:
        return {}
    pv, keys = _sorted_by_predicate(data, predicate_column)
    if pv.size == 0:
        return {}
    values, counts = np.unique(pv, return_counts=True)
    top = np.lexsort((values, -counts))[:k]
    out = {}
    for v in values[top]:
        a = np.searchsorted(pv, v, side="left")
        b = np.searchsorted(pv, v, side="right")
        out[int(v)] = context_from_keys(keys[a:b], bin_count, "mcv", column=predicate_column, value=int(v))
    return out


def histogram_layout(pmin: int, pmax: int, bucket_count: int) -> list[list[tuple[int, int]]]:
    """Bucket ranges per layer: layer 0 equi-width, then adjacent pairs merged up to one bucket."""
    span = pmax - pmin + 1
    width = -(-span // bucket_count)
    n0 = -(-span // width)
    layer = [(pmin + j * width, min(pmin + (j + 1) * width - 1, pmax)) for j in range(n0)]
    layers = [layer]
    while len(layer) > 1:
        layer = [(layer[j][0], layer[min(j + 1, len(layer) - 1)][1]) for j in range(0, len(layer), 2)]
        layers.append(layer)
    return layers


def build_histogram_contexts(
    data: ColumnData, predicate_column: str, bucket_count: int, bin_count: int = 256
) -> Optional[Histogram]:
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    pv, keys = _sorted_by_predicate(data, predicate_column)
    if pv.size == 0:
        return None
    layers = []
    for ranges in histogram_layout(int(pv[0]), int(pv[-1]), bucket_count):
        los = np.array([r[0] for r in ranges], dtype=np.int64)
        his = np.array([r[1] for r in ranges], dtype=np.int64)
        starts = np.searchsorted(pv, los, side="left")
        stops = np.searchsorted(pv, his, side="right")
        layers.append(
            tuple(
                HistogramBucket(
                    lo, hi, context_from_keys(keys[a:b], bin_count, "bucket", column=predicate_column, lo=lo, hi=hi)
                )
                for (lo, hi), a, b in zip(ranges, starts, stops)
            )
        )
    return Histogram(predicate_column, tuple(layers))


def build_column_stats(data: ColumnData, config: BuildConfig) -> ColumnStats:
    base = context_from_keys(data.values, config.partitions)
    mcvs = {}
    hists = {}
    for pcol in data.predicates:
        mcvs[pcol] = build_mcv_contexts(data, pcol, config.mcv_count, config.partitions)
        h = build_histogram_contexts(data, pcol, config.histogram_buckets, config.partitions)
        if h is not None:
            hists[pcol] = h
    return ColumnStats(base, mcvs, hists)


@dataclass
class TableReport:
    name: str
    rows: int
    nulls_dropped: dict[str, int]
    contexts: int
    bytes: int
    seconds: float


@dataclass
class BuildReport:
    config: BuildConfig
    tables: list[TableReport] = field(default_factory=list)

    @property
    def total_bytes(self) -> int:
        return sum(t.bytes for t in self.tables)

    @property
    def total_seconds(self) -> float:
        return sum(t.seconds for t in self.tables)

    def render(self) -> str:
        cfg = self.config
        lines = [
            f"build config: partitions={cfg.partitions} mcvs={cfg.mcv_count} histogram_buckets={cfg.histogram_buckets}",
            f"{'table':<20} {'rows':>10} {'null keys':>10} {'contexts':>9} {'size':>12} {'time [s]':>9}",
        ]
        for t in self.tables:
            nulls = sum(t.nulls_dropped.values())
            lines.append(
                f"{t.name:<20} {t.rows:>10} {nulls:>10} {t.contexts:>9} {_fmt_bytes(t.bytes):>12} {t.seconds:>9.3f}"
            )
        lines.append(
            f"{'total':<20} {sum(t.rows for t in self.tables):>10} {'':>10} "
            f"{sum(t.contexts for t in self.tables):>9} {_fmt_bytes(self.total_bytes):>12} {self.total_seconds:>9.3f}"
        )
        return "\n".join(lines)


def _fmt_bytes(n: int) -> str:
    for unit in ("B", "KiB", "MiB"):
        if n < 1024:
            return f"{n:.0f} {unit}" if unit == "B" else f"{n:.1f} {unit}"
        n /= 1024
    return f"{n:.1f} GiB"


def build_catalog(
    tables: Iterable[Table], config: BuildConfig = BuildConfig(), with_report: bool = False
):
    """Build every statistic for ``tables``.  Returns the catalog (and a report)."""
    relations: dict[str, dict[str, ColumnStats]] = {}
    report = BuildReport(config)
    for table in tables:
        t0 = time.perf_counter()
        cols = {}
        nulls = {}
        for jc in table.key_columns:
            data = ColumnData.from_table(table, jc)
            nulls[jc] = data.nulls_dropped
            cols[jc] = build_column_stats(data, config)
        relations[table.name] = cols
        elapsed = time.perf_counter() - t0
        if with_report:
            ncontexts = sum(
                1 + sum(len(v) for v in cs.mcvs.values()) + sum(len(l) for h in cs.histograms.values() for l in h.layers)
                for cs in cols.values()
            )
            size = len(json.dumps(catalog_to_json(StatisticsCatalog(config, {table.name: cols}))["relations"]))
            report.tables.append(TableReport(table.name, table.row_count, nulls, ncontexts, size, elapsed))
    catalog = StatisticsCatalog(config, relations)
    return (catalog, report) if with_report else catalog


def build_catalog_from_plan(plan_path: Union[str, os.PathLike], config: BuildConfig = BuildConfig()):
    return build_catalog(load_ingest_plan(plan_path), config, with_report=True)
