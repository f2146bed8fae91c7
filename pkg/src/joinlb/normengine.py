"""Predicate resolution and prefix-norm estimates at arbitrary prefix lengths.

Profiles only store norms at power-of-two prefixes (and the full length), so a
prefix of length m is bounded by extending the closest shorter stored prefix
with its max degree ("up") or by removing max-degree entries from the closest
longer one ("down").
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from .model import (
    And,
    Eq,
    NormProfile,
    Or,
    PredicateContext,
    PredicateExpr,
    QueryError,
    Range,
    StatisticsCatalog,
    ColumnStats,
)

Mode = Literal["strict", "paper"]
Which = Literal["l1", "l2"]


@dataclass(frozen=True)
class NormEstimate:
    """Bounds on the norms of the first ``m`` entries of an ascending degree sequence."""

    m: int
    l1_lb: int
    l2sq_lb: int
    linf_lb: int
    linf_ub: int
    lminf_lb: int

    @property
    def l2_lb(self) -> float:
        return math.sqrt(self.l2sq_lb)

    def coordinate_max(self, other: NormEstimate) -> NormEstimate:
        return NormEstimate(
            max(self.m, other.m),
            max(self.l1_lb, other.l1_lb),
            max(self.l2sq_lb, other.l2sq_lb),
            max(self.linf_lb, other.linf_lb),
            max(self.linf_ub, other.linf_ub),
            max(self.lminf_lb, other.lminf_lb),
        )


def _check_m(profile: NormProfile, m: int) -> None:
    if not 1 <= m <= profile.l0:
        raise ValueError(f"prefix length {m} outside [1, {profile.l0}]")


def _below(profile: NormProfile, m: int) -> int:
    return int(np.searchsorted(profile.prefix_len, m, side="right")) - 1


def _above(profile: NormProfile, m: int) -> int:
    return int(np.searchsorted(profile.prefix_len, m, side="left"))


def _up(profile: NormProfile, m: int) -> tuple[int, int]:
    i = _below(profile, m)
    p = int(profile.prefix_len[i])
    linf = int(profile.linf[i])
    return int(profile.l1[i]) + (m - p) * linf, int(profile.l2sq[i]) + (m - p) * linf * linf


def _down(profile: NormProfile, m: int) -> tuple[int, int]:
    i = _above(profile, m)
    q = int(profile.prefix_len[i])
    linf = int(profile.linf[i])
    l1 = max(m * profile.l_minus_inf, int(profile.l1[i]) - (q - m) * linf)
    l2sq = max(0, int(profile.l2sq[i]) - (q - m) * linf * linf)
    return l1, l2sq


def stitch_up(profile: NormProfile, m: int, which: Which = "l2") -> float:
    _check_m(profile, m)
    l1, l2sq = _up(profile, m)
    return l1 if which == "l1" else math.sqrt(l2sq)


def stitch_down(profile: NormProfile, m: int, which: Which = "l2") -> float:
    _check_m(profile, m)
    l1, l2sq = _down(profile, m)
    return l1 if which == "l1" else math.sqrt(l2sq)


def norms_at(
    profile: NormProfile, m: int, linf_ub: Optional[int] = None, lminf_lb: Optional[int] = None
) -> NormEstimate:
    """Sound bounds at prefix ``m``; ``linf_ub``/``lminf_lb`` override the profile's own."""
    _check_m(profile, m)
    u1, u2 = _up(profile, m)
    d1, d2 = _down(profile, m)
    lo_i, hi_i = _below(profile, m), _above(profile, m)
    return NormEstimate(
        m,
        max(u1, d1),
        max(u2, d2),
        int(profile.linf[lo_i]),
        int(profile.linf[hi_i]) if linf_ub is None else linf_ub,
        profile.l_minus_inf if lminf_lb is None else lminf_lb,
    )


# ---------------------------------------------------------------------------
# predicate resolution


@dataclass(frozen=True)
class ResolvedPart:
    """One statistics context standing in for (a subset of) a relation's qualifying rows."""

    context: PredicateContext
    linf_ub: Optional[int] = None
    lminf_lb: Optional[int] = None
    note: str = ""

    @property
    def l0(self) -> int:
        return self.context.l0

    def norms(self, m: int) -> NormEstimate:
        return norms_at(self.context.profile, m, self.linf_ub, self.lminf_lb)

    def describe(self) -> str:
        s = self.context.describe()
        extras = []
        if self.linf_ub is not None:
            extras.append(f"linf_ub={self.linf_ub}")
        if self.lminf_lb is not None:
            extras.append(f"lminf_lb={self.lminf_lb}")
        if self.note:
            extras.append(self.note)
        return s + (f" ({', '.join(extras)})" if extras else "")


@dataclass(frozen=True)
class ResolvedRelation:
    """Statistics a relation contributes to the bound.

    ``combine`` is "single" for one context, and (paper mode only) "any" for a
    disjunction or "all" for a conjunction over several contexts.
    """

    name: str
    join_column: str
    parts: tuple[ResolvedPart, ...]
    combine: Literal["single", "any", "all"] = "single"
    mode: Mode = "strict"

    @property
    def context(self) -> PredicateContext:
        return self.parts[0].context

    @property
    def l0_context(self) -> PredicateContext:
        return self.parts[0].context

    def key_groups(self) -> list[list]:
        if self.combine == "all":
            return [[p.context.partitions] for p in self.parts]
        return [[p.context.partitions for p in self.parts]]

    def norms(self, m: int) -> NormEstimate:
        if self.combine == "single":
            return self.parts[0].norms(m)
        est = None
        for p in self.parts:
            if p.l0 == 0:
                continue
            e = p.norms(min(m, p.l0))
            est = e if est is None else est.coordinate_max(e)
        if est is None:
            raise ValueError("no non-empty context to take norms from")
        return replace(est, m=m)


def _predicate_columns(cs: ColumnStats) -> set[str]:
    return set(cs.mcvs) | set(cs.histograms)


def _check_column(cs: ColumnStats, column: str, relation: str) -> None:
    if column not in _predicate_columns(cs):
        raise QueryError(f"no statistics for predicate column {relation}.{column}")


def _empty(cs: ColumnStats, note: str) -> ResolvedPart:
    return ResolvedPart(PredicateContext.empty(cs.base.partitions.bin_count), note=note)


def _resolve_eq(cs: ColumnStats, pred: Eq) -> ResolvedPart:
    ctx = cs.mcvs.get(pred.column, {}).get(pred.value)
    if ctx is None:
        return _empty(cs, f"{pred.column}={pred.value} is not an MCV")
    return ResolvedPart(ctx)


def _resolve_range(cs: ColumnStats, pred: Range) -> ResolvedPart:
    hist = cs.histograms.get(pred.column)
    if hist is None:
        return _empty(cs, f"no histogram on {pred.column}")
    dlo, dhi = hist.domain
    x, y = max(pred.lo, dlo), min(pred.hi, dhi)
    if x > y:
        return _empty(cs, f"[{pred.lo}, {pred.hi}] misses the domain [{dlo}, {dhi}]")

    contained = None
    for layer in reversed(hist.layers):
        inside = [b for b in layer if x <= b.lo and b.hi <= y]
        if inside:
            contained = max(inside, key=lambda b: (b.hi - b.lo, b.context.profile.row_count, -b.lo))
            break
    if contained is None:
        return _empty(cs, f"no bucket inside [{x}, {y}]")
    if contained.context.l0 == 0:
        return ResolvedPart(contained.context, note="contained bucket is empty")
    if (contained.lo, contained.hi) == (x, y):
        return ResolvedPart(contained.context, note="exact bucket")

    containing = None
    for layer in hist.layers:
        for b in layer:
            if b.lo <= x and y <= b.hi:
                containing = b
                break
        if containing is not None:
            break
    return ResolvedPart(
        contained.context,
        linf_ub=containing.context.profile.max_degree,
        lminf_lb=1,
        note=f"containing bucket [{containing.lo}, {containing.hi}]",
    )


def _resolve_atomic(cs: ColumnStats, pred, relation: str) -> ResolvedPart:
    _check_column(cs, pred.column, relation)
    if isinstance(pred, Eq):
        return _resolve_eq(cs, pred)
    return _resolve_range(cs, pred)


def merge_conjunction(items) -> Optional[PredicateExpr]:
    """Merge same-column atomics into one atomic; ``None`` if unsatisfiable.

    Raises ``ValueError`` for conjunctions over several columns.
    """
    columns = {p.column for p in items}
    if len(columns) != 1:
        raise ValueError("cross-column conjunction")
    (column,) = columns
    lo, hi = -(2**63), 2**63 - 1
    eqs = set()
    for p in items:
        if isinstance(p, Eq):
            eqs.add(p.value)
        else:
            lo, hi = max(lo, p.lo), min(hi, p.hi)
    if lo > hi or len(eqs) > 1:
        return None
    if eqs:
        (v,) = eqs
        return Eq(column, v) if lo <= v <= hi else None
    return Range(column, lo, hi)


def _check_atomic(p) -> None:
    if not isinstance(p, (Eq, Range)):
        raise QueryError("nested boolean predicates are not supported")


def resolve_predicate(
    catalog: StatisticsCatalog, relation: str, join_column: str, pred: PredicateExpr, mode: Mode = "strict"
) -> list[ResolvedRelation]:
    """Map a relation's predicate to statistics contexts.

    Strict mode returns one :class:`ResolvedRelation` per disjunct; the caller
    takes the maximum over the resulting bounds.
    """
    if mode not in ("strict", "paper"):
        raise ValueError(f"unknown mode {mode!r}")
    cs = catalog.column(relation, join_column)

    def single(part):
        return ResolvedRelation(relation, join_column, (part,), "single", mode)

    if pred is None:
        return [single(ResolvedPart(cs.base))]
    if isinstance(pred, (Eq, Range)):
        return [single(_resolve_atomic(cs, pred, relation))]
    if not isinstance(pred, (And, Or)):
        raise QueryError(f"unsupported predicate {pred!r}")
    for p in pred.items:
        _check_atomic(p)
        _check_column(cs, p.column, relation)

    if isinstance(pred, Or):
        parts = tuple(_resolve_atomic(cs, p, relation) for p in pred.items)
        if mode == "strict":
            return [single(p) for p in parts]
        return [ResolvedRelation(relation, join_column, parts, "any", mode)]

    if mode == "paper":
        parts = tuple(_resolve_atomic(cs, p, relation) for p in pred.items)
        return [ResolvedRelation(relation, join_column, parts, "all", mode)]
    try:
        merged = merge_conjunction(pred.items)
    except ValueError:
        return [single(_empty(cs, "cross-column conjunction"))]
    if merged is None:
        return [single(_empty(cs, "contradictory conjunction"))]
    return [single(_resolve_atomic(cs, merged, relation))]
