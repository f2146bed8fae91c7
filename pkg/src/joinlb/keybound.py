"""Lower bounds on the number of keys shared by all relations of a join.

All reasoning is by inclusion-exclusion against the span of the key range:
``|K_1 ∩ ... ∩ K_n| >= sum |K_i| - (n - 1) |K_1 ∪ ... ∪ K_n|`` and the union
of integer keys inside ``[lo, hi]`` has at most ``hi - lo + 1`` elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .model import Bin, PartitionStats


@dataclass(frozen=True)
class KeySetSummary:
    l0: int
    min_key: Optional[int] = None
    max_key: Optional[int] = None

    def __post_init__(self):
        if self.l0 < 0:
            raise ValueError("l0 must be non-negative")
        if self.l0 > 0 and self.l0 > self.max_key - self.min_key + 1:
            raise ValueError(f"{self.l0} distinct keys cannot fit in [{self.min_key}, {self.max_key}]")


@dataclass(frozen=True)
class CellBound:
    lo: int
    hi: int
    relation_lbs: tuple[int, ...]
    intersection_lb: int


def intersect_lb(summaries: Sequence[KeySetSummary]) -> int:
    if not summaries:
        raise ValueError("need at least one key set")
    if any(s.l0 == 0 for s in summaries):
        return 0
    if len(summaries) == 1:
        return summaries[0].l0
    span = max(s.max_key for s in summaries) - min(s.min_key for s in summaries) + 1
    return max(0, sum(s.l0 for s in summaries) - (len(summaries) - 1) * span)


def sub_range_l0_lb(bin: Bin, x: int, y: int) -> int:
    """Keys of ``bin`` guaranteed to fall into ``[x, y]``.

    At most ``span - overlap`` of the bin's keys can sit outside the range.
    """
    if bin.l0 == 0:
        return 0
    lo, hi = max(x, bin.min_key), min(y, bin.max_key)
    if lo > hi:
        return 0
    span = bin.max_key - bin.min_key + 1
    return max(0, bin.l0 - (span - (hi - lo + 1)))


@dataclass
class KeyBoundResult:
    m: int
    cells: list[CellBound]

    def __iter__(self):
        return iter((self.m, self.cells))


def _as_groups(groups) -> list[list[PartitionStats]]:
    out = []
    for g in groups:
        out.append([g] if isinstance(g, PartitionStats) else list(g))
    return out


def joining_keys_lb(groups, keep_cells: bool = False) -> KeyBoundResult:
    """Lower-bound the number of keys present in every group.

    ``groups`` holds one entry per key set taking part in the intersection:
    either a :class:`PartitionStats` or a list of alternatives whose union is
    the key set (a disjunction).  Cells of the refinement grid formed by all
    bin starts are bounded independently and summed.
    """
    groups = _as_groups(groups)
    if not groups:
        raise ValueError("need at least one key set")
    hull_lo, hull_hi = [], []
    for alts in groups:
        alts = [a for a in alts if a.total_l0 > 0]
        if not alts:
            return KeyBoundResult(0, [])
        hull_lo.append(min(a.start for a in alts))
        hull_hi.append(max(a.end for a in alts))
    lo, hi = max(hull_lo), min(hull_hi)
    if lo > hi:
        return KeyBoundResult(0, [])

    alt_group, alt_start, alt_end, alt_width, alt_offset = [], [], [], [], []
    l0s, mins, maxs, cuts = [], [], [], [np.array([lo], dtype=np.int64)]
    offset = 0
    for gi, alts in enumerate(groups):
        for a in alts:
            if a.total_l0 == 0:
                continue
            alt_group.append(gi)
            alt_start.append(a.start)
            alt_end.append(a.end)
            alt_width.append(a.width)
            alt_offset.append(offset)
            offset += a.n_bins
            l0s.append(a.l0)
            mins.append(a.min_key)
            maxs.append(a.max_key)
            starts = a.lo
            cuts.append(starts[(starts > lo) & (starts <= hi)])
            # the end of an alternative's range is a boundary too
            if lo <= a.end < hi:
                cuts.append(np.array([a.end + 1], dtype=np.int64))
    cell_lo = np.unique(np.concatenate(cuts))
    cell_hi = np.empty_like(cell_lo)
    cell_hi[:-1] = cell_lo[1:] - 1
    cell_hi[-1] = hi

    value, group_lb = _kernels.cell_bounds(
        cell_lo,
        cell_hi,
        np.array(alt_group, dtype=np.int64),
        np.array(alt_start, dtype=np.int64),
        np.array(alt_end, dtype=np.int64),
        np.array(alt_width, dtype=np.int64),
        np.array(alt_offset, dtype=np.int64),
        np.concatenate(l0s),
        np.concatenate(mins),
        np.concatenate(maxs),
        len(groups),
    )
    m = int(value.sum())
    cells = []
    if keep_cells:
        for c in range(cell_lo.size):
            cells.append(
                CellBound(int(cell_lo[c]), int(cell_hi[c]), tuple(int(v) for v in group_lb[c]), int(value[c]))
            )
    return KeyBoundResult(m, cells)


def summary_of(stats: PartitionStats) -> KeySetSummary:
    if stats.total_l0 == 0:
        return KeySetSummary(0)
    return KeySetSummary(stats.total_l0, stats.start, stats.end)
