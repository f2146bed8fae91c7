"""Reverse dot-product inequalities and the end-to-end lower-bound estimator."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .keybound import CellBound, joining_keys_lb
from .model import JoinQuery, StatisticsCatalog
from .normengine import Mode, NormEstimate, ResolvedRelation, resolve_predicate

PERM_CAP = 8
# relative downward nudge applied to floating-point candidates before the ceiling
NUDGE = 1e-12


@dataclass(frozen=True)
class BoxBounds:
    upper: int  # M_i, bound on the largest entry
    lower: int  # m_i, bound on the smallest entry

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise ValueError(f"invalid box [{self.lower}, {self.upper}]")

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.upper, self.lower)


@dataclass(frozen=True)
class HolderInput:
    """Vector length ``d`` and, per vector, a lower bound on its squared l2 norm and its box."""

    d: int
    l2sq: tuple[int, ...]
    boxes: tuple[BoxBounds, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("vector length must be >= 1")
        if len(self.l2sq) != len(self.boxes):
            raise ValueError("one box per vector")

    @property
    def n(self) -> int:
        return len(self.boxes)

    @classmethod
    def from_estimates(cls, m: int, estimates: Sequence[NormEstimate]) -> HolderInput:
        return cls(
            m,
            tuple(e.l2sq_lb for e in estimates),
            tuple(BoxBounds(e.linf_ub, e.lminf_lb) for e in estimates),
        )


def polya_szego_lb(inp: HolderInput) -> float:
    if inp.n != 2:
        raise ValueError("Polya-Szego needs exactly two vectors")
    (a, b), (ba, bb) = inp.l2sq, inp.boxes
    hi = ba.upper * bb.upper
    lo = ba.lower * bb.lower
    return 2.0 * math.sqrt(a) * math.sqrt(b) / (math.sqrt(hi / lo) + math.sqrt(lo / hi))


def _l2_product(l2sq: Sequence[int]) -> float:
    prod = math.prod(sorted(l2sq))
    try:
        return math.sqrt(prod)
    except OverflowError:
        return math.exp(0.5 * sum(math.log(v) for v in l2sq if v > 0)) if all(l2sq) else 0.0


def _holder_value(inp: HolderInput, denominator: float) -> float:
    n = inp.n
    return 2.0 ** (n - 1) * _l2_product(inp.l2sq) / (math.sqrt(inp.d) ** (n - 2) * denominator)


def _denominator(ratios: Sequence[float]) -> float:
    r = ratios[0]
    prod = 1.0
    for x in ratios[1:]:
        r = r * x
        s = math.sqrt(r)
        prod = prod * (s + 1.0 / s)
    return prod


def gen_rev_holder_lb(inp: HolderInput, ordering: Optional[Sequence[int]] = None) -> float:
    """Lower bound on sum_k prod_i v_i[k] for the vectors taken in ``ordering``."""
    if inp.n < 2:
        raise ValueError("need at least two vectors")
    order = list(range(inp.n)) if ordering is None else list(ordering)
    if sorted(order) != list(range(inp.n)):
        raise ValueError(f"{ordering} is not a permutation of {inp.n} vectors")
    ratios = [inp.boxes[i].upper / inp.boxes[i].lower for i in order]
    return _holder_value(inp, _denominator(ratios))


def _canonical_order(inp: HolderInput) -> list[int]:
    return sorted(range(inp.n), key=lambda i: (inp.boxes[i].ratio, inp.l2sq[i], inp.boxes[i].upper, i))


def holder_best_ordering(inp: HolderInput, perm_cap: int = PERM_CAP) -> tuple[float, tuple[int, ...]]:
    """Best bound over orderings; enumerates the n!/2 canonical ones up to ``perm_cap`` vectors.

    Beyond the cap the vectors are ordered by ascending M/m ratio.  The
    relations are put in a canonical order first, so the result does not
    depend on how the caller listed them.
    """
    if inp.n < 2:
        raise ValueError("need at least two vectors")
    canon = _canonical_order(inp)
    ratios = np.array([inp.boxes[i].upper / inp.boxes[i].lower for i in canon], dtype=np.float64)
    if inp.n <= perm_cap:
        denom, perm = _kernels.holder_denominator(ratios)
        order = tuple(canon[int(k)] for k in perm)
    else:
        denom = _denominator(list(ratios))
        order = tuple(canon)
    return _holder_value(inp, float(denom)), order


def min_degree_lb(m: int, estimates: Sequence[NormEstimate]) -> int:
    """Fix one relation's prefix row count and let every other key match with its min degree."""
    if m < 1:
        raise ValueError("prefix length must be >= 1")
    mins = [e.lminf_lb for e in estimates]
    best = 0
    for i, e in enumerate(estimates):
        best = max(best, e.l1_lb * math.prod(mins[:i] + mins[i + 1 :]))
    return best


# ---------------------------------------------------------------------------
# the estimator


@dataclass
class BoundResult:
    lower_bound: int
    m: int
    m_bound: int
    holder_bound: Optional[float]
    min_degree_bound: Optional[int]
    winning_candidate: str
    mode: Mode = "strict"
    raw_bound: float = 0.0
    ordering: tuple[str, ...] = ()
    resolved: list[ResolvedRelation] = field(default_factory=list)
    estimates: list[NormEstimate] = field(default_factory=list)
    cells: list[CellBound] = field(default_factory=list)

    @property
    def candidates(self) -> dict[str, Optional[float]]:
        return {"m": self.m_bound, "holder": self.holder_bound, "min_degree": self.min_degree_bound}


def _ceil_candidates(m: int, holder: Optional[float], min_deg: Optional[int]) -> tuple[int, float, str]:
    best, raw, tag = m, float(m), "m"
    if holder is not None and holder > raw:
        raw, tag = holder, "holder"
    if min_deg is not None and min_deg > raw:
        raw, tag = float(min_deg), "min_degree"
    lb = m
    if holder is not None:
        lb = max(lb, math.ceil(holder * (1.0 - NUDGE)))
    if min_deg is not None:
        lb = max(lb, min_deg)
    return max(best, lb), raw, tag


def bound_from_estimates(
    m: int, estimates: Sequence[NormEstimate], perm_cap: int = PERM_CAP, labels: Sequence[str] = ()
) -> BoundResult:
    """Combine the candidates for a given joining-key bound ``m`` and per-relation norm estimates."""
    if m <= 0:
        return BoundResult(0, 0, 0, None, None, "m", raw_bound=0.0, estimates=list(estimates))
    holder, order = None, ()
    if len(estimates) >= 2:
        holder, perm = holder_best_ordering(HolderInput.from_estimates(m, estimates), perm_cap)
        labels = list(labels) or [str(i) for i in range(len(estimates))]
        order = tuple(labels[i] for i in perm)
    min_deg = min_degree_lb(m, estimates)
    lb, raw, tag = _ceil_candidates(m, holder, min_deg)
    return BoundResult(lb, m, m, holder, min_deg, tag, raw_bound=raw, ordering=order, estimates=list(estimates))


def _estimate_combo(
    combo: Sequence[ResolvedRelation], labels, perm_cap: int, keep_cells: bool, force_m: Optional[int]
) -> BoundResult:
    groups = [g for rr in combo for g in rr.key_groups()]
    kb = joining_keys_lb(groups, keep_cells=keep_cells)
    m = kb.m if force_m is None else force_m
    if m <= 0:
        res = BoundResult(0, 0, 0, None, None, "m")
    else:
        ests = [rr.norms(m) for rr in combo]
        res = bound_from_estimates(m, ests, perm_cap, labels)
    res.resolved = list(combo)
    res.cells = kb.cells
    return res


def estimate(
    catalog: StatisticsCatalog,
    query: JoinQuery,
    mode: Mode = "strict",
    perm_cap: int = PERM_CAP,
    keep_cells: bool = False,
    force_m: Optional[int] = None,
) -> BoundResult:
    """Lower bound on the size of ``query``.

    ``force_m`` replaces the computed joining-key bound; it exists for tests
    that reproduce worked examples and voids the soundness guarantee.
    """
    if not query.relations:
        raise ValueError("query has no relations")
    options = [resolve_predicate(catalog, r.name, r.join_column, r.predicate, mode) for r in query.relations]
    labels = [r.label for r in query.relations]
    best = None
    for combo in itertools.product(*options):
        res = _estimate_combo(combo, labels, perm_cap, keep_cells, force_m)
        if best is None or res.lower_bound > best.lower_bound:
            best = res
    best.mode = mode
    return best


def clip(estimate_value: float, bound: BoundResult | int) -> float:
    """Raise an optimizer estimate to the lower bound when it falls below it."""
    if estimate_value < 0:
        raise ValueError("estimates are non-negative")
    lb = bound.lower_bound if isinstance(bound, BoundResult) else bound
    return max(estimate_value, lb)


def q_error(estimate_value: float, truth: float) -> float:
    e = max(float(estimate_value), 1.0)
    t = max(float(truth), 1.0)
    return max(e / t, t / e)
