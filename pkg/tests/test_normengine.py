import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from joinlb.builder import Table, build_catalog, profile_from_degrees
from joinlb.model import And, BuildConfig, Eq, NormProfile, NormPoint, Or, QueryError, Range
from joinlb.normengine import merge_conjunction, norms_at, resolve_predicate, stitch_down, stitch_up
from joinlb.oracle import exact_prefix_norms


def test_stitching_example(stitch_profile):
    assert stitch_up(stitch_profile, 6) == pytest.approx(math.sqrt(18), abs=1e-9)
    assert stitch_down(stitch_profile, 6) == pytest.approx(math.sqrt(28), abs=1e-9)
    assert norms_at(stitch_profile, 6).l2_lb == pytest.approx(math.sqrt(28), abs=1e-9)


def test_stitching_l1(stitch_profile):
    # prefix 1,1,2,2,3,3 has l1 = 12; up gives 6 + 2*2, down gives 20 - 2*4
    assert stitch_up(stitch_profile, 6, "l1") == 10
    assert stitch_down(stitch_profile, 6, "l1") == 12


def test_m_out_of_range(stitch_profile):
    with pytest.raises(ValueError):
        norms_at(stitch_profile, 0)
    with pytest.raises(ValueError):
        norms_at(stitch_profile, 9)


def test_down_floor_uses_min_degree():
    prof = profile_from_degrees([5, 5, 5, 9, 9])
    # 4 -> l1 24; full -> 33; down at 3 from 4: 24 - 9 = 15 == 3 * 5
    assert norms_at(prof, 3).l1_lb == 15


def test_overrides():
    prof = profile_from_degrees([1, 2, 3, 4])
    e = norms_at(prof, 3, linf_ub=10, lminf_lb=1)
    assert e.linf_ub == 10 and e.lminf_lb == 1


@given(st.lists(st.integers(1, 40), min_size=1, max_size=80).map(sorted))
@settings(max_examples=300, deadline=None)
def test_sandwich(seq):
    prof = profile_from_degrees(seq)
    stored = set(prof.prefix_len.tolist())
    for m in range(1, len(seq) + 1):
        l1, l2, linf, lminf = exact_prefix_norms(seq, m)
        e = norms_at(prof, m)
        assert e.l1_lb <= l1
        assert e.l2sq_lb <= sum(v * v for v in seq[:m])
        assert e.linf_lb <= seq[m - 1] <= e.linf_ub
        assert e.lminf_lb <= lminf
        if m in stored:
            assert e.l1_lb == l1 and e.l2sq_lb == sum(v * v for v in seq[:m])


# ---------------------------------------------------------------------------
# predicate resolution


@pytest.fixture
def catalog():
    rng = np.random.default_rng(0)
    keys = rng.integers(0, 50, 600)
    p = rng.integers(0, 16, 600)
    q = rng.integers(0, 3, 600)
    t = Table.from_arrays("R", {"x": keys, "p": p, "q": q}, ["x"])
    return build_catalog([t], BuildConfig(8, 3, 4)), keys, p


def test_unfiltered(catalog):
    cat, keys, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", None)
    assert rr.context.kind == "unfiltered" and rr.context.l0 == len(set(keys.tolist()))


def test_eq_mcv_and_miss(catalog):
    cat, _, p = catalog
    top = sorted(cat.column("R", "x").mcvs["p"])
    (hit,) = resolve_predicate(cat, "R", "x", Eq("p", top[0]))
    assert hit.context.kind == "mcv"
    miss = next(v for v in range(16) if v not in top)
    (rr,) = resolve_predicate(cat, "R", "x", Eq("p", miss))
    assert rr.context.kind == "empty"


def test_range_exact_bucket(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", Range("p", 0, 3))
    assert rr.parts[0].note == "exact bucket"
    assert rr.parts[0].linf_ub is None


def test_range_contained_and_containing(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", Range("p", 2, 9))
    part = rr.parts[0]
    assert (part.context.lo, part.context.hi) == (4, 7)
    assert part.lminf_lb == 1
    assert part.linf_ub == cat.column("R", "x").histograms["p"].layers[-1][0].context.profile.max_degree


def test_range_too_narrow(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", Range("p", 1, 2))
    assert rr.context.kind == "empty"


def test_range_outside_domain(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", Range("p", 100, 200))
    assert rr.context.kind == "empty"
    (rr,) = resolve_predicate(cat, "R", "x", Range("p", -100, 200))
    assert rr.parts[0].note == "exact bucket"
    assert rr.context.l0 == cat.column("R", "x").base.l0


def test_or_strict_gives_options(catalog):
    cat, _, _ = catalog
    opts = resolve_predicate(cat, "R", "x", Or((Range("p", 0, 3), Range("p", 4, 7))))
    assert len(opts) == 2
    (paper,) = resolve_predicate(cat, "R", "x", Or((Range("p", 0, 3), Range("p", 4, 7))), "paper")
    assert paper.combine == "any"


def test_and_same_column_merged(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", And((Range("p", 0, 9), Range("p", -5, 3))))
    assert rr.parts[0].note == "exact bucket"


def test_and_cross_column_empty(catalog):
    cat, _, _ = catalog
    (rr,) = resolve_predicate(cat, "R", "x", And((Range("p", 0, 15), Range("q", 0, 2))))
    assert rr.context.kind == "empty"
    (paper,) = resolve_predicate(cat, "R", "x", And((Range("p", 0, 15), Range("q", 0, 2))), "paper")
    assert paper.combine == "all" and len(paper.key_groups()) == 2


def test_merge_conjunction():
    assert merge_conjunction([Range("p", 0, 9), Range("p", 3, 12)]) == Range("p", 3, 9)
    assert merge_conjunction([Range("p", 0, 9), Eq("p", 4)]) == Eq("p", 4)
    assert merge_conjunction([Range("p", 0, 3), Eq("p", 4)]) is None
    assert merge_conjunction([Eq("p", 1), Eq("p", 2)]) is None
    assert merge_conjunction([Range("p", 5, 9), Range("p", 0, 4)]) is None
    with pytest.raises(ValueError):
        merge_conjunction([Eq("p", 1), Eq("q", 1)])


def test_unknown_column_and_relation(catalog):
    cat, _, _ = catalog
    with pytest.raises(QueryError):
        resolve_predicate(cat, "R", "x", Eq("zzz", 1))
    with pytest.raises(QueryError):
        resolve_predicate(cat, "S", "x", None)
    with pytest.raises(QueryError):
        resolve_predicate(cat, "R", "y", None)


def test_nested_boolean_rejected(catalog):
    cat, _, _ = catalog
    with pytest.raises(QueryError):
        resolve_predicate(cat, "R", "x", And((Or((Eq("p", 1), Eq("p", 2))), Eq("p", 3))))
