import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from joinlb.builder import partitions_from_unique
from joinlb.keybound import KeySetSummary, intersect_lb, joining_keys_lb, sub_range_l0_lb, summary_of
from joinlb.model import Bin

key_sets = st.lists(st.integers(0, 60), min_size=0, max_size=40, unique=True).map(sorted)


def test_intersect_example():
    assert intersect_lb([KeySetSummary(75, 1, 100), KeySetSummary(50, 1, 100)]) == 25


def test_intersect_edge_cases():
    assert intersect_lb([KeySetSummary(4, 1, 10)]) == 4
    assert intersect_lb([KeySetSummary(0), KeySetSummary(10, 1, 10)]) == 0
    assert intersect_lb([KeySetSummary(5, 1, 5), KeySetSummary(5, 1, 5)]) == 5
    with pytest.raises(ValueError):
        intersect_lb([])


def test_summary_rejects_impossible():
    with pytest.raises(ValueError):
        KeySetSummary(11, 1, 10)


@given(st.lists(key_sets, min_size=1, max_size=4))
@settings(max_examples=400, deadline=None)
def test_intersect_sound(sets):
    summaries = [KeySetSummary(len(s), s[0], s[-1]) if s else KeySetSummary(0) for s in sets]
    truth = len(set.intersection(*map(set, sets)))
    assert intersect_lb(summaries) <= truth


def test_sub_range_exhaustive():
    # every key set inside [0, 7] against every query range
    for mask in range(1, 256):
        keys = [k for k in range(8) if mask >> k & 1]
        b = Bin(0, 7, len(keys), keys[0], keys[-1])
        for x in range(-1, 9):
            for y in range(x, 9):
                truth = sum(1 for k in keys if x <= k <= y)
                assert sub_range_l0_lb(b, x, y) <= truth


def test_sub_range_full_bin():
    assert sub_range_l0_lb(Bin(0, 9, 10, 0, 9), 3, 5) == 3
    assert sub_range_l0_lb(Bin(0, 9, 0, 0, 0), 3, 5) == 0


def test_joining_keys_single_partition_matches_intersect():
    a = partitions_from_unique(np.arange(1, 7), 1)
    b = partitions_from_unique(np.arange(3, 9), 1)
    assert joining_keys_lb([a, b]).m == 4


def test_joining_keys_partition_refines():
    a = partitions_from_unique(np.arange(1, 101), 1)
    b = partitions_from_unique(np.r_[np.arange(1, 51), np.arange(100, 101)], 1)
    coarse = joining_keys_lb([a, b]).m
    fine = joining_keys_lb([partitions_from_unique(np.arange(1, 101), 4), partitions_from_unique(np.r_[np.arange(1, 51), [100]], 4)]).m
    assert coarse == 51 and fine >= coarse


def test_joining_keys_disjoint_and_empty():
    a = partitions_from_unique(np.arange(1, 10), 4)
    b = partitions_from_unique(np.arange(20, 30), 4)
    assert joining_keys_lb([a, b]).m == 0
    assert joining_keys_lb([a, partitions_from_unique(np.zeros(0, np.int64), 4)]).m == 0


def test_joining_keys_single_group():
    a = partitions_from_unique(np.array([2, 5, 9]), 2)
    assert joining_keys_lb([a]).m == 3


def test_cells_reported():
    a = partitions_from_unique(np.arange(0, 16), 4)
    res = joining_keys_lb([a, a], keep_cells=True)
    assert res.m == 16
    assert sum(c.intersection_lb for c in res.cells) == 16
    assert [c.lo for c in res.cells] == [0, 4, 8, 12]


@given(st.lists(key_sets, min_size=1, max_size=4), st.sampled_from([1, 2, 3, 4, 16, 256]))
@settings(max_examples=400, deadline=None)
def test_joining_keys_sound(sets, bins):
    stats = [partitions_from_unique(np.array(s, dtype=np.int64), bins) for s in sets]
    truth = len(set.intersection(*map(set, sets)))
    assert joining_keys_lb(stats).m <= truth


@given(st.lists(key_sets, min_size=1, max_size=3), st.integers(1, 5), st.integers(1, 8))
@settings(max_examples=300, deadline=None)
def test_joining_keys_dominates_global(sets, bins, bins2):
    stats = [partitions_from_unique(np.array(s, dtype=np.int64), bins) for s in sets]
    summaries = [summary_of(s) for s in stats]
    assert joining_keys_lb(stats).m >= intersect_lb(summaries)


@given(st.lists(st.lists(key_sets, min_size=1, max_size=3), min_size=1, max_size=3), st.sampled_from([1, 3, 8]))
@settings(max_examples=300, deadline=None)
def test_alternatives_sound(groups, bins):
    # each group is a union of alternatives
    stats = [[partitions_from_unique(np.array(s, dtype=np.int64), bins) for s in g] for g in groups]
    unions = [set().union(*map(set, g)) for g in groups]
    assert joining_keys_lb(stats).m <= len(set.intersection(*unions))


def test_exhaustive_small_universe():
    universe = range(6)
    subsets = [tuple(k for k in universe if m >> k & 1) for m in range(64)]
    for bins in (1, 2, 3):
        stats = {s: partitions_from_unique(np.array(s, dtype=np.int64), bins) for s in subsets}
        for a, b in itertools.product(subsets, repeat=2):
            assert joining_keys_lb([stats[a], stats[b]]).m <= len(set(a) & set(b))


@given(st.lists(st.sets(st.integers(1, 62), max_size=62), min_size=1, max_size=4), st.sampled_from([1, 2, 4, 8, 16, 32]))
@settings(max_examples=300, deadline=None)
def test_aligned_refinement_monotone(sets, bins):
    # pin every set to [0, 63] so both binnings line up across sets
    arrays = [np.array(sorted(s | {0, 63}), dtype=np.int64) for s in sets]
    coarse = joining_keys_lb([partitions_from_unique(a, bins) for a in arrays]).m
    fine = joining_keys_lb([partitions_from_unique(a, 2 * bins) for a in arrays]).m
    assert fine >= coarse


def test_misaligned_refinement_can_lose():
    # ranges [0, 15] and [1, 16]: the halved bins no longer line up across the sets
    a = np.array([0, 2, 3, 8, 9, 14, 15])
    b = np.array([1, 2, 3, 4, 7, 8, 9, 11, 12, 14, 16])
    coarse = joining_keys_lb([partitions_from_unique(a, 1), partitions_from_unique(b, 1)]).m
    fine = joining_keys_lb([partitions_from_unique(a, 2), partitions_from_unique(b, 2)]).m
    assert (coarse, fine) == (1, 0)
