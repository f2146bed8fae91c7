import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from joinlb.builder import Table, build_catalog, profile_from_degrees, partitions_from_unique
from joinlb.model import (
    BuildConfig,
    CatalogError,
    DegreeSequence,
    NormPoint,
    StatisticsCatalog,
    catalog_from_json,
    catalog_to_json,
    load_catalog,
    save_catalog,
    stored_prefix_lengths,
)

degree_lists = st.lists(st.integers(1, 50), min_size=0, max_size=70).map(sorted)


def test_stored_prefixes():
    assert stored_prefix_lengths(0) == []
    assert stored_prefix_lengths(1) == [1]
    assert stored_prefix_lengths(6) == [1, 2, 4, 6]
    assert stored_prefix_lengths(8) == [1, 2, 4, 8]


def test_degree_sequence_rejects_descending():
    with pytest.raises(ValueError):
        DegreeSequence([3, 1])
    with pytest.raises(ValueError):
        DegreeSequence([0, 1])


def test_empty_catalog_round_trip(tmp_path):
    cat = StatisticsCatalog(BuildConfig())
    path = tmp_path / "c.json"
    save_catalog(cat, path)
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["relations"] == {}
    assert load_catalog(path) == cat


def test_one_relation_round_trip(tmp_path):
    t = Table.from_arrays("R", {"x": [5, 5, 6, 9, 9, 9], "p": [1, 2, 1, 1, 3, 3]}, ["x"])
    cat = build_catalog([t], BuildConfig(2, 2, 2))
    save_catalog(cat, tmp_path / "c.json")
    assert load_catalog(tmp_path / "c.json") == cat


def test_toy_round_trip(tmp_path, toy_catalog):
    save_catalog(toy_catalog, tmp_path / "c.json")
    back = load_catalog(tmp_path / "c.json")
    assert back == toy_catalog
    assert back.relations["A"]["x"].base.profile.point(2) == NormPoint(2, 2, 2, 1)


def test_no_floats_persisted(tmp_path, toy_catalog):
    save_catalog(toy_catalog, tmp_path / "c.json")

    def walk(o):
        if isinstance(o, float):
            raise AssertionError(o)
        if isinstance(o, dict):
            for v in o.values():
                walk(v)
        if isinstance(o, list):
            for v in o:
                walk(v)

    walk(json.loads((tmp_path / "c.json").read_text()))


def _doc(catalog):
    return json.loads(json.dumps(catalog_to_json(catalog)))


def test_descending_degrees_rejected(toy_catalog):
    doc = _doc(toy_catalog)
    pts = doc["relations"]["B"]["x"]["base"]["profile"]["points"]
    # (1, 2, 3) stored as (3, 2, 1): linf drops along the prefixes
    pts[0] = [1, 3, 9, 3]
    pts[1] = [2, 5, 13, 2]
    pts[2] = [3, 6, 14, 1]
    with pytest.raises(CatalogError, match="B.x base"):
        catalog_from_json(doc)


def test_bin_sum_mismatch_rejected(toy_catalog):
    doc = _doc(toy_catalog)
    doc["relations"]["A"]["x"]["base"]["partitions"]["l0"][0] += 1
    with pytest.raises(CatalogError, match="A.x base partitions"):
        catalog_from_json(doc)


def test_unknown_version_rejected(toy_catalog, tmp_path):
    doc = _doc(toy_catalog)
    doc["version"] = 2
    (tmp_path / "c.json").write_text(json.dumps(doc))
    with pytest.raises(CatalogError, match="version"):
        load_catalog(tmp_path / "c.json")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_catalog(tmp_path / "nope.json")


def test_unwritable_path(tmp_path, toy_catalog):
    with pytest.raises(OSError):
        save_catalog(toy_catalog, tmp_path / "missing-dir" / "c.json")


@given(degree_lists)
@settings(max_examples=300, deadline=None)
def test_profile_invariants(degrees):
    prof = profile_from_degrees(degrees)
    prof.validate()
    assert prof.l0 == len(degrees)
    if degrees:
        assert prof.l_minus_inf == degrees[0]
        assert prof.row_count == sum(degrees)
        for pt in prof.points:
            head = degrees[: pt.prefix_len]
            assert (pt.l1, pt.l2sq, pt.linf) == (sum(head), sum(d * d for d in head), head[-1])


@given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=60, unique=True), st.integers(1, 300))
@settings(max_examples=200, deadline=None)
def test_partition_invariants(keys, bins):
    ks = np.array(sorted(keys), dtype=np.int64)
    ps = partitions_from_unique(ks, bins)
    ps.validate(len(keys))
    for b in ps.bins:
        inside = [k for k in keys if b.lo <= k <= b.hi]
        assert b.l0 == len(inside)


table_strategy = st.lists(
    st.tuples(st.integers(0, 30), st.one_of(st.none(), st.integers(0, 6))), min_size=1, max_size=80
)


@given(table_strategy, st.integers(1, 8), st.integers(0, 4), st.integers(1, 6))
@settings(max_examples=80, deadline=None)
def test_catalog_round_trip_property(rows, parts, mcvs, buckets):
    keys = [r[0] for r in rows]
    preds = [r[1] if r[1] is not None else 0 for r in rows]
    valid = [r[1] is not None for r in rows]
    t = Table.from_arrays("R", {"x": keys, "p": preds}, ["x"], valid={"p": valid})
    cat = build_catalog([t], BuildConfig(parts, mcvs, buckets))
    cat.validate()
    assert catalog_from_json(json.loads(json.dumps(catalog_to_json(cat)))) == cat
