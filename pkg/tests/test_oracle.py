import numpy as np
import pytest

from joinlb import oracle
from joinlb.model import Eq, JoinQuery, Range, RelationRef


def test_toy_oracles(toy_tables):
    inst = oracle.Instance({t.name: t for t in toy_tables}, names=["A", "B"])
    q = JoinQuery((RelationRef("A", "x"), RelationRef("B", "x")))
    assert oracle.true_join_size(inst, q) == 8
    assert oracle.hash_join_size(inst, q) == 8
    assert oracle.true_joining_keys(inst, q) == 3
    a = oracle.true_degree_sequence([1, 1, 2, 3])
    b = oracle.true_degree_sequence([1, 1, 2, 2, 2, 3])
    assert oracle.crosswise_lb(a, b, 3) == 7
    assert oracle.elementwise_ub(a, b) == 9


def test_crosswise_rejects_long_prefix():
    with pytest.raises(ValueError):
        oracle.crosswise_lb([1], [1, 2], 2)


def test_exact_prefix_norms():
    assert oracle.exact_prefix_norms([1, 1, 2, 2, 3, 3, 4, 4], 6)[1] == pytest.approx(28**0.5)
    with pytest.raises(ValueError):
        oracle.exact_prefix_norms([1], 2)


@pytest.mark.parametrize("seed", range(30))
def test_hash_join_agrees(seed):
    rng = np.random.default_rng(seed)
    spec = oracle.InstanceSpec(relations=int(rng.integers(1, 5)), key_range=30, rows=(80,), null_fraction=0.1, seed=seed)
    inst = oracle.generate_instance(spec)
    q = oracle.random_query(rng, inst, 3)
    assert oracle.true_join_size(inst, q) == oracle.hash_join_size(inst, q)


def test_generator_controls():
    spec = oracle.InstanceSpec(relations=3, key_range=50, skew=0.0, base_degree=2, overlap=0.0, density=1.0, seed=1)
    inst = oracle.generate_instance(spec)
    keys = [set(t.columns["x"].tolist()) for t in inst.tables.values()]
    assert keys[0] == set(range(1, 51))
    assert not keys[0] & keys[1]
    assert np.all(np.bincount(inst.tables["R0"].columns["x"])[1:] == 2)


def test_pin_range():
    spec = oracle.InstanceSpec(relations=2, key_range=64, density=0.1, pin_range=True, seed=4)
    for t in oracle.generate_instance(spec).tables.values():
        assert t.columns["x"].min() == 1 and t.columns["x"].max() == 64


def test_null_predicate_rows_never_qualify():
    from joinlb.builder import Table

    t = Table.from_arrays("R", {"x": [1, 2], "p": [0, 0]}, ["x"], valid={"p": [True, False]})
    assert oracle.qualifying_keys(t, "x", Eq("p", 0)) == [1]
    assert oracle.qualifying_keys(t, "x", Range("p", -5, 5)) == [1]
    assert oracle.qualifying_keys(t, "x", None) == [1, 2]


def test_dump_instance(tmp_path):
    inst = oracle.generate_instance(oracle.InstanceSpec(null_fraction=0.2, seed=3))
    plan = oracle.dump_instance(inst, tmp_path)
    from joinlb.builder import load_ingest_plan

    tables = {t.name: t for t in load_ingest_plan(plan)}
    for name, t in inst.tables.items():
        back = tables[name]
        for c in t.columns:
            assert back.valid[c].tolist() == t.valid[c].tolist()
            assert back.columns[c][back.valid[c]].tolist() == t.columns[c][t.valid[c]].tolist()
