import json
import math

import numpy as np
import pytest

from psrank.semantics import RankTable, apply, expected_rank, global_top_k, pt_k, u_k_ranks

E1_TABLE = RankTable((0, 1), np.array([[0.6, 0.4], [0.4, 0.6]]))


def test_ukranks_e1():
    r = u_k_ranks(E1_TABLE, 2)
    assert r.ranking == [0, 1] and r.flags["unsupported"] == []


def test_ukranks_all_zero_column_is_unsupported():
    r = u_k_ranks(RankTable((4,), np.array([[1.0, 0.0]])), 2)
    assert r.ranking == [4, 4]
    assert r.flags["unsupported"] == [2]


def test_ukranks_ties_go_to_smaller_id():
    r = u_k_ranks(RankTable((9, 3), np.array([[0.5, 0.5], [0.5, 0.5]])), 2)
    assert r.ranking == [3, 3]


def test_ukranks_same_entry_may_win_several_ranks():
    t = RankTable((0, 1, 2), np.array([[0.5, 0.45, 0.05], [0.3, 0.3, 0.4], [0.2, 0.25, 0.55]]))
    assert u_k_ranks(t).ranking == [0, 0, 2]


def test_ptk_examples():
    assert pt_k(E1_TABLE, 1, 0.5).ranking == [0]
    assert pt_k(E1_TABLE, 2, 1.0).ranking == []
    t = RankTable((0, 1, 2), np.array([[0.1, 0.0], [0.0, 0.0], [0.0, 0.3]]))
    assert pt_k(t, 2, 0.0).ranking == [0, 2]


def test_ptk_is_strict():
    t = RankTable((0, 1), np.array([[0.5, 0.0], [0.5000000001, 0.0]]))
    assert pt_k(t, 1, 0.5).ranking == []
    with pytest.raises(ValueError):
        pt_k(t, 1, 1.5)


def test_global_top_k_examples():
    assert global_top_k(E1_TABLE, 1).ranking == [0]
    r = global_top_k(E1_TABLE, 2)
    assert r.ranking == [0, 1] and not r.flags["short"]
    t = RankTable((7, 2), np.array([[0.3, 0.2], [0.1, 0.4]]))
    assert global_top_k(t, 2).ranking == [2, 7]


def test_global_top_k_short():
    r = global_top_k(RankTable((1,), np.array([[0.5, 0.5]])), 2)
    assert r.ranking == [1] and r.flags["short"]


def test_expected_rank_examples():
    r = expected_rank(E1_TABLE)
    assert r.ranking == [0, 1]
    np.testing.assert_allclose(r.scores, [1.4, 1.6])
    chain = RankTable((0, 1), np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert expected_rank(chain).scores == [1.0, 2.0]
    r = expected_rank(RankTable((0, 1), np.array([[0.0, 0.0], [0.2, 0.1]])))
    assert r.ranking == [1, 0] and math.isinf(r.scores[1])


def test_json_payload():
    d = json.loads(expected_rank(RankTable((0, 1), np.array([[0.0, 0.0], [1.0, 0.0]]))).to_json())
    assert d == {"method": "expectedrank", "level": "object", "ranking": [1, 0], "scores": [1.0, "inf"]}
    t = RankTable(((0, 1), (2, 0)), np.array([[0.2], [0.9]]), "instance")
    assert json.loads(u_k_ranks(t).to_json())["ranking"] == [[2, 0]]


def test_empty_table():
    with pytest.raises(ValueError):
        u_k_ranks(RankTable((), np.zeros((0, 2))), 1)


def test_ukranks_invariant_under_column_scaling():
    rng = np.random.default_rng(0)
    p = rng.random((8, 5))
    t = RankTable(tuple(range(8)), p)
    scaled = RankTable(tuple(range(8)), p * rng.uniform(0.1, 10, 5))
    assert u_k_ranks(t).ranking == u_k_ranks(scaled).ranking


def test_ptk_zero_contains_global_top_k():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = RankTable(tuple(range(6)), rng.random((6, 3)) * (rng.random((6, 1)) > 0.3))
        if (t.p_rank.sum(axis=1) > 0).sum() >= 3:
            assert set(global_top_k(t, 3).ranking) <= set(pt_k(t, 3, 0.0).ranking)


def test_pure_function():
    assert apply("globaltopk", E1_TABLE, 1).to_dict() == apply("globaltopk", E1_TABLE, 1).to_dict()
    with pytest.raises(ValueError):
        apply("utopk", E1_TABLE)
    with pytest.raises(ValueError):
        apply("ptk", E1_TABLE, 1)


def test_read_csv_tables(tmp_path):
    from psrank.engine import psr_rank
    from psrank.dataset import QueryPoint
    from factories import E1

    inst, objs = psr_rank(E1, QueryPoint((0.0,)), 2)
    objs.to_csv(tmp_path / "o.csv")
    inst.to_csv(tmp_path / "i.csv")
    t = RankTable.read_csv(tmp_path / "o.csv")
    assert t.level == "object" and t.ids == (0, 1)
    np.testing.assert_array_equal(t.p_rank, objs.p_rank)
    ti = RankTable.read_csv(tmp_path / "i.csv")
    assert ti.level == "instance" and ti.ids == ((0, 0), (1, 0), (0, 1))
    assert RankTable.from_instances(inst).ids == ti.ids
