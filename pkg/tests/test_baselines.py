import math

import numpy as np
import pytest

from psrank.baselines import (
    EnumerationLimitExceeded,
    enumerate_worlds,
    max_abs_diff,
    possible_worlds_rank,
    world_count,
    ylks_rank,
)
from psrank.dataset import QueryPoint, make_database
from psrank.engine import psr_rank
from factories import E1, E1_OBJECTS, E1_ROWS, random_query, random_small_db

Q0 = QueryPoint((0.0,))


def test_worlds_e1():
    inst, objs = possible_worlds_rank(E1, Q0, 2)
    for key, row in E1_ROWS.items():
        np.testing.assert_allclose(inst.row(*key), row, atol=1e-15)
    for oid, dist in E1_OBJECTS.items():
        np.testing.assert_allclose(objs[oid], dist, atol=1e-15)


def test_worlds_single_existential_object():
    db = make_database([(0, [(1.0, 0.5)])])
    inst, objs = possible_worlds_rank(db, Q0, 1)
    np.testing.assert_allclose(inst.p_rank, [[1.0]])
    np.testing.assert_allclose(objs[0], [0.5])


def test_world_probabilities_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(10):
        db = random_small_db(rng)
        worlds = list(enumerate_worlds(db))
        assert len(worlds) == world_count(db)
        assert math.isclose(math.fsum(w.probability for w in worlds), 1.0, abs_tol=1e-9)


def test_enumeration_guard_checks_before_enumerating():
    db = make_database([(j, [(float(j), 0.25)] * 4) for j in range(12)])
    assert world_count(db) == 4 ** 12
    with pytest.raises(EnumerationLimitExceeded):
        possible_worlds_rank(db, Q0, 2)


def test_ylks_e1_matches_psr():
    a = ylks_rank(E1, Q0, 2)
    b = psr_rank(E1, Q0, 2)
    assert max_abs_diff(a.instances, b.instances) <= 1e-15


def test_ylks_single_instance():
    inst, _ = ylks_rank(make_database([(0, [(1.0, 1.0)])]), Q0, 3)
    np.testing.assert_array_equal(inst.p_rank, [[1, 0, 0]])


def test_ylks_two_certain_objects():
    inst, _ = ylks_rank(make_database([(0, [(1.0, 1.0)]), (1, [(2.0, 1.0)])]), Q0, 2)
    np.testing.assert_array_equal(inst.p_rank, [[1, 0], [0, 1]])


@pytest.mark.parametrize("seed", range(30))
def test_three_engines_agree(seed):
    rng = np.random.default_rng(1000 + seed)
    db = random_small_db(rng)
    q = random_query(rng, db)
    k = len(db)
    ref = possible_worlds_rank(db, q, k)
    for fn in (psr_rank, ylks_rank):
        res = fn(db, q, k)
        assert max_abs_diff(res.instances, ref.instances) <= 1e-9
        np.testing.assert_allclose(res.objects.p_rank, ref.objects.p_rank, rtol=0, atol=1e-9)


def test_max_abs_diff_treats_missing_rows_as_zero():
    db = make_database([(j, [(float(j + 1), 1.0)]) for j in range(4)])
    short = psr_rank(db, Q0, 1)
    full = psr_rank(db, Q0, 1, early_stop=False)
    assert len(short.instances) < len(full.instances)
    assert max_abs_diff(short.instances, full.instances) == 0.0
    # different row order falls back to keyed alignment
    ref = possible_worlds_rank(db, Q0, 1)
    assert max_abs_diff(ref.instances, short.instances) == 0.0
