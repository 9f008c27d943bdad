import numpy as np
import pytest

from psrank.browsing import build_browsing
from psrank.dataset import DimensionMismatch, QueryPoint, UncertainDatabase, make_database
from factories import E1, random_query, random_small_db


def order(stream):
    return [(r.object_id, r.instance_id) for r in stream]


def test_e1_order_and_distances():
    s = build_browsing(E1, QueryPoint((0.0,)))
    items = list(s)
    assert [(r.object_id, r.instance_id, r.distance) for r in items] == [(0, 0, 1.0), (1, 0, 2.0), (0, 1, 3.0)]
    assert [r.probability for r in items] == [0.6, 1.0, 0.4]


def test_ties_broken_by_object_then_instance_id():
    db = make_database([(5, [(1.0, 0.5), (-1.0, 0.5)]), (2, [(1.0, 1.0)])])
    assert order(build_browsing(db, QueryPoint((0.0,)))) == [(2, 0), (5, 0), (5, 1)]


def test_empty_database_gives_empty_stream():
    s = build_browsing(UncertainDatabase(2, ()), QueryPoint((0.0, 0.0)))
    assert len(s) == 0 and s.next() is None


def test_next_then_exhausted():
    s = build_browsing(make_database([(0, [(4.0, 1.0)])]), QueryPoint((0.0,)))
    assert s.next().object_id == 0
    assert s.next() is None


def test_third_call_on_e1_is_a2():
    s = build_browsing(E1, QueryPoint((0.0,)))
    s.next(), s.next()
    assert s.next()[:2] == (0, 1)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        build_browsing(E1, QueryPoint((0.0, 0.0)))


@pytest.mark.parametrize("seed", range(20))
def test_permutation_monotone_deterministic(seed):
    rng = np.random.default_rng(seed)
    db = random_small_db(rng)
    q = random_query(rng, db)
    s = build_browsing(db, q)
    emitted = order(s)
    assert sorted(emitted) == sorted((o.object_id, i.instance_id) for o in db.objects for i in o.instances)
    assert np.all(np.diff(s.distances) >= 0)
    assert order(build_browsing(db, q)) == emitted
