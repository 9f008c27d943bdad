"""Reference rankers: the quadratic DP baseline and a possible-worlds oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .browsing import build_browsing
from .dataset import MASS_SLACK, QueryPoint, UncertainDatabase
from .engine import (
    InstanceRankMatrix,
    ObjectRankDistribution,
    PassStats,
    RankResult,
    rank_stream,
)

DEFAULT_WORLD_LIMIT = 10**7

ABSENT = None


class EnumerationLimitExceeded(RuntimeError):
    pass


def ylks_rank(db: UncertainDatabase, q: QueryPoint, k: int, **kw) -> RankResult:
    """Per instance, evaluate the DP recursion from scratch over all seen objects.

    O(k * |seen|) per instance, O(k n^2) overall. Same output contract,
    mass accounting and stop rule as :func:`psrank.engine.psr_rank`.
    """
    return rank_stream(build_browsing(db, q), k, "ylks", **kw)


@dataclass(frozen=True)
class WorldOutcome:
    choices: tuple[int | None, ...]  # instance index per object, or ABSENT
    probability: float


def _choice_lists(db: UncertainDatabase) -> list[list[tuple[int | None, float]]]:
    lists = []
    for o in db.objects:
        opts: list[tuple[int | None, float]] = [(j, inst.probability) for j, inst in enumerate(o.instances)]
        missing = 1.0 - o.mass
        if missing > MASS_SLACK:
            opts.append((ABSENT, missing))
        lists.append(opts)
    return lists


def world_count(db: UncertainDatabase) -> int:
    return math.prod(len(c) for c in _choice_lists(db))


def enumerate_worlds(db: UncertainDatabase, limit: int = DEFAULT_WORLD_LIMIT) -> Iterator[WorldOutcome]:
    lists = _choice_lists(db)
    total = math.prod(len(c) for c in lists)
    if total > limit:
        raise EnumerationLimitExceeded(
            f"{total} possible worlds exceed the enumeration limit of {limit}"
        )
    for combo in itertools.product(*lists):
        prob = 1.0
        for _, p in combo:
            prob *= p
        yield WorldOutcome(tuple(c for c, _ in combo), prob)


def possible_worlds_rank(
    db: UncertainDatabase, q: QueryPoint, k: int, limit: int = DEFAULT_WORLD_LIMIT
) -> RankResult:
    """Ground truth by enumerating every possible world.

    Objects present in a world are ordered by their chosen instance's
    position in the browsing stream (distance, then ids), so ties resolve
    exactly as in the engines. Accumulated instance mass is divided by the
    instance probability to give the engines' conditional row convention.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    stream = build_browsing(db, q)
    n = len(stream)
    pos_of = {
        (int(o), int(i)): r for r, (o, i) in enumerate(zip(stream.object_ids, stream.instance_ids))
    }
    # stream position of each (object index, instance index)
    rank_key = [
        [pos_of[(o.object_id, inst.instance_id)] for inst in o.instances] for o in db.objects
    ]
    acc = np.zeros((n, k))
    for world in enumerate_worlds(db, limit):
        present = sorted(
            rank_key[j][c] for j, c in enumerate(world.choices) if c is not ABSENT
        )
        for rank, r in enumerate(present[:k]):
            acc[r, rank] += world.probability
    rows = acc / stream.probabilities[:, None] if n else acc
    uniq = np.array(sorted(o.object_id for o in db.objects), dtype=np.int64)
    index = {int(o): j for j, o in enumerate(uniq)}
    obj = np.zeros((len(uniq), k))
    for r in range(n):
        obj[index[int(stream.object_ids[r])]] += acc[r]
    stats = PassStats(engine="worlds", backend="python", k=k, rows=n, total_instances=n)
    matrix = InstanceRankMatrix(stream.object_ids, stream.instance_ids, stream.distances, rows, stats)
    return RankResult(matrix, ObjectRankDistribution(uniq, obj))


def max_abs_diff(a: InstanceRankMatrix, b: InstanceRankMatrix) -> float:
    """Largest elementwise difference, aligning rows by (object_id, instance_id).

    Rows missing from one side (early stop) count as all-zero.
    """
    if a.p_rank is None or b.p_rank is None:
        raise ValueError("rows were not kept")
    n = min(len(a), len(b))
    m = min(a.k, b.k)
    if (np.array_equal(a.object_ids[:n], b.object_ids[:n])
            and np.array_equal(a.instance_ids[:n], b.instance_ids[:n])):
        # same browsing order: compare positionally, the longer tail against zero
        worst = float(np.max(np.abs(a.p_rank[:n, :m] - b.p_rank[:n, :m]), initial=0.0))
        for rest in (a.p_rank[n:, :m], b.p_rank[n:, :m]):
            worst = max(worst, float(np.max(np.abs(rest), initial=0.0)))
        return worst
    da, db_ = a.to_dict(), b.to_dict()
    worst = 0.0
    zero = np.zeros(max(a.k, b.k))
    for key in da.keys() | db_.keys():
        ra = da.get(key, zero[: a.k])
        rb = db_.get(key, zero[: b.k])
        m = min(len(ra), len(rb))
        worst = max(worst, float(np.max(np.abs(ra[:m] - rb[:m]), initial=0.0)))
    return worst
