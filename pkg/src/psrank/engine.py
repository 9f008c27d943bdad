"""Incremental rank-probability engine (PSR).

One pass over the distance-ordered instance stream. The rank vector of
each instance is derived from that of its predecessor in O(k):

* Case 1, same object as the predecessor: copy.
* Case 2, first instance of a new object: one :func:`~psrank.dp.dynamic_round`
  folding in the predecessor's object.
* Case 3, another instance of a seen object: remove that object's factor
  (:func:`~psrank.dp.adjust_probs`), then fold in the predecessor's object.

The stable variant (default) carries a guard band of extra entries beyond
k and guards the removal step, which amplifies rounding error:

* when the vector's top is zero the removal is overdetermined and is solved
  bottom-up for masses up to 1/2, by least squares above;
* a truncated vector is solved top-down when that direction damps error;
* entries are clipped to [0, 1] and to tail bounds around the expected count;
* a clipped entry below ``-REFRESH_TOL``, or a zero-top removal whose
  residual exceeds it, marks grown noise and triggers an exact rebuild of
  the vector (counted in ``PassStats.fallbacks``).

``stable=False`` runs the plain length-k recurrence, which loses all
accuracy once objects with seen mass well above 1/2 are removed at depth k
of a few dozen.
"""

from __future__ import annotations

import contextlib
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, TextIO

import numpy as np

from . import _backend
from .browsing import BrowsingStream, build_browsing
from .dataset import MASS_SLACK, QueryPoint, UncertainDatabase


def default_guard(k: int) -> int:
    return max(2 * k, 8)


class ActiveObjectList:
    """Per-object seen probability mass with O(1) lookup and update."""

    def __init__(self, instance_counts: dict[int, int] | None = None):
        self._mass: dict[int, float] = {}
        self._remaining: dict[int, int] = dict(instance_counts or {})

    def update(self, object_id: int, p: float) -> float:
        """Add ``p`` to the object's mass, capped at 1.

        A completed object within :data:`MASS_SLACK` of 1 is snapped to
        exactly 1 so it counts as certainly present.
        """
        m = self._mass.get(object_id, 0.0) + p
        left = None
        if object_id in self._remaining:
            self._remaining[object_id] -= 1
            left = self._remaining[object_id]
        if m > 1.0 or (left == 0 and m >= 1.0 - MASS_SLACK):
            m = 1.0
        self._mass[object_id] = m
        return m

    def get_prob(self, object_id: int) -> float:
        return self._mass.get(object_id, 0.0)

    def remaining(self, object_id: int) -> int | None:
        return self._remaining.get(object_id)

    def masses(self) -> dict[int, float]:
        return self._mass

    def active_count(self) -> int:
        """Objects seen with at least one instance still to come."""
        return sum(1 for o in self._mass if self._remaining.get(o, 1) > 0)

    def __contains__(self, object_id: int) -> bool:
        return object_id in self._mass

    def __len__(self) -> int:
        return len(self._mass)


@dataclass
class PassStats:
    engine: str
    backend: str
    k: int
    rows: int
    total_instances: int
    case1: int = 0
    case2: int = 0
    case3: int = 0
    reverse_solves: int = 0  # top-down removals of a truncated vector
    fallbacks: int = 0  # exact rebuilds of the vector
    avg_aol_size: float = 0.0
    seconds: float = 0.0

    @property
    def unreached(self) -> int:
        return self.total_instances - self.rows

    @property
    def early_stopped(self) -> bool:
        return self.rows < self.total_instances


@dataclass
class InstanceRankMatrix:
    """Per-instance rank probabilities in browsing order.

    ``p_rank[r, i]`` is the probability that exactly ``i`` other objects are
    closer than the instance of row ``r``, i.e. that it is at rank ``i+1``,
    given that its object is located at that instance. Instances after an
    early stop have implicit all-zero rows and are not stored.
    """

    object_ids: np.ndarray
    instance_ids: np.ndarray
    distances: np.ndarray
    p_rank: np.ndarray | None
    stats: PassStats

    @property
    def k(self) -> int:
        return self.stats.k

    def __len__(self) -> int:
        return self.stats.rows

    def row(self, object_id: int, instance_id: int) -> np.ndarray:
        if self.p_rank is None:
            raise ValueError("rows were not kept")
        hit = np.flatnonzero((self.object_ids == object_id) & (self.instance_ids == instance_id))
        if hit.size == 0:
            return np.zeros(self.k)
        return self.p_rank[hit[0]]

    def to_dict(self) -> dict[tuple[int, int], np.ndarray]:
        if self.p_rank is None:
            raise ValueError("rows were not kept")
        return {
            (int(o), int(i)): self.p_rank[r]
            for r, (o, i) in enumerate(zip(self.object_ids, self.instance_ids))
        }

    def to_csv(self, path: str | Path | TextIO) -> None:
        if self.p_rank is None:
            raise ValueError("rows were not kept")
        with _sink(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "object_id", "instance_id", "distance"]
                       + [f"p_rank_{i + 1}" for i in range(self.k)])
            for r in range(len(self)):
                w.writerow([r, int(self.object_ids[r]), int(self.instance_ids[r]),
                            _g17(self.distances[r])] + [_g17(x) for x in self.p_rank[r]])


@dataclass
class ObjectRankDistribution:
    """``p_rank[j, i]`` = probability that object ``object_ids[j]`` is at rank ``i+1``."""

    object_ids: np.ndarray
    p_rank: np.ndarray
    _index: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {int(o): j for j, o in enumerate(self.object_ids)}

    @property
    def k(self) -> int:
        return self.p_rank.shape[1]

    def __getitem__(self, object_id: int) -> np.ndarray:
        return self.p_rank[self._index[int(object_id)]]

    def __len__(self) -> int:
        return len(self.object_ids)

    def to_dict(self) -> dict[int, np.ndarray]:
        return {int(o): self.p_rank[j] for j, o in enumerate(self.object_ids)}

    def to_csv(self, path: str | Path | TextIO) -> None:
        with _sink(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["object_id"] + [f"p_rank_{i + 1}" for i in range(self.k)])
            for j, o in enumerate(self.object_ids):
                w.writerow([int(o)] + [_g17(x) for x in self.p_rank[j]])


class RankResult(NamedTuple):
    instances: InstanceRankMatrix
    objects: ObjectRankDistribution


def _sink(path):
    """Open ``path`` for writing, or pass an open text stream through unclosed."""
    if hasattr(path, "write"):
        return contextlib.nullcontext(path)
    return open(path, "w", newline="", encoding="utf-8")


def _g17(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class PreparedStream:
    """A browsing stream reduced to the arrays the kernels consume."""

    stream: BrowsingStream
    object_ids: np.ndarray  # ascending unique ids
    dense: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_stream(cls, stream: BrowsingStream) -> "PreparedStream":
        uniq, dense, counts = stream.dense_objects()
        return cls(stream, uniq, np.ascontiguousarray(dense),
                   np.ascontiguousarray(counts))

    def __len__(self) -> int:
        return len(self.dense)


def run_pass(
    prepared: PreparedStream,
    k: int,
    engine: str = "psr",
    *,
    early_stop: bool = True,
    stable: bool = True,
    guard: int | None = None,
    backend: str | None = None,
    keep_rows: bool = True,
) -> RankResult:
    """Run one engine over a prepared stream. Timing covers the pass only."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kern = _backend.get(backend)
    bname = "compiled" if kern is _backend.compiled else "python"
    n = len(prepared)
    probs = np.ascontiguousarray(prepared.stream.probabilities, dtype=np.float64)
    rows = np.zeros((n, k)) if keep_rows else None
    obj_dist = np.zeros((len(prepared.counts), k))
    stats = PassStats(engine=engine, backend=bname, k=k, rows=0, total_instances=n)
    if n:
        t0 = time.perf_counter()
        if engine == "psr":
            g = default_guard(k) if guard is None else guard
            out = kern.psr_pass(prepared.dense, probs, prepared.counts, k, g,
                                early_stop, stable, rows, obj_dist)
            stats.seconds = time.perf_counter() - t0
            (stats.rows, stats.case1, stats.case2, stats.case3,
             stats.reverse_solves, stats.fallbacks, aol_sum) = out
        elif engine == "ylks":
            out = kern.ylks_pass(prepared.dense, probs, prepared.counts, k,
                                 early_stop, rows, obj_dist)
            stats.seconds = time.perf_counter() - t0
            stats.rows, aol_sum = out
        else:
            raise ValueError(f"unknown engine {engine!r}")
        stats.avg_aol_size = aol_sum / stats.rows if stats.rows else 0.0
    r = stats.rows
    s = prepared.stream
    matrix = InstanceRankMatrix(
        s.object_ids[:r], s.instance_ids[:r], s.distances[:r],
        rows[:r] if rows is not None else None, stats,
    )
    return RankResult(matrix, ObjectRankDistribution(prepared.object_ids, obj_dist))


def rank_stream(stream: BrowsingStream, k: int, engine: str = "psr", **kw) -> RankResult:
    return run_pass(PreparedStream.from_stream(stream), k, engine, **kw)


def psr_rank(db: UncertainDatabase, q: QueryPoint, k: int, **kw) -> RankResult:
    """Rank probabilities for the first k ranks of every instance and object.

    Returns ``(instances, objects)``. Keyword options: ``early_stop``
    (default True), ``stable`` (default True), ``guard``, ``backend``,
    ``keep_rows``.
    """
    return rank_stream(build_browsing(db, q), k, "psr", **kw)
