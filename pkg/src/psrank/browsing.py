"""Distance browsing: all instances in ascending distance from a query point.

Realised by presorting, which costs O(n log n) once; ties are broken by
(object_id, instance_id) so the stream order is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .dataset import DimensionMismatch, QueryPoint, UncertainDatabase, distances_to


class RankedInstance(NamedTuple):
    object_id: int
    instance_id: int
    probability: float
    distance: float


@dataclass
class BrowsingStream:
    """Sorted instance stream plus a single-consumer cursor.

    The arrays are exposed so that the ranking kernels can consume the
    whole stream without per-element Python overhead.
    """

    object_ids: np.ndarray
    instance_ids: np.ndarray
    probabilities: np.ndarray
    distances: np.ndarray
    cursor: int = 0

    def __len__(self) -> int:
        return len(self.object_ids)

    def next(self) -> RankedInstance | None:
        """Return the next instance, or ``None`` once the stream is exhausted."""
        if self.cursor >= len(self.object_ids):
            return None
        r = self.cursor
        self.cursor += 1
        return RankedInstance(
            int(self.object_ids[r]),
            int(self.instance_ids[r]),
            float(self.probabilities[r]),
            float(self.distances[r]),
        )

    def __iter__(self) -> Iterator[RankedInstance]:
        while (item := self.next()) is not None:
            yield item

    def dense_objects(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map object ids to 0..N-1 in ascending id order.

        Returns ``(unique_ids, dense_index_per_row, instance_count_per_object)``.
        """
        uniq, dense, counts = np.unique(self.object_ids, return_inverse=True, return_counts=True)
        return uniq, dense.astype(np.int64), counts.astype(np.int64)


def build_browsing(db: UncertainDatabase, q: QueryPoint) -> BrowsingStream:
    if len(q) != db.dimensionality:
        raise DimensionMismatch(
            f"dimension mismatch: database has {db.dimensionality} dims, query has {len(q)}"
        )
    oids, iids, probs, pos = db.to_arrays()
    if len(oids) == 0:
        return BrowsingStream(oids, iids, probs, np.empty(0))
    dist = distances_to(pos, q.position)
    # lexsort: last key is primary
    order = np.lexsort((iids, oids, dist))
    return BrowsingStream(oids[order], iids[order], probs[order], dist[order])
