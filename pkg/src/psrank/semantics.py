"""Deterministic rankings derived from rank-probability tables.

Four query models: U-kRanks, PT-k, Global top-k and a conditional
expected rank. Every method is a pure function of a :class:`RankTable`.

Ties are resolved by ascending entry id. Scores that differ by at most
``tol`` (default 1e-9) count as tied, so tables that agree to that
accuracy, e.g. an engine result and the possible-worlds oracle, select
identical entries.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Sequence

import numpy as np

from .dataset import UncertainDatabase
from .engine import InstanceRankMatrix, ObjectRankDistribution

TIE_TOL = 1e-9
METHODS = ("ukranks", "ptk", "globaltopk", "expectedrank")


@dataclass(frozen=True)
class RankTable:
    """``p_rank[j, i]``: probability that entry ``ids[j]`` is at rank ``i+1``.

    Object-level ids are object ids; instance-level ids are
    ``(object_id, instance_id)`` tuples.
    """

    ids: tuple[Hashable, ...]
    p_rank: np.ndarray
    level: str = "object"

    def __post_init__(self):
        p = np.asarray(self.p_rank, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != len(self.ids):
            raise ValueError("p_rank must be (len(ids), k)")
        object.__setattr__(self, "p_rank", p)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def k(self) -> int:
        return self.p_rank.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_objects(cls, dist: ObjectRankDistribution) -> "RankTable":
        return cls(tuple(int(o) for o in dist.object_ids), dist.p_rank, "object")

    @classmethod
    def from_instances(
        cls, matrix: InstanceRankMatrix, db: UncertainDatabase | None = None
    ) -> "RankTable":
        """Instance table; with ``db``, instances after an early stop get zero rows."""
        if matrix.p_rank is None:
            raise ValueError("rows were not kept")
        ids = [(int(o), int(i)) for o, i in zip(matrix.object_ids, matrix.instance_ids)]
        rows = matrix.p_rank
        if db is not None:
            have = set(ids)
            extra = [(o.object_id, x.instance_id) for o in db.objects for x in o.instances
                     if (o.object_id, x.instance_id) not in have]
            if extra:
                ids += extra
                rows = np.vstack([rows, np.zeros((len(extra), matrix.k))])
        return cls(tuple(ids), rows, "instance")

    @classmethod
    def read_csv(cls, path: str | Path) -> "RankTable":
        """Read an object or instance CSV as written by the rank command."""
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            body = list(r)
        if header[0] == "object_id":
            ids = [int(row[0]) for row in body]
            vals = [[float(x) for x in row[1:]] for row in body]
            level = "object"
        elif header[:4] == ["row", "object_id", "instance_id", "distance"]:
            ids = [(int(row[1]), int(row[2])) for row in body]
            vals = [[float(x) for x in row[4:]] for row in body]
            level = "instance"
        else:
            raise ValueError(f"{path}: not a rank table CSV")
        k = len(header) - (1 if level == "object" else 4)
        return cls(tuple(ids), np.array(vals, dtype=np.float64).reshape(len(ids), k), level)


@dataclass
class SemanticsResult:
    method: str
    level: str
    ranking: list
    scores: list[float]
    flags: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = {"method": self.method, "level": self.level,
             "ranking": [_jsonable(e) for e in self.ranking],
             "scores": [_json_float(s) for s in self.scores]}
        d.update(self.flags)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _jsonable(entry):
    return list(entry) if isinstance(entry, tuple) else entry


def _json_float(x: float):
    # JSON has no infinity literal
    return x if math.isfinite(x) else "inf"


def _order(ids: Sequence[Hashable], scores: np.ndarray, descending: bool, tol: float) -> list[int]:
    """Indices sorted by score; runs of scores within ``tol`` of the run's first are id-ordered."""
    s = -scores if descending else scores
    idx = sorted(range(len(ids)), key=lambda j: (s[j], ids[j]))
    out: list[int] = []
    g = 0
    while g < len(idx):
        h = g + 1
        while h < len(idx) and s[idx[h]] - s[idx[g]] <= tol:
            h += 1
        out.extend(sorted(idx[g:h], key=lambda j: ids[j]))
        g = h
    return out


def _check(table: RankTable, k: int):
    if len(table) == 0:
        raise ValueError("empty rank table")
    if not 1 <= k <= table.k:
        raise ValueError(f"k must be in [1, {table.k}], got {k}")


def u_k_ranks(table: RankTable, k: int | None = None, tol: float = TIE_TOL) -> SemanticsResult:
    """Most likely entry at each rank 1..k.

    An entry may win several ranks. Ranks whose best probability is at most
    ``tol`` go to the tie-break winner and are listed under ``unsupported``.
    """
    k = table.k if k is None else k
    _check(table, k)
    winners, scores, unsupported = [], [], []
    for i in range(k):
        col = table.p_rank[:, i]
        best = col.max()
        j = min((j for j in range(len(table)) if col[j] >= best - tol), key=lambda j: table.ids[j])
        winners.append(table.ids[j])
        scores.append(float(col[j]))
        if best <= tol:
            unsupported.append(i + 1)
    return SemanticsResult("ukranks", table.level, winners, scores, {"unsupported": unsupported})


def top_k_mass(table: RankTable, k: int) -> np.ndarray:
    """Probability of each entry being among the first k ranks."""
    _check(table, k)
    return table.p_rank[:, :k].sum(axis=1)


def pt_k(table: RankTable, k: int, threshold: float, tol: float = TIE_TOL) -> SemanticsResult:
    """Entries whose top-k probability strictly exceeds ``threshold``, by id.

    Scores within ``tol`` of the threshold count as equal to it and are
    therefore excluded.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    mass = top_k_mass(table, k)
    keep = sorted((j for j in range(len(table)) if mass[j] > threshold + tol),
                  key=lambda j: table.ids[j])
    return SemanticsResult("ptk", table.level, [table.ids[j] for j in keep],
                           [float(mass[j]) for j in keep], {"threshold": threshold})


def global_top_k(table: RankTable, k: int, tol: float = TIE_TOL) -> SemanticsResult:
    """The k entries with the highest top-k probability, best first.

    With fewer than k entries all are returned and ``short`` is set.
    """
    mass = top_k_mass(table, k)
    order = _order(table.ids, mass, True, tol)[:k]
    return SemanticsResult("globaltopk", table.level, [table.ids[j] for j in order],
                           [float(mass[j]) for j in order], {"short": len(table) < k})


def expected_rank(table: RankTable, tol: float = TIE_TOL) -> SemanticsResult:
    """All entries by ascending conditional expected rank.

    score = sum_i i * p_rank[i] / sum_i p_rank[i] with ranks counted from 1;
    entries without mass score +inf. Meaningful on untruncated tables
    (k = number of objects).
    """
    _check(table, 1)
    ranks = np.arange(1, table.k + 1, dtype=np.float64)
    mass = table.p_rank.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(mass > 0, table.p_rank @ ranks / np.where(mass > 0, mass, 1.0), np.inf)
    order = _order(table.ids, score, False, tol)
    return SemanticsResult("expectedrank", table.level, [table.ids[j] for j in order],
                           [float(score[j]) for j in order])


def apply(method: str, table: RankTable, k: int | None = None,
          threshold: float | None = None, tol: float = TIE_TOL) -> SemanticsResult:
    """Dispatch by method tag."""
    k = table.k if k is None else k
    if method == "ukranks":
        return u_k_ranks(table, k, tol)
    if method == "ptk":
        if threshold is None:
            raise ValueError("ptk needs a threshold")
        return pt_k(table, k, threshold, tol)
    if method == "globaltopk":
        return global_top_k(table, k, tol)
    if method == "expectedrank":
        return expected_rank(table, tol)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
