"""Uncertain vector objects, validation, distance, and dataset file I/O.

An uncertain object is a set of mutually exclusive weighted instances
(an x-tuple). Instance probabilities of one object sum to at most 1; a
deficit encodes the chance that the object does not exist at all.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MASS_SLACK = 1e-12


class DimensionMismatch(ValueError):
    """Raised when vectors or a query disagree with the database dimensionality."""


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class VectorInstance:
    instance_id: int
    position: tuple[float, ...]
    probability: float


@dataclass(frozen=True)
class UncertainObject:
    object_id: int
    instances: tuple[VectorInstance, ...]

    @property
    def mass(self) -> float:
        return math.fsum(inst.probability for inst in self.instances)


@dataclass(frozen=True)
class UncertainDatabase:
    dimensionality: int
    objects: tuple[UncertainObject, ...]

    @property
    def total_instance_count(self) -> int:
        return sum(len(o.instances) for o in self.objects)

    def __len__(self) -> int:
        return len(self.objects)

    def object_by_id(self, object_id: int) -> UncertainObject:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flatten to (object_ids, instance_ids, probabilities, positions) arrays."""
        n = self.total_instance_count
        oids = np.empty(n, dtype=np.int64)
        iids = np.empty(n, dtype=np.int64)
        probs = np.empty(n, dtype=np.float64)
        pos = np.empty((n, self.dimensionality), dtype=np.float64)
        r = 0
        for o in self.objects:
            for inst in o.instances:
                oids[r] = o.object_id
                iids[r] = inst.instance_id
                probs[r] = inst.probability
                pos[r] = inst.position
                r += 1
        return oids, iids, probs, pos

    @classmethod
    def from_arrays(
        cls,
        object_ids: Sequence[int],
        probabilities: Sequence[float],
        positions: np.ndarray,
    ) -> "UncertainDatabase":
        """Group flat rows by object id; instance ids follow row order within an object."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.ndim != 2:
            raise DatasetFormatError("positions must be a 2-D array")
        grouped: dict[int, list[VectorInstance]] = {}
        for oid, p, x in zip(object_ids, probabilities, positions):
            lst = grouped.setdefault(int(oid), [])
            lst.append(VectorInstance(len(lst), tuple(float(c) for c in x), float(p)))
        objects = tuple(UncertainObject(oid, tuple(insts)) for oid, insts in grouped.items())
        return cls(positions.shape[1], objects)


@dataclass(frozen=True)
class QueryPoint:
    position: tuple[float, ...]

    @classmethod
    def parse(cls, text: str) -> "QueryPoint":
        """Parse a comma separated vector such as ``"1.5,0,2"``."""
        try:
            return cls(tuple(float(c) for c in text.split(",")))
        except ValueError as exc:
            raise ValueError(f"cannot parse query vector {text!r}") from exc

    def __len__(self) -> int:
        return len(self.position)


@dataclass
class Violation:
    rule: str
    object_id: int | None = None
    instance_id: int | None = None

    def __str__(self) -> str:
        where = []
        if self.object_id is not None:
            where.append(f"object {self.object_id}")
        if self.instance_id is not None:
            where.append(f"instance {self.instance_id}")
        return f"{self.rule} ({', '.join(where)})" if where else self.rule


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(v) for v in self.violations)


def validate_database(db: UncertainDatabase) -> ValidationReport:
    """Check the data model rules; violations are returned, never raised."""
    report = ValidationReport()
    add = report.violations.append
    if db.dimensionality < 1:
        add(Violation("dimensionality < 1"))
    seen_ids: set[int] = set()
    for o in db.objects:
        if o.object_id in seen_ids:
            add(Violation("duplicate object id", o.object_id))
        seen_ids.add(o.object_id)
        if not o.instances:
            add(Violation("object without instances", o.object_id))
        inst_ids: set[int] = set()
        for inst in o.instances:
            if inst.instance_id in inst_ids:
                add(Violation("duplicate instance id", o.object_id, inst.instance_id))
            inst_ids.add(inst.instance_id)
            p = inst.probability
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                add(Violation("instance probability outside (0, 1]", o.object_id, inst.instance_id))
            elif p == 0.0:
                add(Violation("zero-mass instance", o.object_id, inst.instance_id))
            if len(inst.position) != db.dimensionality:
                add(Violation("position length != dimensionality", o.object_id, inst.instance_id))
            elif not all(math.isfinite(c) for c in inst.position):
                add(Violation("non-finite coordinate", o.object_id, inst.instance_id))
        if o.instances and o.mass > 1.0 + MASS_SLACK:
            add(Violation("object mass > 1", o.object_id))
    return report


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two equal-length vectors."""
    if len(a) != len(b):
        raise DimensionMismatch(f"dimension mismatch: {len(a)} vs {len(b)}")
    return math.dist(a, b)


def distances_to(positions: np.ndarray, q: Sequence[float]) -> np.ndarray:
    """Vectorised Euclidean distances from each row of ``positions`` to ``q``."""
    q = np.asarray(q, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != q.shape[0]:
        raise DimensionMismatch(
            f"dimension mismatch: data has {positions.shape[-1]} dims, query has {q.shape[0]}"
        )
    return np.sqrt(((positions - q) ** 2).sum(axis=1))


# ---------------------------------------------------------------------------
# file formats


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(db: UncertainDatabase, path: str | Path) -> None:
    d = db.dimensionality
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["object_id", "probability"] + [f"c{j + 1}" for j in range(d)])
        for o in db.objects:
            for inst in o.instances:
                w.writerow([o.object_id, _fmt(inst.probability)] + [_fmt(c) for c in inst.position])


def read_csv(path: str | Path) -> UncertainDatabase:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["object_id", "probability"] or len(header) < 3:
        raise DatasetFormatError(f"{path}: header must be object_id,probability,c1,...,cd")
    d = len(header) - 2
    oids, probs, pos = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise DatasetFormatError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
        try:
            oids.append(int(row[0]))
            probs.append(float(row[1]))
            pos.append([float(c) for c in row[2:]])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    if not oids:
        return UncertainDatabase(d, ())
    return UncertainDatabase.from_arrays(oids, probs, np.array(pos, dtype=np.float64))


def write_json(db: UncertainDatabase, path: str | Path) -> None:
    doc = {
        "dims": db.dimensionality,
        "objects": [
            {
                "id": o.object_id,
                "instances": [{"p": i.probability, "pos": list(i.position)} for i in o.instances],
            }
            for o in db.objects
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def read_json(path: str | Path) -> UncertainDatabase:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        d = int(doc["dims"])
        objects = []
        for o in doc["objects"]:
            insts = tuple(
                VectorInstance(j, tuple(float(c) for c in inst["pos"]), float(inst["p"]))
                for j, inst in enumerate(o["instances"])
            )
            objects.append(UncertainObject(int(o["id"]), insts))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: malformed JSON dataset ({exc})") from exc
    return UncertainDatabase(d, tuple(objects))


def load(path: str | Path) -> UncertainDatabase:
    """Load a dataset, choosing the format from the file extension."""
    if str(path).lower().endswith(".json"):
        return read_json(path)
    return read_csv(path)


def make_database(objects: Iterable[tuple[int, Sequence[tuple[Sequence[float], float]]]]) -> UncertainDatabase:
    """Small-literal helper: ``[(oid, [(pos, p), ...]), ...]`` to a database."""
    objs = []
    dims = None
    for oid, insts in objects:
        built = []
        for j, (pos, p) in enumerate(insts):
            pos = tuple(float(c) for c in (pos if isinstance(pos, (list, tuple)) else [pos]))
            dims = len(pos) if dims is None else dims
            built.append(VectorInstance(j, pos, float(p)))
        objs.append(UncertainObject(int(oid), tuple(built)))
    return UncertainDatabase(dims or 1, tuple(objs))
