"""Benchmark harness: PSR vs YLKS over a parameter grid, with scaling fits.

Per grid point the data is generated once (untimed) and the browsing
stream is built once per repeat, timed separately as ``sort_time_ms``.
Each engine is timed over the ranking pass only and the median of the
repeats is reported. Before timings of a point are accepted the two
engines' results are compared (the correctness gate).
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from .browsing import build_browsing
from .datagen import GenParams, generate
from .dataset import QueryPoint
from .engine import PreparedStream, RankResult, run_pass

log = logging.getLogger(__name__)

ENGINES = ("psr", "ylks")
YLKS_MAX_OBJECTS = 4000
GATE_TOL = 1e-6
# instance rows are compared when n * k stays below this; object distributions otherwise
GATE_ROW_BUDGET = 20_000_000

POINT_DEFAULTS = {"instances": 20, "dims": 3, "ud": 2.0, "space": 10.0,
                  "existential": 0.0, "seed": 0, "k": 100, "query": None}
POINT_KEYS = ("objects",) + tuple(POINT_DEFAULTS)


@dataclass
class BenchRecord:
    engine: str
    objects: int
    instances: int
    dims: int
    k: int
    ud: float
    seed: int
    wall_time_ms: float | None = None
    sort_time_ms: float | None = None
    avg_aol_size: float | None = None
    peak_result_rows: int | None = None
    repeats: int = 0
    backend: str = ""
    early_stop: bool = False
    gate: str = "n/a"
    max_diff: float | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @property
    def accepted(self) -> bool:
        return self.error is None and self.gate != "fail" and self.wall_time_ms is not None


def _axis(key: str, value) -> list:
    # a query is itself a list, so only a list of lists is an axis of queries
    if key == "query":
        return value if isinstance(value, list) and value and isinstance(value[0], list) else [value]
    return value if isinstance(value, list) else [value]


def expand_grid(grid: dict | list) -> list[dict]:
    """Grid points from a JSON-like description.

    Either a list of point dicts, ``{"points": [...]}``, or a dict of axes
    whose list values are crossed (scalars are held fixed). Every point
    needs ``objects``; other keys default as in :data:`POINT_DEFAULTS`.
    """
    if isinstance(grid, dict) and "points" in grid:
        grid = grid["points"]
    if isinstance(grid, dict):
        if not grid:
            return []
        keys = list(grid)
        axes = [_axis(k, v) for k, v in grid.items()]
        raw = [dict(zip(keys, combo)) for combo in itertools.product(*axes)]
    else:
        raw = list(grid)
    points = []
    for p in raw:
        unknown = set(p) - set(POINT_KEYS)
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        if "objects" not in p:
            raise ValueError("every grid point needs 'objects'")
        points.append({**POINT_DEFAULTS, **p})
    return points


def _gate(results: dict[str, RankResult]) -> float:
    a, b = results["psr"], results["ylks"]
    ra, rb = a.instances.p_rank, b.instances.p_rank
    if ra is not None and rb is not None:
        n = max(len(ra), len(rb))
        pa = np.zeros((n, ra.shape[1]))
        pb = np.zeros((n, rb.shape[1]))
        pa[: len(ra)] = ra
        pb[: len(rb)] = rb
        return float(np.max(np.abs(pa - pb), initial=0.0))
    return float(np.max(np.abs(a.objects.p_rank - b.objects.p_rank), initial=0.0))


def run_point(
    point: dict,
    repeats: int = 3,
    engines: Sequence[str] = ENGINES,
    *,
    ylks_max_objects: int = YLKS_MAX_OBJECTS,
    early_stop: bool = False,
    backend: str | None = None,
    gate_tol: float = GATE_TOL,
) -> list[BenchRecord]:
    params = GenParams(point["objects"], point["instances"], point["dims"], point["ud"],
                       point["space"], point["seed"], point["existential"])
    base = dict(objects=params.objects, instances=params.instances, dims=params.dims,
                k=int(point["k"]), ud=params.ud, seed=params.seed)
    run_engines = [e for e in engines if not (e == "ylks" and params.objects > ylks_max_objects)]
    for e in set(engines) - set(run_engines):
        log.info("skipping %s at N=%d (cap %d)", e, params.objects, ylks_max_objects)
    try:
        db = generate(params)
        q = QueryPoint(tuple(point["query"]) if point["query"] is not None
                       else (params.space / 2.0,) * params.dims)
        sort_times = []
        for _ in range(max(repeats, 1)):
            t0 = time.perf_counter()
            stream = build_browsing(db, q)
            sort_times.append(time.perf_counter() - t0)
        prepared = PreparedStream.from_stream(stream)
    except Exception as exc:  # noqa: BLE001 - recorded, suite continues
        return [BenchRecord(engine=e, **base, error=f"{type(exc).__name__}: {exc}") for e in run_engines]

    k = base["k"]
    keep_first = len(prepared) * k <= GATE_ROW_BUDGET
    records, firsts = [], {}
    for e in run_engines:
        rec = BenchRecord(engine=e, **base, repeats=repeats, early_stop=early_stop,
                          sort_time_ms=1e3 * statistics.median(sort_times))
        try:
            times = []
            for r in range(repeats):
                res = run_pass(prepared, k, e, early_stop=early_stop, backend=backend,
                               keep_rows=keep_first and r == 0)
                if r == 0:
                    firsts[e] = res
                times.append(res.instances.stats.seconds)
            st = firsts[e].instances.stats
            rec.wall_time_ms = 1e3 * statistics.median(times)
            rec.avg_aol_size = st.avg_aol_size
            rec.peak_result_rows = st.rows
            rec.backend = st.backend
        except Exception as exc:  # noqa: BLE001
            rec.error = f"{type(exc).__name__}: {exc}"
        records.append(rec)

    if "psr" in firsts and "ylks" in firsts:
        diff = _gate(firsts)
        verdict = "pass" if diff <= gate_tol else "fail"
        for rec in records:
            rec.gate, rec.max_diff = verdict, diff
        if verdict == "fail":
            log.warning("gate failed at %s: max diff %.3g", base, diff)
    return records


def run_suite(grid: dict | list, repeats: int = 3, engines: Sequence[str] = ENGINES, **kw) -> list[BenchRecord]:
    """Run every grid point serially; one record per (point, engine)."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    out: list[BenchRecord] = []
    for point in expand_grid(grid):
        recs = run_point(point, repeats, engines, **kw)
        for r in recs:
            log.info("%s N=%d k=%d UD=%g: %.1f ms (gate %s)", r.engine, r.objects, r.k, r.ud,
                     r.wall_time_ms or math.nan, r.gate)
        out.extend(recs)
    return out


@dataclass(frozen=True)
class ScalingFit:
    engine: str
    axis: str
    exponent: float
    intercept: float
    r2: float
    points: int


def fit_scaling(records: Iterable[BenchRecord], axis: str = "objects") -> ScalingFit:
    """Least-squares slope of log(time) against log(axis value).

    ``axis`` is ``"objects"`` (alias ``"N"``) or ``"k"``. Records must
    belong to one engine and should vary only along ``axis``.
    """
    axis = {"N": "objects", "n": "objects"}.get(axis, axis)
    if axis not in ("objects", "k"):
        raise ValueError(f"axis must be 'objects' or 'k', got {axis!r}")
    recs = [r for r in records if r.accepted]
    engines = {r.engine for r in recs}
    if len(engines) > 1:
        raise ValueError(f"records mix engines {sorted(engines)}")
    xs = [getattr(r, axis) for r in recs]
    if len(set(xs)) < 3:
        raise ValueError(f"need at least 3 distinct {axis} values, got {len(set(xs))}")
    fit = stats.linregress(np.log(xs), np.log([r.wall_time_ms for r in recs]))
    return ScalingFit(engines.pop(), axis, float(fit.slope), float(fit.intercept),
                      float(fit.rvalue ** 2), len(recs))


def speedups(records: Iterable[BenchRecord]) -> list[dict]:
    """time_ylks / time_psr for every point where both engines were accepted."""
    by_point: dict[tuple, dict[str, BenchRecord]] = {}
    for r in records:
        if r.accepted:
            key = (r.objects, r.instances, r.dims, r.k, r.ud, r.seed)
            by_point.setdefault(key, {})[r.engine] = r
    out = []
    for key, d in by_point.items():
        if "psr" in d and "ylks" in d:
            out.append(dict(zip(("objects", "instances", "dims", "k", "ud", "seed"), key),
                            speedup=d["ylks"].wall_time_ms / d["psr"].wall_time_ms))
    return out


def summarize(records: Sequence[BenchRecord]) -> dict:
    """Scaling fits for every group of records that varies along one axis."""
    fits = []
    for axis in ("objects", "k"):
        others = [f.name for f in fields(BenchRecord)
                  if f.name in ("engine", "objects", "instances", "dims", "k", "ud", "seed")
                  and f.name != axis]
        groups: dict[tuple, list[BenchRecord]] = {}
        for r in records:
            if r.accepted:
                groups.setdefault(tuple(getattr(r, o) for o in others), []).append(r)
        for key, group in groups.items():
            if len({getattr(r, axis) for r in group}) >= 3:
                f = fit_scaling(group, axis)
                fits.append({**dict(zip(others, key)), **asdict(f)})
    return {
        "records": len(records),
        "accepted": sum(r.accepted for r in records),
        "gate_failures": sum(r.gate == "fail" for r in records),
        "errors": sum(r.error is not None for r in records),
        "fits": fits,
        "speedups": speedups(records),
    }


def write_jsonl(records: Iterable[BenchRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_jsonl(path: str | Path) -> list[BenchRecord]:
    with open(path, encoding="utf-8") as fh:
        return [BenchRecord(**json.loads(line)) for line in fh if line.strip()]


def write_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    names = [f.name for f in fields(BenchRecord)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.to_dict())
