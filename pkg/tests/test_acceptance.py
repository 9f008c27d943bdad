"""Acceptance criteria 1-11, one test each.

Every test appends a ``criterion N: PASS|FAIL ...`` line to :data:`REPORT`;
the conftest prints those lines after the run. Timing criteria are marked
``slow`` and take a few minutes in total. Run directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from psrank import semantics
from psrank.baselines import max_abs_diff, possible_worlds_rank, ylks_rank
from psrank.bench import fit_scaling, run_suite, speedups
from psrank.datagen import GenParams, generate
from psrank.dataset import QueryPoint
from psrank.dp import adjust_probs, dynamic_round, poisson_binomial
from psrank.engine import psr_rank
from factories import E1, random_query, random_small_db

REPORT: list[str] = []

ORACLE_DBS = 200
SEMANTICS_DBS = 50
TIMING_REPEATS = 5
# relative run-to-run timing noise tolerated when checking monotone runtimes
TIMING_NOISE = 0.10


def _record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    REPORT[:] = [r for r in REPORT if not r.startswith(f"criterion {n}:")] + [line]
    REPORT.sort(key=lambda r: int(r.split()[1].rstrip(":")))
    assert ok, line


def _seen_counts(objects: np.ndarray) -> np.ndarray:
    """Distinct objects seen up to and including each row."""
    seen: set = set()
    out = np.empty(len(objects), dtype=np.int64)
    for t, o in enumerate(objects):
        seen.add(int(o))
        out[t] = len(seen)
    return out


def _full_rows(matrix) -> np.ndarray:
    """Rows whose whole rank support fits in k."""
    mask = matrix.k > _seen_counts(matrix.object_ids)
    return matrix.p_rank[mask]


@pytest.fixture(scope="module")
def oracle_cases():
    out = []
    for seed in range(ORACLE_DBS):
        rng = np.random.default_rng(seed)
        db = random_small_db(rng)
        q = random_query(rng, db)
        k = len(db)
        out.append((db, q, psr_rank(db, q, k), possible_worlds_rank(db, q, k)))
    return out


@pytest.fixture(scope="module")
def art_2000():
    db = generate(GenParams(2000, 20, 3, ud=2.0, seed=0))
    q = QueryPoint((5.0, 5.0, 5.0))
    return psr_rank(db, q, 50), ylks_rank(db, q, 50)


def test_criterion_1_oracle_equivalence(oracle_cases):
    inst = max(max_abs_diff(p.instances, w.instances) for _, _, p, w in oracle_cases)
    obj = max(float(np.abs(p.objects.p_rank - w.objects.p_rank).max()) for _, _, p, w in oracle_cases)
    existential = sum(any(o.mass < 1.0 for o in db.objects) for db, *_ in oracle_cases)
    ok = max(inst, obj) <= 1e-9
    _record(1, ok, f"{len(oracle_cases)} dbs ({existential} with existential mass): "
                   f"instance diff {inst:.2e}, object diff {obj:.2e} (tol 1e-9)")


def test_criterion_2_engine_equivalence(art_2000):
    psr, ylks = art_2000
    d = max_abs_diff(psr.instances, ylks.instances)
    d_obj = float(np.abs(psr.objects.p_rank - ylks.objects.p_rank).max())
    _record(2, max(d, d_obj) <= 1e-6, f"N=2000 m=20 k=50: instance diff {d:.2e}, object diff {d_obj:.2e} (tol 1e-6)")


def test_criterion_3_worked_example():
    res = psr_rank(E1, QueryPoint((0.0,)), 2)
    got = {o: res.objects[o] for o in (0, 1)}
    d = max(float(np.abs(got[0] - [0.6, 0.4]).max()), float(np.abs(got[1] - [0.4, 0.6]).max()))
    _record(3, d <= 1e-12, f"A={got[0].tolist()} B={got[1].tolist()} diff {d:.1e}")


def _exponent_check(n: int, records, axis: str, lo: float, hi: float, r2_min: float | None):
    fit = fit_scaling(records, axis)
    ok = lo <= fit.exponent <= hi and (r2_min is None or fit.r2 >= r2_min)
    times = ", ".join(f"{getattr(r, 'objects' if axis == 'objects' else 'k')}:{r.wall_time_ms:.0f}ms"
                      for r in records)
    bound = f"[{lo}, {hi}]" + (f", R2>={r2_min}" if r2_min else "")
    _record(n, ok, f"{fit.engine} exponent {fit.exponent:.3f} R2 {fit.r2:.3f} (need {bound}); {times}")


@pytest.mark.slow
def test_criterion_4_psr_linear_in_n():
    recs = run_suite({"objects": [1000, 2000, 4000, 8000], "instances": 20, "k": 100, "ud": 2.0},
                     TIMING_REPEATS, ["psr"])
    _exponent_check(4, recs, "objects", 0.8, 1.3, 0.95)


@pytest.mark.slow
def test_criterion_5_ylks_quadratic_in_n():
    recs = run_suite({"objects": [250, 500, 1000, 2000], "instances": 20, "k": 100, "ud": 2.0},
                     TIMING_REPEATS, ["ylks"])
    _exponent_check(5, recs, "objects", 1.7, 2.3, 0.95)


@pytest.mark.slow
def test_criterion_6_psr_linear_in_k():
    recs = run_suite({"objects": 4000, "instances": 20, "k": [100, 200, 400, 800], "ud": 2.0},
                     TIMING_REPEATS, ["psr"])
    _exponent_check(6, recs, "k", 0.7, 1.3, None)


@pytest.mark.slow
def test_criterion_7_speedup_flat_in_k():
    recs = run_suite({"objects": 1600, "instances": 20, "k": [100, 400, 800], "ud": 2.0}, TIMING_REPEATS)
    gates = {r.gate for r in recs}
    sp = {d["k"]: d["speedup"] for d in speedups(recs)}
    mean = float(np.mean(list(sp.values()))) if sp else float("nan")
    dev = max(abs(s / mean - 1.0) for s in sp.values()) if sp else float("inf")
    ok = len(sp) == 3 and gates == {"pass"} and dev <= 0.30
    detail = ", ".join(f"k={k}: {s:.1f}x" for k, s in sorted(sp.items()))
    _record(7, ok, f"{detail}; max deviation from mean {100 * dev:.1f}% (tol 30%), gate {sorted(gates)}")


@pytest.mark.slow
def test_criterion_8_ud_and_aol():
    uds = [0.5, 1.0, 2.0, 5.0, 10.0]
    recs = run_suite({"objects": 5000, "instances": 20, "k": 100, "ud": uds}, TIMING_REPEATS, ["psr"])
    recs.sort(key=lambda r: r.ud)
    aol = [r.avg_aol_size for r in recs]
    t = [r.wall_time_ms for r in recs]
    aol_ok = all(b >= a for a, b in zip(aol, aol[1:]))
    # up to saturation the runtime must not drop beyond timing noise; the last
    # two UD values may plateau, i.e. stay within that noise of each other
    time_ok = all(b >= (1.0 - TIMING_NOISE) * a for a, b in zip(t, t[1:]))
    detail = "; ".join(f"UD={u:g}: AOL {a:.0f}, {x:.0f}ms" for u, a, x in zip(uds, aol, t))
    _record(8, aol_ok and time_ok and len(recs) == 5,
            f"AOL non-decreasing {aol_ok}, runtime non-decreasing within {TIMING_NOISE:.0%} {time_ok}; {detail}")


def test_criterion_9_inverse_round():
    rng = np.random.default_rng(9)
    worst = 0.0
    for j in range(1000):
        n = int(rng.integers(2, 120))
        if j % 2:
            v = np.append(rng.random(n - 1), 0.0)
        else:
            v = np.append(poisson_binomial(rng.random(n - 1), n - 1), 0.0)
        p = float(rng.uniform(0.0, 0.999))
        back = adjust_probs(dynamic_round(v, p), p)
        worst = max(worst, float(np.abs(back - v).max()))
    _record(9, worst <= 1e-9, f"1000 pairs, p in [0, 0.999]: max error {worst:.2e} (tol 1e-9)")


def test_criterion_10_row_normalization(oracle_cases, art_2000):
    rows = [_full_rows(p.instances) for _, _, p, _ in oracle_cases]
    rows.append(_full_rows(art_2000[0].instances))
    rows.append(_full_rows(art_2000[1].instances))
    sums = np.concatenate([r.sum(axis=1) for r in rows])
    dev = float(np.abs(sums - 1.0).max())
    _record(10, dev <= 1e-9 and len(sums) > 0, f"{len(sums)} rows with k > seen objects: max |sum - 1| {dev:.2e}")


def _semantic_outputs(table: semantics.RankTable) -> list:
    k = table.k
    out = [semantics.u_k_ranks(table).ranking, semantics.expected_rank(table).ranking]
    for kk in sorted({1, max(1, k // 2), k}):
        out.append(semantics.global_top_k(table, kk).ranking)
        for thr in (0.0, 0.1, 0.25, 0.5, 0.75):
            out.append(semantics.pt_k(table, kk, thr).ranking)
    return out


def test_criterion_11_semantics(oracle_cases):
    q0 = QueryPoint((0.0,))
    cases = [(E1, q0, psr_rank(E1, q0, 2), possible_worlds_rank(E1, q0, 2))]
    cases += oracle_cases[:SEMANTICS_DBS]
    mismatches, checks = [], 0
    for n, (db, _, psr, ref) in enumerate(cases):
        tables = [
            (semantics.RankTable.from_objects(psr.objects), semantics.RankTable.from_objects(ref.objects)),
            (semantics.RankTable.from_instances(psr.instances, db),
             semantics.RankTable.from_instances(ref.instances, db)),
        ]
        for a, b in tables:
            for x, y in zip(_semantic_outputs(a), _semantic_outputs(b)):
                checks += 1
                if x != y:
                    mismatches.append((n, a.level, x, y))
    _record(11, not mismatches and checks > 0,
            f"E1 + {SEMANTICS_DBS} dbs, both levels: {checks} selections compared, {len(mismatches)} mismatches"
            + (f"; first {mismatches[0]}" if mismatches else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v", "-p", "no:cacheprovider"]))
