"""Time the compiled kernels against the NumPy fallback on the same streams.

Both backends run the identical pass (early stop off, rows kept only for
the agreement check); the median of ``--repeats`` timed passes is reported
together with the largest difference between their rank vectors.

    python3 benchmarks/compare_backends.py --objects 200 400 800 --k 50
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys

import numpy as np

from psrank import _backend
from psrank.browsing import build_browsing
from psrank.datagen import GenParams, generate
from psrank.dataset import QueryPoint
from psrank.engine import PreparedStream, run_pass


def time_pass(prepared: PreparedStream, k: int, engine: str, backend: str, repeats: int) -> float:
    times = [run_pass(prepared, k, engine, early_stop=False, backend=backend,
                      keep_rows=False).instances.stats.seconds for _ in range(repeats)]
    return 1e3 * statistics.median(times)


def compare(objects: int, instances: int, k: int, ud: float, seed: int, engine: str, repeats: int) -> dict:
    db = generate(GenParams(objects, instances, 3, ud, seed=seed))
    prepared = PreparedStream.from_stream(build_browsing(db, QueryPoint((5.0, 5.0, 5.0))))
    a = run_pass(prepared, k, engine, early_stop=False, backend="compiled")
    b = run_pass(prepared, k, engine, early_stop=False, backend="python")
    compiled_ms = time_pass(prepared, k, engine, "compiled", repeats)
    python_ms = time_pass(prepared, k, engine, "python", repeats)
    return {
        "engine": engine, "objects": objects, "instances": instances, "k": k, "ud": ud,
        "compiled_ms": round(compiled_ms, 3), "python_ms": round(python_ms, 3),
        "ratio": round(python_ms / compiled_ms, 2),
        "max_diff": float(np.abs(a.instances.p_rank - b.instances.p_rank).max()),
    }


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--objects", type=int, nargs="+", default=[250, 500, 1000])
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--k", type=int, nargs="+", default=[50])
    p.add_argument("--ud", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engines", nargs="+", choices=("psr", "ylks"), default=["psr"])
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)
    if _backend.compiled is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 2
    print(f"{'engine':6} {'N':>6} {'k':>5} {'compiled ms':>12} {'python ms':>10} {'ratio':>6} {'max diff':>9}")
    for engine in args.engines:
        for n in args.objects:
            for k in args.k:
                r = compare(n, args.instances, k, args.ud, args.seed, engine, args.repeats)
                print(f"{engine:6} {n:6d} {k:5d} {r['compiled_ms']:12.1f} {r['python_ms']:10.1f} "
                      f"{r['ratio']:6.1f} {r['max_diff']:9.1e}")
                print(json.dumps(r), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
