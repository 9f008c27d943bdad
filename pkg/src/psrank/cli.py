"""``psrank`` command line: gen, rank, verify, semantics, bench.

Every subcommand first prints its effective configuration (all flags plus
SHA-256 of input files) as one JSON line on stderr.

Exit codes: 0 success, 1 usage, 2 data or validation error,
3 verification failure, 4 resource guard.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _backend, bench, datagen, dataset, semantics
from .baselines import EnumerationLimitExceeded, max_abs_diff, possible_worlds_rank, ylks_rank
from .dataset import DatasetFormatError, DimensionMismatch, QueryPoint
from .engine import psr_rank

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY, EXIT_GUARD = 0, 1, 2, 3, 4
VERIFY_TOL = {"worlds": 1e-9, "ylks": 1e-6}


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _print_config(args: argparse.Namespace, **extra) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    for key in ("data", "grid", "table"):
        path = cfg.get(key)
        if path and Path(path).is_file():
            cfg[f"{key}_sha256"] = _sha256(path)
    cfg["backend_in_use"] = _backend.NAME
    cfg.update(extra)
    print("config " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _load(path: str) -> dataset.UncertainDatabase:
    try:
        db = dataset.load(path)
    except (OSError, DatasetFormatError, json.JSONDecodeError) as exc:
        raise DataError(str(exc)) from exc
    report = dataset.validate_database(db)
    if not report.ok:
        raise DataError(f"invalid dataset {path}:\n{report}")
    return db


def _query(text: str, db: dataset.UncertainDatabase) -> QueryPoint:
    try:
        q = QueryPoint.parse(text)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if len(q) != db.dimensionality:
        raise DataError(f"dimension mismatch: query has {len(q)} coordinates, data has {db.dimensionality}")
    return q


def cmd_gen(args) -> int:
    params = datagen.GenParams(args.objects, args.instances, args.dims, args.ud,
                               args.space, args.seed, args.existential)
    _print_config(args)
    try:
        db = datagen.generate(params)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if args.out.lower().endswith(".json"):
        dataset.write_json(db, args.out)
    else:
        dataset.write_csv(db, args.out)
    print(f"wrote {db.total_instance_count} instances of {len(db)} objects to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_rank(args) -> int:
    _print_config(args)
    db = _load(args.data)
    q = _query(args.query, db)
    engine = psr_rank if args.engine == "psr" else ylks_rank
    res = engine(db, q, args.k, early_stop=not args.no_early_stop)
    st = res.instances.stats
    out = args.out or sys.stdout
    if args.level == "object":
        res.objects.to_csv(out)
    else:
        res.instances.to_csv(out)
    stop = st.rows if st.early_stopped else None
    print(f"n={st.total_instances} rows={st.rows} early_stop_row={stop} unreached={st.unreached} "
          f"wall_time_ms={1e3 * st.seconds:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    _print_config(args, tolerance=VERIFY_TOL[args.reference])
    db = _load(args.data)
    q = _query(args.query, db)
    k = args.k or len(db)
    psr = psr_rank(db, q, k)
    if args.reference == "worlds":
        try:
            ref = possible_worlds_rank(db, q, k, limit=args.world_limit)
        except EnumerationLimitExceeded as exc:
            print(f"resource guard: {exc}", file=sys.stderr)
            return EXIT_GUARD
    else:
        ref = ylks_rank(db, q, k)
    diff = max_abs_diff(psr.instances, ref.instances)
    obj_diff = float(np.max(np.abs(psr.objects.p_rank - ref.objects.p_rank), initial=0.0))
    tol = VERIFY_TOL[args.reference]
    ok = diff <= tol
    print(f"max_abs_diff={diff:.3e} object_max_abs_diff={obj_diff:.3e} "
          f"tolerance={tol:g} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_semantics(args) -> int:
    if args.method == "ptk" and args.threshold is None:
        raise _UsageError("--method ptk requires --threshold")
    if args.table:
        _print_config(args)
        try:
            table = semantics.RankTable.read_csv(args.table)
        except (OSError, ValueError) as exc:
            raise DataError(str(exc)) from exc
        if table.level != args.level:
            raise DataError(f"{args.table} is an {table.level}-level table, --level is {args.level}")
        k = args.k or table.k
    else:
        if not (args.data and args.query):
            raise _UsageError("give --table, or both --data and --query")
        db = _load(args.data)
        q = _query(args.query, db)
        # expected rank needs the untruncated distribution
        depth = len(db) if args.method == "expectedrank" else (args.k or len(db))
        _print_config(args, ranking_depth=depth)
        res = psr_rank(db, q, depth)
        table = (semantics.RankTable.from_objects(res.objects) if args.level == "object"
                 else semantics.RankTable.from_instances(res.instances, db))
        k = args.k or depth
    try:
        result = semantics.apply(args.method, table, min(k, table.k), args.threshold)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(result.to_json())
    return EXIT_OK


def cmd_bench(args) -> int:
    _print_config(args)
    try:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        bench.expand_grid(grid)
    except (OSError, ValueError) as exc:
        raise DataError(f"bad grid {args.grid}: {exc}") from exc
    records = bench.run_suite(grid, args.repeats, args.engines,
                              ylks_max_objects=args.ylks_max_objects,
                              early_stop=args.early_stop, backend=args.backend)
    summary = bench.summarize(records)
    if args.out:
        out = Path(args.out)
        bench.write_jsonl(records, out)
        stem = out.with_suffix("")
        Path(f"{stem}.summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
        bench.write_csv(records, f"{stem}.csv")
        print(f"wrote {len(records)} records to {out}", file=sys.stderr)
    else:
        for r in records:
            print(json.dumps(r.to_dict()))
        print("summary " + json.dumps(summary), file=sys.stderr)
    return EXIT_VERIFY if summary["gate_failures"] else EXIT_OK


class _UsageError(Exception):
    pass


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="psrank", description="Rank probabilities for uncertain vector objects.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--objects", type=_positive, required=True)
    g.add_argument("--instances", type=_positive, required=True)
    g.add_argument("--dims", type=_positive, default=3)
    g.add_argument("--ud", type=float, default=2.0, help="side of each object's instance box")
    g.add_argument("--space", type=float, default=10.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--existential", type=float, default=0.0, help="missing mass per object")
    g.add_argument("--out", required=True, help="CSV, or JSON if the name ends in .json")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("rank", help="rank probabilities for one query")
    r.add_argument("--data", required=True)
    r.add_argument("--query", required=True, help='comma separated, e.g. "1,2.5,0"')
    r.add_argument("--k", type=_positive, required=True)
    r.add_argument("--engine", choices=("psr", "ylks"), default="psr")
    r.add_argument("--level", choices=("instance", "object"), default="instance")
    r.add_argument("--out", help="result CSV (default stdout)")
    r.add_argument("--no-early-stop", action="store_true")
    r.set_defaults(func=cmd_rank)

    v = sub.add_parser("verify", help="compare psr against a reference engine")
    v.add_argument("--data", required=True)
    v.add_argument("--query", required=True)
    v.add_argument("--k", type=_positive, help="default: number of objects")
    v.add_argument("--reference", choices=("worlds", "ylks"), default="worlds")
    v.add_argument("--world-limit", type=_positive, default=10**7)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("semantics", help="deterministic ranking from rank probabilities")
    s.add_argument("--data")
    s.add_argument("--query")
    s.add_argument("--table", help="rank CSV from `psrank rank` instead of --data/--query")
    s.add_argument("--k", type=_positive)
    s.add_argument("--method", choices=semantics.METHODS, required=True)
    s.add_argument("--threshold", type=float, help="PT-k probability threshold")
    s.add_argument("--level", choices=("instance", "object"), default="object")
    s.set_defaults(func=cmd_semantics)

    b = sub.add_parser("bench", help="time psr and ylks over a parameter grid")
    b.add_argument("--grid", required=True, help="JSON grid file")
    b.add_argument("--repeats", type=_positive, default=3)
    b.add_argument("--out", help="JSON lines file; summary and CSV are written next to it")
    b.add_argument("--engines", nargs="+", choices=bench.ENGINES, default=list(bench.ENGINES))
    b.add_argument("--ylks-max-objects", type=int, default=bench.YLKS_MAX_OBJECTS)
    b.add_argument("--early-stop", action="store_true", help="stop passes at an all-zero vector")
    b.add_argument("--backend", choices=("compiled", "python"))
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"psrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionMismatch) as exc:
        print(f"psrank: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
