"""``divann`` command line: datasets, indexes, ground truth, queries, sweeps, reports.

Exit status is 0 on success and the error category's code otherwise
(2 input, 3 format, 4 resource budget, 5 missing ground truth).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import bench, dataio
from .errors import DivannError, InputError
from .hnsw import build_index, save_index
from .search import AlgoConfig, run_query
from .vectors import Query, check_result


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "config" in names:
        p.add_argument("--config", help="TOML key/value file; flags override it")
    if "dataset" in names:
        p.add_argument("--dataset", help="fvecs file (default: synthetic data from the config)")
    if "queries" in names:
        p.add_argument("--queries", help="fvecs file of queries")
    if "index" in names:
        p.add_argument("--index", help="index file")
    if "metric" in names:
        p.add_argument("--metric", choices=["L2SIM", "INNER_PRODUCT", "COSINE"], type=str.upper)
    if "k" in names:
        p.add_argument("--k", help="result size, or a comma separated list")
    if "eps" in names:
        eps = p.add_mutually_exclusive_group()
        eps.add_argument("--epsilon", help="similarity threshold(s), comma separated")
        eps.add_argument("--phi", help="target mean conflict degree(s); epsilon is calibrated")
    if "ef" in names:
        p.add_argument("--ef", help="efficiency level(s), comma separated")
    if "algo" in names:
        p.add_argument("--algo", help="GREEDY, PGS, PDS or PSS (comma separated for sweeps)")
    if "seed" in names:
        p.add_argument("--seed", type=int)
    if "threads" in names:
        p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divann", description="Approximate diverse k-NN search benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as fvecs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--distribution", default="gaussian", choices=["uniform-cube", "gaussian", "clustered"])
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-index", help="build and save the proximity graph")
    _add_common(p, "config", "dataset", "metric", "seed")
    p.add_argument("--M", type=int)
    p.add_argument("--ef-construction", type=int)

    p = sub.add_parser("ground-truth", help="exact optimal diverse sets for every query")
    _add_common(p, "config", "dataset", "queries", "metric", "k", "eps", "seed")

    p = sub.add_parser("query", help="run one algorithm over the query set")
    _add_common(p, "config", "dataset", "queries", "index", "metric", "k", "eps", "ef", "algo", "seed")
    p.add_argument("--L", type=int, help="beam width of the greedy baseline")

    p = sub.add_parser("sweep", help="algorithms x k x epsilon x ef sweep with a report")
    _add_common(p, "config", "dataset", "queries", "index", "metric", "k", "eps", "ef", "algo", "seed",
                "threads")
    p.add_argument("--ground-truth", help="JSON-lines ground truth from the ground-truth command")
    p.add_argument("--no-recall", action="store_true", help="skip recall (no ground truth needed)")

    p = sub.add_parser("report", help="recompute aggregates from a per-query records file")
    p.add_argument("records")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _overrides(args) -> dict:
    mapping = {
        "dataset": "dataset", "queries": "queries", "index": "index", "metric": "metric", "k": "k",
        "epsilon": "epsilon", "phi": "phi", "ef": "ef", "algo": "algorithms", "seed": "seed",
        "threads": "threads", "out": "out", "M": "M", "ef_construction": "ef_construction", "L": "L",
        "ground_truth": "ground_truth",
    }
    out = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    if getattr(args, "no_recall", False):
        out["recall"] = False
    return out


def _config(args) -> bench.SweepConfig:
    return bench.resolve_config(getattr(args, "config", None), _overrides(args))


def cmd_gen_data(args) -> int:
    spec = dataio.SyntheticSpec(args.n, args.d, args.distribution, args.seed, args.clusters, args.sigma)
    vectors = dataio.generate_vectors(spec)
    dataio.write_fvecs(args.out, vectors)
    print(json.dumps({"out": args.out, "n": args.n, "d": args.d, "checksum": dataio.checksum(vectors)}))
    return 0


def cmd_build_index(args) -> int:
    config = _config(args)
    if not args.out and not config.index:
        raise InputError("build-index needs --out (or index in the config)")
    out = args.out or config.index
    dataset = bench.load_dataset(config)
    t0 = time.perf_counter()
    index = build_index(dataset, M=config.M, ef_construction=config.ef_construction, seed=config.seed)
    seconds = time.perf_counter() - t0
    save_index(index, out)
    print(json.dumps({"out": out, "n": index.n, "top_level": index.top_level, "build_seconds": seconds}))
    return 0


def cmd_ground_truth(args) -> int:
    config = _config(args)
    out = args.out or config.ground_truth
    if not out:
        raise InputError("ground-truth needs --out (or ground_truth in the config)")
    truths = bench.compute_ground_truth(config)
    dataio.save_ground_truth(out, truths)
    print(json.dumps({"out": out, "records": len(truths)}))
    return 0


def cmd_query(args) -> int:
    config = _config(args)
    if len(config.algorithms) != 1:
        raise InputError("query runs exactly one algorithm; use sweep for several")
    dataset = bench.load_dataset(config)
    queries = bench.load_queries(config, dataset)
    index = bench.load_or_build_index(config, dataset)
    records = []
    for k in config.k:
        for eps, phi in bench.epsilon_levels(config, dataset):
            algo_config = AlgoConfig(config.algorithms[0], ef=config.ef[0], L=config.L,
                                     max_seconds=config.max_seconds)
            for qi in range(queries.shape[0]):
                result = run_query(algo_config.algorithm, index, dataset, Query(queries[qi], int(k), eps),
                                   algo_config)
                check_result(dataset, result)
                rec = result.to_record()
                rec.update(query_index=qi, phi=phi, ef=algo_config.ef)
                records.append(rec)
    if args.out:
        dataio.write_jsonl(args.out, records)
    else:
        for rec in records:
            print(json.dumps(rec, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    config = _config(args)
    report = bench.run_sweep(config)
    records_path, agg_path = bench.write_report(report, config.out)
    print(json.dumps({"records": str(records_path), "aggregate": str(agg_path),
                      "rows": len(report.aggregates)}))
    return 0


def cmd_report(args) -> int:
    config, records = bench.read_records(args.records)
    rows = bench.aggregate(records)
    if args.out:
        bench.write_aggregate_csv(args.out, rows, config)
    else:
        import csv

        writer = csv.DictWriter(sys.stdout, fieldnames=bench.AGGREGATE_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: bench._csv_value(row.get(key)) for key in bench.AGGREGATE_FIELDS})
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-index": cmd_build_index,
    "ground-truth": cmd_ground_truth,
    "query": cmd_query,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DivannError as exc:
        print(f"divann: {exc.category} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"divann: input error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
