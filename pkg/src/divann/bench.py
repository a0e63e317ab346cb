"""Benchmark sweeps: configuration, per-query records and aggregate reports.

Configuration is resolved in four layers, later ones winning: built-in
defaults, a TOML key/value file, ``DIVANN_<KEY>`` environment variables, and
explicit overrides (the CLI flags).  Every report embeds the resolved
configuration so a run can be replayed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, metrics
from .errors import InputError, MissingGroundTruthError, ResourceError
from .hnsw import ProximityIndex, build_index, load_index
from .search import AlgoConfig, Algorithm, run_query
from .vectors import Dataset, Metric, Query, check_result

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

RECORD_FIELDS = (
    "algorithm", "k", "epsilon", "phi", "ef", "L", "query_index", "latency_us", "total_score",
    "recall", "complete", "final_K", "iterations", "distance_evals",
)
AGGREGATE_FIELDS = (
    "algorithm", "k", "epsilon", "phi", "ef", "queries", "mean_latency_us", "median_latency_us",
    "p99_latency_us", "mean_score", "mean_recall", "stable_ef",
)
# the recall change below which a larger ef no longer counts as an improvement
STABLE_RECALL_DELTA = 0.01


@dataclass
class SweepConfig:
    dataset: str | None = None
    metric: str = "L2SIM"
    n: int = 2000
    d: int = 16
    distribution: str = "gaussian"
    clusters: int = 10
    sigma: float = 0.05
    queries: str | None = None
    num_queries: int = 100
    query_seed: int = 1
    index: str | None = None
    M: int = 16
    ef_construction: int = 200
    algorithms: list = field(default_factory=lambda: ["GREEDY", "PGS", "PDS", "PSS"])
    k: list = field(default_factory=lambda: [10])
    epsilon: list | None = None
    phi: list | None = None
    ef: list = field(default_factory=lambda: [40])
    L: int = 400
    ground_truth: str | None = None
    recall: bool = True
    threads: int = 1
    seed: int = 0
    max_seconds: float = 60.0
    out: str = "divann-report"

    def __post_init__(self):
        self.metric = Metric.parse(self.metric).name
        self.algorithms = [Algorithm.parse(a).value for a in self.algorithms]
        if self.epsilon is not None and self.phi is not None:
            raise InputError("give either epsilon or phi, not both")
        if self.epsilon is None and self.phi is None:
            self.phi = [100.0]
        if any(int(k) < 1 for k in self.k):
            raise InputError("every k must be >= 1")
        if any(int(e) < 1 for e in self.ef):
            raise InputError("every ef must be >= 1")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if self.num_queries < 0:
            raise InputError("num_queries must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_LIST_KEYS = {"algorithms": str, "k": int, "epsilon": float, "phi": float, "ef": int}


def _coerce(key: str, value, default):
    """Convert a raw file/env/flag value to the type of the config field."""
    if key in _LIST_KEYS:
        if value is None:
            return None
        if isinstance(value, str):
            value = [v for v in value.replace(" ", "").split(",") if v]
        elif not isinstance(value, (list, tuple)):
            value = [value]
        try:
            return [_LIST_KEYS[key](v) for v in value]
        except ValueError:
            raise InputError(f"bad value for {key}: {value!r}") from None
    if value is None:
        return None
    if isinstance(default, bool):
        if isinstance(value, str):
            low = value.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise InputError(f"bad boolean for {key}: {value!r}")
            return low in ("1", "true", "yes")
        return bool(value)
    try:
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise InputError(f"bad value for {key}: {value!r}") from None
    return str(value)


def load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config file {path}: {exc}") from None
    # section headers are allowed for readability; keys are flat
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def resolve_config(path=None, overrides: dict | None = None, environ=None) -> SweepConfig:
    environ = os.environ if environ is None else environ
    defaults = SweepConfig()
    names = {f.name for f in dataclasses.fields(SweepConfig)}
    merged: dict = {}
    if path is not None:
        merged.update(load_config_file(path))
    for name in names:
        env = environ.get(f"DIVANN_{name.upper()}")
        if env is not None:
            merged[name] = env
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - names
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    # epsilon and phi are alternatives: the later layer's choice displaces the other
    if "epsilon" in (overrides or {}) and overrides["epsilon"] is not None:
        merged.pop("phi", None)
    if "phi" in (overrides or {}) and overrides["phi"] is not None:
        merged.pop("epsilon", None)
    kwargs = {key: _coerce(key, value, getattr(defaults, key)) for key, value in merged.items()}
    return SweepConfig(**kwargs)


def load_dataset(config: SweepConfig) -> Dataset:
    if config.dataset:
        return dataio.load_fvecs(config.dataset, config.metric)
    spec = dataio.SyntheticSpec(config.n, config.d, config.distribution, config.seed,
                                config.clusters, config.sigma)
    return dataio.generate(spec, config.metric)


def load_queries(config: SweepConfig, dataset: Dataset) -> np.ndarray:
    if config.queries:
        q = dataio.read_fvecs(config.queries)
    else:
        # same distribution as the dataset unless a query file is supplied
        spec = dataio.SyntheticSpec(max(config.num_queries, 1), dataset.dim, config.distribution,
                                    config.query_seed, config.clusters, config.sigma)
        q = dataio.generate_vectors(spec)[: config.num_queries]
    if q.shape[0] and q.shape[1] != dataset.dim:
        raise InputError(f"queries have dimension {q.shape[1]}, dataset has {dataset.dim}")
    return q


def load_or_build_index(config: SweepConfig, dataset: Dataset) -> ProximityIndex:
    if config.index and Path(config.index).exists():
        index = load_index(config.index)
        if index.n != dataset.n or index.dim != dataset.dim or index.metric != dataset.metric:
            raise InputError(
                f"index {config.index} was built for N={index.n}, d={index.dim}, {index.metric.name}; "
                f"dataset is N={dataset.n}, d={dataset.dim}, {dataset.metric.name}"
            )
        return index
    return build_index(dataset, M=config.M, ef_construction=config.ef_construction, seed=config.seed)


def epsilon_levels(config: SweepConfig, dataset: Dataset) -> list:
    """(epsilon, phi) pairs; phi is None for absolute thresholds."""
    if config.epsilon is not None:
        return [(float(e), None) for e in config.epsilon]
    return [(metrics.calibrate_epsilon(dataset, p, seed=config.seed), float(p)) for p in config.phi]


def ground_truth_key(query_index: int, k: int, epsilon: float) -> tuple:
    return (int(query_index), int(k), float(epsilon))


def index_ground_truth(truths) -> dict:
    return {ground_truth_key(g.query_index, g.k, g.epsilon): g for g in truths}


def _missing_truth(detail: str) -> MissingGroundTruthError:
    return MissingGroundTruthError(
        f"{detail}; run the oracle stage first (`divann ground-truth`) or set recall = false"
    )


@dataclass
class RunReport:
    config: dict
    records: list
    aggregates: list


def _percentile(values, q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=np.float64), q)) if values else math.nan


def _mean(values) -> float:
    return math.fsum(values) / len(values) if values else math.nan


def stable_ef(recall_by_ef: dict):
    """Smallest ef from which every further ef step changes mean recall by less
    than ``STABLE_RECALL_DELTA``.  ``None`` without recall data."""
    efs = sorted(recall_by_ef)
    if not efs or any(recall_by_ef[e] is None or math.isnan(recall_by_ef[e]) for e in efs):
        return None
    stable = efs[-1]
    for i in range(len(efs) - 2, -1, -1):
        if abs(recall_by_ef[efs[i + 1]] - recall_by_ef[efs[i]]) < STABLE_RECALL_DELTA:
            stable = efs[i]
        else:
            break
    return stable


def aggregate(records) -> list:
    """Aggregate rows per (algorithm, k, epsilon, ef) in first-seen order."""
    groups: dict = {}
    for rec in records:
        key = (rec["algorithm"], rec["k"], rec["epsilon"], rec["ef"])
        groups.setdefault(key, []).append(rec)
    rows = []
    for (algo, k, eps, ef), recs in groups.items():
        lat = [r["latency_us"] for r in recs]
        recalls = [r["recall"] for r in recs if r["recall"] is not None]
        rows.append({
            "algorithm": algo, "k": k, "epsilon": eps, "phi": recs[0]["phi"], "ef": ef,
            "queries": len(recs),
            "mean_latency_us": _mean(lat),
            "median_latency_us": _percentile(lat, 50),
            "p99_latency_us": _percentile(lat, 99),
            "mean_score": _mean([r["total_score"] for r in recs]),
            "mean_recall": _mean(recalls) if len(recalls) == len(recs) else None,
        })
    by_cell: dict = {}
    for row in rows:
        by_cell.setdefault((row["algorithm"], row["k"], row["epsilon"]), {})[row["ef"]] = row["mean_recall"]
    for row in rows:
        row["stable_ef"] = stable_ef(by_cell[(row["algorithm"], row["k"], row["epsilon"])])
    return rows


def _run_one(algorithm, index, dataset, query, config, truth, meta):
    t0 = time.perf_counter_ns()
    try:
        result = run_query(algorithm, index, dataset, query, config)
    except ResourceError as exc:
        if exc.partial is None:
            raise
        result = exc.partial
    latency_us = (time.perf_counter_ns() - t0) / 1000.0
    check_result(dataset, result)
    recall = metrics.compute_recall(result, truth) if truth is not None else None
    rec = dict(meta)
    rec.update(
        latency_us=latency_us,
        total_score=metrics.compute_score(result),
        recall=recall,
        complete=result.complete,
        final_K=int(result.final_K),
        iterations=int(result.iterations),
        distance_evals=int(result.stats.get("distance_evals", 0)),
    )
    return rec


def run_sweep(config: SweepConfig, dataset: Dataset | None = None, index: ProximityIndex | None = None,
              queries: np.ndarray | None = None, truths=None) -> RunReport:
    """Run the algorithms x k x epsilon x ef cross product over every query.

    Records come back in a fixed order regardless of ``config.threads``.
    """
    resolved = config.to_dict()
    if not config.algorithms:
        return RunReport(resolved, [], [])
    dataset = load_dataset(config) if dataset is None else dataset
    queries = load_queries(config, dataset) if queries is None else queries
    levels = epsilon_levels(config, dataset)
    resolved["resolved_epsilon"] = [e for e, _ in levels]
    resolved["dataset_shape"] = [dataset.n, dataset.dim]

    truth_index = None
    if config.recall:
        if truths is None:
            if not config.ground_truth:
                raise _missing_truth("recall requested but no ground truth file is configured")
            if not Path(config.ground_truth).exists():
                raise _missing_truth(f"ground truth file {config.ground_truth} does not exist")
            truths = dataio.load_ground_truth(config.ground_truth)
        truth_index = index_ground_truth(truths)

    index = load_or_build_index(config, dataset) if index is None else index
    jobs = []
    for algorithm in config.algorithms:
        for k in config.k:
            for eps, phi in levels:
                for ef in config.ef:
                    algo_config = AlgoConfig(algorithm, ef=int(ef), L=config.L, max_seconds=config.max_seconds)
                    for qi in range(queries.shape[0]):
                        truth = None
                        if truth_index is not None:
                            truth = truth_index.get(ground_truth_key(qi, k, eps))
                            if truth is None:
                                raise _missing_truth(f"no ground truth for query {qi}, k={k}, epsilon={eps!r}")
                            if truth.metric != dataset.metric.name:
                                raise InputError(f"ground truth metric {truth.metric} != {dataset.metric.name}")
                        meta = {"algorithm": algorithm, "k": int(k), "epsilon": eps, "phi": phi,
                                "ef": int(ef), "L": config.L, "query_index": qi}
                        jobs.append((algorithm, Query(queries[qi], int(k), eps), algo_config, truth, meta))

    # one untimed query per algorithm so compilation and cache warm-up stay out of the latencies
    warmed = set()
    for algorithm, query, algo_config, _, _ in jobs:
        if algorithm not in warmed:
            warmed.add(algorithm)
            try:
                run_query(algorithm, index, dataset, query, algo_config)
            except ResourceError:
                pass

    def work(job):
        algorithm, query, algo_config, truth, meta = job
        return _run_one(algorithm, index, dataset, query, algo_config, truth, meta)

    if config.threads == 1:
        records = [work(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(work, jobs))
    return RunReport(resolved, records, aggregate(records))


def compute_ground_truth(config: SweepConfig, dataset: Dataset | None = None,
                         queries: np.ndarray | None = None) -> list:
    """Oracle ground truth for every query x k x epsilon level of ``config``."""
    from .oracle import exact_optimal_diverse

    dataset = load_dataset(config) if dataset is None else dataset
    queries = load_queries(config, dataset) if queries is None else queries
    out = []
    for k in config.k:
        for eps, _ in epsilon_levels(config, dataset):
            for qi in range(queries.shape[0]):
                out.append(exact_optimal_diverse(dataset, Query(queries[qi], int(k), eps), query_index=qi))
    return out


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_report(report: RunReport, out_dir) -> tuple:
    """Write ``records.jsonl`` and ``aggregate.csv`` under ``out_dir``.

    The first JSON line and the first CSV line carry the resolved config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.jsonl"
    dataio.write_jsonl(records_path, [{"config": report.config}] + list(report.records))
    agg_path = out / "aggregate.csv"
    write_aggregate_csv(agg_path, report.aggregates, report.config)
    return records_path, agg_path


def write_aggregate_csv(path, rows, config: dict | None = None) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.DictWriter(fh, fieldnames=AGGREGATE_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_value(row.get(key)) for key in AGGREGATE_FIELDS})
    os.replace(tmp, path)


def read_aggregate_csv(path) -> tuple:
    """(config or None, rows as strings) from an aggregate CSV."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        config = None
        if first.startswith("# config: "):
            config = json.loads(first[len("# config: "):])
        else:
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    return config, rows


def read_records(path) -> tuple:
    """(config, per-query records) from a records file written by :func:`write_report`."""
    lines = dataio.read_jsonl(path)
    if lines and "config" in lines[0] and "algorithm" not in lines[0]:
        return lines[0]["config"], lines[1:]
    return None, lines
