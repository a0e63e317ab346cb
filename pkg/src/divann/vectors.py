"""Vector storage, the three similarity functions and the shared query/result types.

Every similarity in the package goes through the numba kernels in this module,
so a pair of vectors always gets bit-identical scores no matter which
component asks (graph construction, diversity edges, result validation, the
oracle).  The diversification predicate is therefore consistent everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .errors import InputError


class Metric(enum.IntEnum):
    L2SIM = 0
    INNER_PRODUCT = 1
    COSINE = 2

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"L2": "L2SIM", "IP": "INNER_PRODUCT", "DOT": "INNER_PRODUCT", "COS": "COSINE"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise InputError(f"unknown metric {value!r}") from None


# Kernel kind: L2SIM uses the distance form, the other two a plain dot product
# (COSINE vectors are normalized once, up front).
KIND_L2 = 0
KIND_DOT = 1


def kernel_kind(metric: Metric) -> int:
    return KIND_L2 if metric == Metric.L2SIM else KIND_DOT


@numba.njit(cache=True, inline="always")
def _sim(kind, a, b):
    acc = 0.0
    if kind == 0:
        for i in range(a.shape[0]):
            t = a[i] - b[i]
            acc += t * t
        return 1.0 - math.sqrt(acc)
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@numba.njit(cache=True)
def _sim_pair(kind, a, b):
    return _sim(kind, a, b)


@numba.njit(cache=True)
def _sims_rows(kind, data, ids, q):
    out = np.empty(ids.shape[0], dtype=np.float64)
    for j in range(ids.shape[0]):
        out[j] = _sim(kind, data[ids[j]], q)
    return out


@numba.njit(cache=True)
def _sims_all(kind, data, q):
    n = data.shape[0]
    out = np.empty(n, dtype=np.float64)
    for j in range(n):
        out[j] = _sim(kind, data[j], q)
    return out


@numba.njit(cache=True)
def _sim_matrix(kind, data, ids):
    n = ids.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for a in range(n):
        out[a, a] = _sim(kind, data[ids[a]], data[ids[a]])
        for b in range(a + 1, n):
            s = _sim(kind, data[ids[a]], data[ids[b]])
            out[a, b] = s
            out[b, a] = s
    return out


@numba.njit(cache=True)
def _sim_block(kind, data, ids_a, ids_b):
    out = np.empty((ids_a.shape[0], ids_b.shape[0]), dtype=np.float64)
    for a in range(ids_a.shape[0]):
        for b in range(ids_b.shape[0]):
            out[a, b] = _sim(kind, data[ids_a[a]], data[ids_b[b]])
    return out


@numba.njit(cache=True)
def _normalize_rows(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        acc = 0.0
        for j in range(x.shape[1]):
            acc += x[i, j] * x[i, j]
        nrm = math.sqrt(acc)
        for j in range(x.shape[1]):
            out[i, j] = x[i, j] / nrm
    return out


def _as_matrix(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InputError(f"expected a 2-d array of vectors, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def _check_nonzero(mat: np.ndarray, what: str) -> None:
    zero = ~np.any(mat != 0.0, axis=1)
    if zero.any():
        raise InputError(f"{what}: zero-norm vector at row {int(np.argmax(zero))} under COSINE")


def prepare(metric: Metric, vectors) -> np.ndarray:
    """Vectors in the form the kernels consume (unit-normalized for COSINE)."""
    mat = _as_matrix(vectors)
    if not np.all(np.isfinite(mat)):
        raise InputError("vectors contain non-finite values")
    if metric == Metric.COSINE:
        _check_nonzero(mat, "vectors")
        return _normalize_rows(mat)
    return mat


def similarity(metric, u, v) -> float:
    """Similarity of two vectors; higher means more alike."""
    metric = Metric.parse(metric)
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise InputError("empty vectors")
    pa, pb = prepare(metric, a), prepare(metric, b)
    return float(_sim_pair(kernel_kind(metric), pa[0], pb[0]))


def is_diverse_pair(metric, u, v, epsilon: float) -> bool:
    """True iff the pair may coexist in a diverse result (strictly below epsilon)."""
    return similarity(metric, u, v) < epsilon


class ScoredId(NamedTuple):
    id: int
    score: float


def sort_key(item: ScoredId):
    """Queue order used everywhere: score descending, then lower id first."""
    return (-item.score, item.id)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable collection of ``N`` vectors of dimension ``d`` under one metric.

    ``vectors`` keeps the original values; ``data`` is what similarity kernels
    read (the unit-normalized rows for COSINE, the originals otherwise).
    """

    vectors: np.ndarray
    metric: Metric
    data: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        metric = Metric.parse(self.metric)
        mat = _as_matrix(self.vectors)
        if mat.shape[0] < 1:
            raise InputError("dataset must contain at least one vector")
        if mat.shape[1] < 1:
            raise InputError("vector dimension must be >= 1")
        data = prepare(metric, mat)
        mat.setflags(write=False)
        data.setflags(write=False)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "vectors", mat)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def kind(self) -> int:
        return kernel_kind(self.metric)

    def __len__(self) -> int:
        return self.n

    def prepare_query(self, q) -> np.ndarray:
        vec = np.asarray(q, dtype=np.float64).ravel()
        if vec.shape[0] != self.dim:
            raise InputError(f"query dimension {vec.shape[0]} does not match dataset dimension {self.dim}")
        return prepare(self.metric, vec)[0]

    def scores(self, q_prepared: np.ndarray, ids=None) -> np.ndarray:
        """Similarity of each (or the given) dataset row to a prepared query."""
        if ids is None:
            return _sims_all(self.kind, self.data, q_prepared)
        return _sims_rows(self.kind, self.data, np.asarray(ids, dtype=np.int64), q_prepared)

    def pair_similarity(self, a: int, b: int) -> float:
        return float(_sim_pair(self.kind, self.data[a], self.data[b]))

    def similarity_matrix(self, ids) -> np.ndarray:
        return _sim_matrix(self.kind, self.data, np.asarray(ids, dtype=np.int64))

    def similarity_block(self, ids_a, ids_b) -> np.ndarray:
        return _sim_block(
            self.kind, self.data, np.asarray(ids_a, dtype=np.int64), np.asarray(ids_b, dtype=np.int64)
        )


@dataclass(frozen=True)
class Query:
    q: np.ndarray
    k: int
    epsilon: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InputError(f"k must be a positive integer, got {self.k!r}")
        if not math.isfinite(float(self.epsilon)):
            raise InputError("epsilon must be finite")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64).ravel())


@dataclass(frozen=True)
class DiverseResult:
    items: tuple
    k: int
    epsilon: float
    algorithm: str = ""
    final_K: int = 0
    iterations: int = 0
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def total_score(self) -> float:
        return math.fsum(it.score for it in self.items)

    @property
    def complete(self) -> bool:
        return len(self.items) == self.k

    @property
    def ids(self) -> list:
        return [it.id for it in self.items]

    def to_record(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "epsilon": self.epsilon,
            "ids": self.ids,
            "scores": [it.score for it in self.items],
            "total_score": self.total_score,
            "complete": self.complete,
            "final_K": self.final_K,
            "iterations": self.iterations,
        }


def make_result(items: Sequence[ScoredId], query: Query, **kw) -> DiverseResult:
    ordered = tuple(sorted((ScoredId(int(i), float(s)) for i, s in items), key=sort_key))
    return DiverseResult(items=ordered, k=query.k, epsilon=query.epsilon, **kw)


def violating_pairs(dataset: Dataset, ids, epsilon: float) -> list:
    """Pairs of ``ids`` whose similarity reaches ``epsilon`` (empty for a valid diverse set)."""
    ids = list(ids)
    if len(ids) < 2:
        return []
    sims = dataset.similarity_matrix(ids)
    bad = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if not sims[a, b] < epsilon:
                bad.append((ids[a], ids[b]))
    return bad


def check_result(dataset: Dataset, result: DiverseResult) -> None:
    """Raise AssertionError unless ``result`` honours the DiverseResult invariants."""
    ids = result.ids
    assert all(0 <= i < dataset.n for i in ids), f"id out of range in result: {ids}"
    assert len(set(ids)) == len(ids), "duplicate ids in result"
    assert len(ids) <= result.k, "result larger than k"
    assert result.complete == (len(ids) == result.k)
    bad = violating_pairs(dataset, ids, result.epsilon)
    assert not bad, f"pairs violate the diversity threshold: {bad[:3]}"
