"""fvecs/ivecs readers and writers, synthetic data and ground-truth files."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FormatError, InputError
from .vectors import Dataset, Metric

_DISTRIBUTIONS = ("uniform-cube", "gaussian", "clustered")


def _read_vecs(path, payload: np.dtype) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    size = raw.shape[0]
    if size == 0:
        raise InputError(f"{path}: empty file, a dataset needs at least one vector")
    if size < 4:
        raise FormatError(f"{path}: truncated record header", offset=0)
    dim = int(raw[:4].view("<i4")[0])
    if dim <= 0:
        raise FormatError(f"{path}: non-positive dimension {dim}", offset=0)
    rec = 4 * (dim + 1)
    if size % rec == 0:
        table = raw.view("<i4").reshape(-1, dim + 1)
        bad = np.flatnonzero(table[:, 0] != dim)
        if bad.size == 0:
            return raw.view(payload).reshape(-1, dim + 1)[:, 1:]
    _locate_format_error(path, raw, dim)
    raise AssertionError("unreachable")  # pragma: no cover


def _locate_format_error(path, raw: np.ndarray, dim: int) -> None:
    size = raw.shape[0]
    rec = 4 * (dim + 1)
    offset = 0
    while offset < size:
        if offset + 4 > size:
            raise FormatError(f"{path}: truncated record header", offset=offset)
        d = int(raw[offset : offset + 4].view("<i4")[0])
        if d != dim:
            raise FormatError(f"{path}: inconsistent dimension {d}, expected {dim}", offset=offset)
        if offset + rec > size:
            raise FormatError(f"{path}: truncated record payload", offset=offset)
        offset += rec


def read_fvecs(path) -> np.ndarray:
    """Raw float32 matrix from an fvecs file."""
    return np.ascontiguousarray(_read_vecs(path, np.dtype("<f4")))


def read_ivecs(path) -> np.ndarray:
    return np.ascontiguousarray(_read_vecs(path, np.dtype("<i4")))


def load_fvecs(path, metric=Metric.L2SIM) -> Dataset:
    return Dataset(read_fvecs(path).astype(np.float64), Metric.parse(metric))


def load_ivecs(path) -> list:
    """Integer rows, e.g. imported k-NN ground truth."""
    return [row.tolist() for row in read_ivecs(path)]


def _write_vecs(path, rows, dtype: str) -> None:
    mat = np.asarray(rows)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise InputError(f"expected a non-empty 2-d array, got shape {mat.shape}")
    out = np.empty((mat.shape[0], mat.shape[1] + 1), dtype=dtype)
    out[:, 1:] = mat.astype(dtype)
    out.view("<i4")[:, 0] = mat.shape[1]
    with open(path, "wb") as fh:
        fh.write(out.tobytes())


def write_fvecs(path, vectors) -> None:
    if isinstance(vectors, Dataset):
        vectors = vectors.vectors
    _write_vecs(path, vectors, "<f4")


def write_ivecs(path, rows) -> None:
    _write_vecs(path, rows, "<i4")


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    distribution: str = "gaussian"
    seed: int = 0
    clusters: int = 10
    sigma: float = 0.05

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InputError("synthetic spec needs n >= 1 and d >= 1")
        if self.distribution not in _DISTRIBUTIONS:
            raise InputError(f"unknown distribution {self.distribution!r}; choose from {_DISTRIBUTIONS}")
        if self.distribution == "clustered" and (self.clusters < 1 or self.sigma < 0):
            raise InputError("clustered spec needs clusters >= 1 and sigma >= 0")


def generate_vectors(spec: SyntheticSpec) -> np.ndarray:
    """float32-representable matrix (so fvecs round-trips are exact)."""
    rng = np.random.default_rng(spec.seed)
    if spec.distribution == "uniform-cube":
        x = rng.random((spec.n, spec.d))
    elif spec.distribution == "gaussian":
        x = rng.standard_normal((spec.n, spec.d))
    else:
        centers = rng.random((spec.clusters, spec.d))
        assign = rng.integers(0, spec.clusters, size=spec.n)
        x = centers[assign] + spec.sigma * rng.standard_normal((spec.n, spec.d))
    return x.astype(np.float32).astype(np.float64)


def generate(spec: SyntheticSpec, metric=Metric.L2SIM) -> Dataset:
    return Dataset(generate_vectors(spec), Metric.parse(metric))


def checksum(dataset_or_array) -> str:
    arr = dataset_or_array.vectors if isinstance(dataset_or_array, Dataset) else dataset_or_array
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f4").tobytes()).hexdigest()


@dataclass
class GroundTruth:
    """Optimal diverse set for one query and the parameters it was computed under."""

    query_index: int
    ids: list
    scores: list
    k: int
    epsilon: float
    metric: str
    producer: str = "oracle"
    prefix_size: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def total_score(self) -> float:
        return float(sum(self.scores))

    @property
    def complete(self) -> bool:
        return len(self.ids) == self.k

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["total_score"] = self.total_score
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "GroundTruth":
        rec = dict(rec)
        rec.pop("total_score", None)
        return cls(**rec)


def write_jsonl(path, records) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")
    os.replace(tmp, path)


def read_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
    return out


def save_ground_truth(path, truths) -> None:
    write_jsonl(path, (gt.to_record() for gt in truths))


def load_ground_truth(path) -> list:
    return [GroundTruth.from_record(rec) for rec in read_jsonl(path)]
