"""HNSW-style proximity graph: construction, fixed-width beam search, persistence.

Layer 0 holds every node with at most ``M0 = 2*M`` links; upper layers are
geometrically sparser with at most ``M`` links.  Levels are drawn up front
from a seeded generator, so a build is a pure function of
``(dataset, M, ef_construction, seed)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _hnsw_kernels as K
from .errors import FormatError, InputError
from .vectors import Dataset, Metric, ScoredId

MAGIC = b"DIVANNIX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIqqiiiiqiid")  # magic, version, n, d, metric, M, M0, efc, seed, entry, top, mult


@dataclass(eq=False)
class ProximityIndex:
    levels: np.ndarray  # int32 (N,) top layer of every node
    links0: np.ndarray  # int32 (N, M0), padded with -1
    cnt0: np.ndarray  # int32 (N,)
    upper: np.ndarray  # int32 (max(top,1), N, M); upper[l-1] is layer l
    cnt_up: np.ndarray  # int32 (max(top,1), N)
    entry_point: int
    top_level: int
    M: int
    M0: int
    ef_construction: int
    level_multiplier: float
    seed: int
    metric: Metric
    dim: int

    @property
    def n(self) -> int:
        return self.links0.shape[0]

    def neighbors(self, node: int, layer: int = 0) -> np.ndarray:
        if layer == 0:
            return self.links0[node, : self.cnt0[node]]
        return self.upper[layer - 1, node, : self.cnt_up[layer - 1, node]]

    def layer_nodes(self, layer: int) -> np.ndarray:
        return np.flatnonzero(self.levels >= layer)

    def edge_sets(self) -> list:
        """Per layer, the sorted list of directed edges (for equality checks)."""
        out = []
        for layer in range(self.top_level + 1):
            edges = []
            for u in self.layer_nodes(layer):
                edges.extend((int(u), int(v)) for v in self.neighbors(int(u), layer))
            out.append(sorted(edges))
        return out

    def check(self, dataset: Dataset | None = None) -> None:
        """Assert the structural invariants (degree caps, valid ids, entry point)."""
        n = self.n
        assert np.all(self.cnt0 <= self.M0)
        assert self.levels[self.entry_point] == self.top_level
        for layer in range(self.top_level + 1):
            present = self.levels >= layer
            for u in np.flatnonzero(present):
                nbrs = self.neighbors(int(u), layer)
                cap = self.M0 if layer == 0 else self.M
                assert len(nbrs) <= cap
                assert np.all((nbrs >= 0) & (nbrs < n))
                assert np.all(present[nbrs]), f"edge to node absent from layer {layer}"
                assert u not in nbrs
        if dataset is not None:
            assert dataset.n == n and dataset.dim == self.dim and dataset.metric == self.metric


def draw_levels(n: int, M: int, seed: int, max_level: int = 16) -> np.ndarray:
    mult = 1.0 / math.log(M)
    u = np.random.default_rng(seed).random(n)
    lv = np.floor(-np.log1p(-u) * mult).astype(np.int64)
    return np.minimum(lv, max_level).astype(np.int32)


def build_index(dataset: Dataset, M: int = 16, ef_construction: int = 200, seed: int = 0) -> ProximityIndex:
    if M < 2:
        raise InputError("M must be >= 2")
    if ef_construction < 1:
        raise InputError("ef_construction must be >= 1")
    M0 = 2 * M
    levels = draw_levels(dataset.n, M, seed)
    links0, cnt0, upper, cnt_up, entry, top = K.build(
        dataset.kind, dataset.data, levels, M, M0, ef_construction
    )
    return ProximityIndex(
        levels=levels,
        links0=links0,
        cnt0=cnt0,
        upper=upper,
        cnt_up=cnt_up,
        entry_point=int(entry),
        top_level=int(top),
        M=M,
        M0=M0,
        ef_construction=ef_construction,
        level_multiplier=1.0 / math.log(M),
        seed=seed,
        metric=dataset.metric,
        dim=dataset.dim,
    )


def layer0_entry(index: ProximityIndex, dataset: Dataset, q_prepared: np.ndarray, counter=None) -> int:
    """Greedy descent through the upper layers; the start point for layer-0 search."""
    if counter is None:
        counter = np.zeros(2, dtype=np.int64)
    return int(
        K.descend(dataset.kind, dataset.data, q_prepared, index.entry_point, index.top_level,
                  index.upper, index.cnt_up, counter)
    )


class BeamHits(list):
    """List of ScoredId with search diagnostics attached."""

    truncated = False
    distance_evals = 0
    hops = 0


def exact_scan(dataset: Dataset, q_prepared: np.ndarray, k: int) -> list:
    scores = dataset.scores(q_prepared)
    order = np.lexsort((np.arange(dataset.n), -scores))[:k]
    return [ScoredId(int(i), float(scores[i])) for i in order]


def beam_search(index: ProximityIndex, dataset: Dataset, q, k: int, L: int) -> BeamHits:
    """Top-``k`` by fixed-width beam search with queue width ``L``.

    Descends the upper layers greedily, then runs the classic bounded-queue
    search on layer 0.  ``L >= N`` falls back to an exact scan.
    """
    if k < 1 or L < k:
        raise InputError(f"beam_search needs 1 <= k <= L (k={k}, L={L})")
    q_prepared = dataset.prepare_query(q)
    hits = BeamHits()
    counter = np.zeros(2, dtype=np.int64)
    if L >= dataset.n:
        hits.extend(exact_scan(dataset, q_prepared, k))
        counter[0] = dataset.n
    else:
        start = layer0_entry(index, dataset, q_prepared, counter)
        scores, ids = K.beam_search(dataset.kind, dataset.data, q_prepared, start, L,
                                    index.links0, index.cnt0, counter)
        hits.extend(ScoredId(int(i), float(s)) for s, i in zip(scores[:k], ids[:k]))
    hits.truncated = len(hits) < k
    hits.distance_evals = int(counter[0])
    hits.hops = int(counter[1])
    return hits


def _csr(index: ProximityIndex, layer: int):
    nodes = index.layer_nodes(layer).astype(np.int32)
    if layer == 0:
        counts = index.cnt0[nodes]
        rows = index.links0
    else:
        counts = index.cnt_up[layer - 1][nodes]
        rows = index.upper[layer - 1]
    offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    flat = np.concatenate([rows[u, :c] for u, c in zip(nodes, counts)] or [np.empty(0, np.int32)])
    return nodes, offsets, flat.astype(np.int32)


def save_index(index: ProximityIndex, path) -> None:
    """Versioned binary format: header, levels, then per-layer CSR adjacency."""
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(MAGIC, FORMAT_VERSION, index.n, index.dim, int(index.metric), index.M, index.M0,
                         index.ef_construction, index.seed, index.entry_point, index.top_level,
                         index.level_multiplier)
        )
        fh.write(index.levels.astype("<i4").tobytes())
        for layer in range(index.top_level + 1):
            nodes, offsets, flat = _csr(index, layer)
            fh.write(struct.pack("<qq", len(nodes), len(flat)))
            fh.write(nodes.astype("<i4").tobytes())
            fh.write(offsets.astype("<i8").tobytes())
            fh.write(flat.astype("<i4").tobytes())


def load_index(path) -> ProximityIndex:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated index header", offset=0)
    magic, version, n, d, metric, M, M0, efc, seed, entry, top, mult = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: not an index file (bad magic)", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: index format version {version}, expected {FORMAT_VERSION}", offset=8)
    pos = _HEADER.size

    def take(count, dtype):
        nonlocal pos
        nbytes = count * np.dtype(dtype).itemsize
        if pos + nbytes > len(buf):
            raise FormatError(f"{path}: truncated index body", offset=pos)
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
        pos += nbytes
        return arr

    levels = take(n, "<i4").astype(np.int32)
    links0 = np.full((n, M0), -1, dtype=np.int32)
    cnt0 = np.zeros(n, dtype=np.int32)
    upper = np.full((max(top, 1), n, M), -1, dtype=np.int32)
    cnt_up = np.zeros((max(top, 1), n), dtype=np.int32)
    for layer in range(top + 1):
        n_nodes, n_edges = take(2, "<i8")
        nodes = take(int(n_nodes), "<i4")
        offsets = take(int(n_nodes) + 1, "<i8")
        flat = take(int(n_edges), "<i4")
        rows, counts = (links0, cnt0) if layer == 0 else (upper[layer - 1], cnt_up[layer - 1])
        for j, u in enumerate(nodes):
            seg = flat[offsets[j] : offsets[j + 1]]
            rows[u, : len(seg)] = seg
            counts[u] = len(seg)
    if pos != len(buf):
        raise FormatError(f"{path}: trailing bytes after index body", offset=pos)
    return ProximityIndex(
        levels=levels, links0=links0, cnt0=cnt0, upper=upper, cnt_up=cnt_up,
        entry_point=int(entry), top_level=int(top), M=int(M), M0=int(M0), ef_construction=int(efc),
        level_multiplier=float(mult), seed=int(seed), metric=Metric(metric), dim=int(d),
    )
