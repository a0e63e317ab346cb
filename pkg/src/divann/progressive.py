"""Progressive beam search: an uncapped, resumable candidate queue.

A search stabilizes the first unstable queue entry (expanding its layer-0
neighbours) until the first ``K * ef`` entries of the queue are all stable.
The queue survives between calls, so asking again with a larger ``K`` picks
up exactly where the previous call stopped; the sequence of stabilizations is
the same as a single fresh call with the larger target.

Two candidate sources share one small interface (``advance``, ``top``,
``score_at``, ``prefix_len``, ``exhausted``):

* :class:`SearchState` walks a :class:`~divann.hnsw.ProximityIndex`;
* :class:`ExactOrderState` hands out the exact similarity ranking of the
  whole dataset, which lets the exactness tests bypass the graph.
"""

from __future__ import annotations

import bisect

import numpy as np

from . import _progressive_kernels as PK
from .errors import InputError
from .hnsw import ProximityIndex, layer0_entry
from .vectors import Dataset, ScoredId


class SearchState:
    """Candidate queue plus instrumentation for one in-flight query."""

    def __init__(self, index: ProximityIndex, dataset: Dataset, q, start: int | None = None):
        if index.n != dataset.n:
            raise InputError("index and dataset sizes differ")
        self.index = index
        self.dataset = dataset
        self.query = dataset.prepare_query(q)
        n = dataset.n
        self._hs = np.empty(n, dtype=np.float64)
        self._hi = np.empty(n, dtype=np.int64)
        self._st_s = np.empty(n, dtype=np.float64)
        self._st_i = np.empty(n, dtype=np.int64)
        self._visited = np.zeros(n, dtype=np.bool_)
        self._meta = np.zeros(5, dtype=np.int64)
        counter = np.zeros(2, dtype=np.int64)
        if start is None:
            start = layer0_entry(index, dataset, self.query, counter)
        self._descent_evals = int(counter[0])
        s0 = float(dataset.scores(self.query, [start])[0])
        self._hs[0] = s0
        self._hi[0] = start
        self._visited[start] = True
        self._meta[PK.HSIZE] = 1
        self._meta[PK.EVALS] = 1
        self._prefix = 0

    # --- queue views -------------------------------------------------
    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def stable_count(self) -> int:
        return int(self._meta[PK.SSIZE])

    @property
    def unstable_count(self) -> int:
        return int(self._meta[PK.HSIZE])

    @property
    def prefix_len(self) -> int:
        """Length of the all-stable head of the queue."""
        return self._prefix

    @property
    def exhausted(self) -> bool:
        return self._meta[PK.HSIZE] == 0

    @property
    def distance_evals(self) -> int:
        return int(self._meta[PK.EVALS]) + self._descent_evals

    @property
    def hops(self) -> int:
        return int(self._meta[PK.HOPS])

    @property
    def insert_shifts(self) -> int:
        return int(self._meta[PK.SHIFTS])

    def visited_ids(self) -> np.ndarray:
        return np.flatnonzero(self._visited)

    def top(self, K: int) -> list:
        K = min(K, self._prefix)
        return [ScoredId(int(i), float(s)) for s, i in zip(self._st_s[:K], self._st_i[:K])]

    def top_ids(self, K: int) -> np.ndarray:
        return self._st_i[: min(K, self._prefix)].copy()

    def score_at(self, K: int) -> float:
        """Score of the K-th (1-indexed) queue entry; must lie in the stable head."""
        if not 1 <= K <= self._prefix:
            raise IndexError(K)
        return float(self._st_s[K - 1])

    def prefix_scores(self) -> np.ndarray:
        return self._st_s[: self._prefix]

    def entries(self) -> list:
        """Full queue in order as (ScoredId, stable) pairs; for tests and debugging."""
        stable = [(ScoredId(int(i), float(s)), True) for s, i in
                  zip(self._st_s[: self.stable_count], self._st_i[: self.stable_count])]
        hsz = self.unstable_count
        unstable = sorted(
            ((ScoredId(int(i), float(s)), False) for s, i in zip(self._hs[:hsz], self._hi[:hsz])),
            key=lambda e: (-e[0].score, e[0].id),
        )
        merged = stable + unstable
        merged.sort(key=lambda e: (-e[0].score, e[0].id))
        return merged

    def advance(self, target: int) -> int:
        target = min(int(target), self.n)
        if target > self._prefix:
            self._prefix = int(
                PK.advance(self.dataset.kind, self.dataset.data, self.query, self.index.links0,
                           self.index.cnt0, self._hs, self._hi, self._st_s, self._st_i,
                           self._visited, self._meta, target)
            )
        return self._prefix


class ExactOrderState:
    """Candidate source that yields the exact ranking, as a perfect index would."""

    def __init__(self, dataset: Dataset, q):
        self.dataset = dataset
        self.query = dataset.prepare_query(q)
        scores = dataset.scores(self.query)
        order = np.lexsort((np.arange(dataset.n), -scores))
        self._ids = order.astype(np.int64)
        self._scores = scores[order]
        self._prefix = 0
        self.distance_evals = dataset.n
        self.hops = 0

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def prefix_len(self) -> int:
        return self._prefix

    @property
    def stable_count(self) -> int:
        return self._prefix

    @property
    def exhausted(self) -> bool:
        return self._prefix >= self.n

    def advance(self, target: int) -> int:
        self._prefix = max(self._prefix, min(int(target), self.n))
        self.hops = self._prefix
        return self._prefix

    def top(self, K: int) -> list:
        K = min(K, self._prefix)
        return [ScoredId(int(i), float(s)) for s, i in zip(self._scores[:K], self._ids[:K])]

    def top_ids(self, K: int) -> np.ndarray:
        return self._ids[: min(K, self._prefix)].copy()

    def score_at(self, K: int) -> float:
        if not 1 <= K <= self._prefix:
            raise IndexError(K)
        return float(self._scores[K - 1])

    def prefix_scores(self) -> np.ndarray:
        return self._scores[: self._prefix]


def start_state(index: ProximityIndex, dataset: Dataset, q) -> SearchState:
    return SearchState(index, dataset, q)


def progressive_beam_search(state, K: int, ef: int):
    """Resume the search until the first ``K * ef`` queue entries are stable
    (capped at N) or the queue runs out of unstable entries."""
    if K < 1 or ef < 1:
        raise InputError("K and ef must be >= 1")
    state.advance(min(K * ef, state.n))
    return state


def progressive_beam_search_until(state, min_value: float, ef: int, K: int):
    """Grow ``K`` until the K-th candidate scores below ``min_value``.

    The first ``K * ef`` entries are kept stable throughout.  Returns the new
    ``K`` and the state; on exhaustion ``K`` is clamped to the queue length.
    """
    if ef < 1 or K < 1:
        raise InputError("K and ef must be >= 1")
    while True:
        p = state.advance(min(K * ef, state.n))
        if p < K:
            # queue exhausted before K entries could be stabilized
            return max(p, 1), state
        if state.score_at(K) < min_value:
            return K, state
        scores = state.prefix_scores()
        # scores are non-increasing, so the first entry below min_value is found by bisection
        j = len(scores) - bisect.bisect_left(scores[::-1].tolist(), min_value)
        K = max(K + 1, j + 1)
        if state.exhausted and K > p:
            return p, state

