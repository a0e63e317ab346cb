"""Brute-force ground truth, written independently of the search code.

Nothing here imports the diversity-graph or div-A* modules; the conflict
structure, the degree certificate and the set search are all recomputed from
scratch so that a bug in the fast path cannot validate itself.
"""

from __future__ import annotations

import itertools
import math

import numba
import numpy as np

from .dataio import GroundTruth
from .errors import InputError, ResourceError
from .vectors import Dataset, Query, ScoredId, _sim

DEFAULT_MAX_NODES = 10**9


def exact_knn(dataset: Dataset, q, K: int) -> list:
    """Exact top-K by (score desc, id asc) via a full scan."""
    if not 1 <= K <= dataset.n:
        raise InputError(f"K must be within 1..{dataset.n}")
    qp = dataset.prepare_query(q)
    scores = dataset.scores(qp)
    order = np.lexsort((np.arange(dataset.n), -scores))[:K]
    return [ScoredId(int(i), float(scores[i])) for i in order]


@numba.njit(cache=True)
def _conflicts(kind, data, ids, eps):
    """CSR adjacency of the conflict graph (similarity >= eps) over ``ids``."""
    n = ids.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    for a in range(n):
        for b in range(a + 1, n):
            if _sim(kind, data[ids[a]], data[ids[b]]) >= eps:
                deg[a] += 1
                deg[b] += 1
    offsets = np.zeros(n + 1, dtype=np.int64)
    for a in range(n):
        offsets[a + 1] = offsets[a] + deg[a]
    nbrs = np.empty(offsets[n], dtype=np.int64)
    fill = offsets[:-1].copy()
    for a in range(n):
        for b in range(a + 1, n):
            if _sim(kind, data[ids[a]], data[ids[b]]) >= eps:
                nbrs[fill[a]] = b
                fill[a] += 1
                nbrs[fill[b]] = a
                fill[b] += 1
    return offsets, nbrs, deg


@numba.njit(cache=True)
def _key_less(a, b):
    for t in range(a.shape[0]):
        if a[t] != b[t]:
            return a[t] < b[t]
    return False


@numba.njit(cache=True)
def _free(kind, data, ids, chosen, depth, t, eps):
    u = data[ids[t]]
    for c in range(depth):
        if _sim(kind, u, data[ids[chosen[c]]]) >= eps:
            return False
    return True


@numba.njit(cache=True)
def _dfs_best(kind, data, ids, scores, eps, target, max_nodes):
    """Depth-first search over a ranked list for the best conflict-free set of
    exactly ``target`` entries.

    Conflicts are evaluated on demand against the chosen entries, so the list
    may be the whole dataset.  A branch stops once the current total plus the
    next ``remaining`` conflict-free scores falls below the incumbent; since
    the list is score ordered that bound only shrinks along a level.
    """
    n = ids.shape[0]
    chosen = np.empty(target, dtype=np.int64)
    next_j = np.zeros(target + 1, dtype=np.int64)
    cur = np.zeros(target + 1, dtype=np.float64)
    best = -np.inf
    best_set = np.full(target, -1, dtype=np.int64)
    best_key = np.empty(target, dtype=np.int64)
    found = False
    nodes = 0
    depth = 0
    while True:
        j = next_j[depth]
        advanced = False
        while j < n:
            if not _free(kind, data, ids, chosen, depth, j, eps):
                j += 1
                continue
            need = target - depth
            ub = cur[depth] + scores[j]
            cnt = 1
            t = j + 1
            while t < n and cnt < need:
                if _free(kind, data, ids, chosen, depth, t, eps):
                    ub += scores[t]
                    cnt += 1
                t += 1
            if cnt < need or ub < best:
                break
            nodes += 1
            if nodes > max_nodes:
                return best_set, best, found, False
            chosen[depth] = j
            cur[depth + 1] = cur[depth] + scores[j]
            if depth + 1 == target:
                total = cur[depth + 1]
                key = np.sort(ids[chosen])
                if (not found) or total > best or (total == best and _key_less(key, best_key)):
                    best = total
                    best_set[:] = chosen
                    best_key[:] = key
                    found = True
                j += 1
                continue
            next_j[depth] = j + 1
            depth += 1
            next_j[depth] = j + 1
            advanced = True
            break
        if not advanced:
            if depth == 0:
                break
            depth -= 1
    return best_set, best, found, True


def degree_certificate(deg: np.ndarray, ids: np.ndarray, k: int) -> int:
    """Sum of (degree + 1) over the k-1 highest-degree nodes, plus one."""
    if len(deg) < k - 1:
        return k
    order = np.lexsort((ids, -deg))[: k - 1]
    return int(np.sum(deg[order] + 1)) + 1


def certified_prefix_size(dataset: Dataset, query: Query, x_cap: int | None = None) -> tuple:
    """Smallest doubling step X (from max(4k, 64)) whose top-X conflict graph
    satisfies the degree certificate.  Returns (X, certified)."""
    n = dataset.n
    cap = n if x_cap is None else max(1, min(int(x_cap), n))
    qp = dataset.prepare_query(query.q)
    scores = dataset.scores(qp)
    order = np.lexsort((np.arange(n), -scores))
    X = min(max(4 * query.k, 64), cap)
    while True:
        ids = order[:X].astype(np.int64)
        _, _, deg = _conflicts(dataset.kind, dataset.data, ids, query.epsilon)
        bound = degree_certificate(deg, ids, query.k)
        if bound <= X or X >= cap:
            return X, bound <= X or X == n
        X = min(2 * X, cap)


def best_diverse_in_prefix(dataset: Dataset, ranked_ids, ranked_scores, k: int, epsilon: float,
                           max_nodes: int = DEFAULT_MAX_NODES):
    """Best diverse set of size ``k`` within a ranked list; falls back to the
    largest feasible size.  Returns (positions, size)."""
    ids = np.ascontiguousarray(ranked_ids, dtype=np.int64)
    scores = np.ascontiguousarray(ranked_scores, dtype=np.float64)
    for size in range(min(k, len(ids)), 0, -1):
        pos, _, found, complete = _dfs_best(dataset.kind, dataset.data, ids, scores, float(epsilon),
                                            size, max_nodes)
        if not complete:
            raise ResourceError("oracle search exceeded its node budget; lower X_cap or N")
        if found:
            return [int(p) for p in pos], size
    return [], 0


def exact_optimal_diverse(dataset: Dataset, query: Query, x_cap: int | None = None,
                          query_index: int = 0, max_nodes: int = DEFAULT_MAX_NODES) -> GroundTruth:
    """Optimal diverse set for ``query`` among the top ``x_cap`` points (default: all N).

    Infeasible k yields the best set of the largest feasible size.
    """
    n = dataset.n
    k = query.k
    qp = dataset.prepare_query(query.q)
    scores = dataset.scores(qp)
    X = n if x_cap is None else max(1, min(int(x_cap), n))
    order = np.lexsort((np.arange(n), -scores))[:X]
    positions, size = best_diverse_in_prefix(dataset, order, scores[order], k, query.epsilon, max_nodes)
    chosen = sorted(positions)
    return GroundTruth(
        query_index=query_index,
        ids=[int(order[p]) for p in chosen],
        scores=[float(scores[order[p]]) for p in chosen],
        k=k,
        epsilon=query.epsilon,
        metric=dataset.metric.name,
        producer="oracle",
        prefix_size=int(X),
        extra={"deepest_position": int(max(chosen)) + 1 if chosen else 0, "largest_feasible": size},
    )


def exhaustive_best_sets(scores, conflict, k: int, ids=None):
    """Best conflict-free set of every size 1..k by enumerating all subsets.

    ``conflict(a, b)`` says whether positions a and b conflict.  Returns
    ``(sets, totals)`` indexed by size; infeasible sizes give ``None`` and
    ``-inf``.  Ties go to the lexicographically smallest sorted id tuple.
    """
    n = len(scores)
    ids = list(range(n)) if ids is None else list(ids)
    sets = [None] * (k + 1)
    totals = [-math.inf] * (k + 1)
    for size in range(1, k + 1):
        for combo in itertools.combinations(range(n), size):
            if any(conflict(a, b) for a, b in itertools.combinations(combo, 2)):
                continue
            total = 0.0
            for p in combo:
                total += scores[p]
            key = tuple(sorted(ids[p] for p in combo))
            if total > totals[size] or (
                total == totals[size] and key < tuple(sorted(ids[p] for p in sets[size]))
            ):
                totals[size] = total
                sets[size] = combo
    return sets, totals
