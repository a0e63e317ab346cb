"""End-to-end diverse k-NN query algorithms.

``greedy_baseline``  fixed-width beam search, then greedy filtering.
``pgs``              progressive search with greedy filtering, K grows by k.
``pds``              progressive search until the degree certificate holds, then div-A*.
``pss``              PGS to seed, then div-A* rounds until the score-gap test holds.

Every algorithm accepts an optional candidate ``source`` (a
:class:`~divann.progressive.SearchState` or
:class:`~divann.progressive.ExactOrderState`); by default a fresh graph
search state is created from the index.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import diversity_graph as dg
from .astar import DEFAULT_MAX_EXPANSIONS, div_astar, min_value
from .errors import InputError, ResourceError
from .hnsw import ProximityIndex, beam_search
from .progressive import SearchState, progressive_beam_search_until
from .vectors import Dataset, Query, _sim, make_result


class Algorithm(str, enum.Enum):
    GREEDY = "GREEDY"
    PGS = "PGS"
    PDS = "PDS"
    PSS = "PSS"

    @classmethod
    def parse(cls, value) -> "Algorithm":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise InputError(f"unknown algorithm {value!r}") from None


@dataclass(frozen=True)
class AlgoConfig:
    algorithm: Algorithm = Algorithm.PSS
    ef: int = 40
    L: int = 400
    max_K: int | None = None  # None: N
    max_seconds: float = 60.0
    max_expansions: int = DEFAULT_MAX_EXPANSIONS

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.ef < 1:
            raise InputError("ef must be >= 1")
        if self.L < 1:
            raise InputError("L must be >= 1")


@numba.njit(cache=True)
def _greedy_positions(kind, data, ids, eps, k):
    chosen = np.empty(k, dtype=np.int64)
    m = 0
    for p in range(ids.shape[0]):
        if m >= k:
            break
        u = ids[p]
        ok = True
        for t in range(m):
            if _sim(kind, data[u], data[ids[chosen[t]]]) >= eps:
                ok = False
                break
        if ok:
            chosen[m] = p
            m += 1
    return chosen[:m]


def greedy_select(dataset: Dataset, candidates, epsilon: float, k: int) -> list:
    """Scan candidates best first, keeping each one diverse from all kept so far."""
    if not candidates:
        return []
    ids = np.array([c.id for c in candidates], dtype=np.int64)
    pos = _greedy_positions(dataset.kind, dataset.data, ids, float(epsilon), k)
    return [candidates[p] for p in pos]


class _Budget:
    def __init__(self, config: AlgoConfig, n: int):
        self.max_K = n if config.max_K is None else min(int(config.max_K), n)
        self.deadline = time.perf_counter() + config.max_seconds
        self.max_expansions = config.max_expansions

    def check(self, K: int, partial, diagnostics: dict):
        if K > self.max_K:
            raise ResourceError(f"candidate budget exceeded (K={K} > {self.max_K})", partial, diagnostics)
        if time.perf_counter() > self.deadline:
            raise ResourceError("wall-time budget exceeded", partial, diagnostics)


def _source(index, dataset, query, source):
    if source is not None:
        return source
    if index is None:
        raise InputError("either an index or a candidate source is required")
    return SearchState(index, dataset, query.q)


def _stats(state, **extra) -> dict:
    out = {"distance_evals": int(state.distance_evals), "hops": int(state.hops)}
    out.update(extra)
    return out


def greedy_baseline(index: ProximityIndex, dataset: Dataset, query: Query, L: int = 400,
                    config: AlgoConfig | None = None) -> object:
    if L < query.k:
        raise InputError(f"greedy baseline needs L >= k (L={L}, k={query.k})")
    hits = beam_search(index, dataset, query.q, min(L, dataset.n), L)
    chosen = greedy_select(dataset, list(hits), query.epsilon, query.k)
    return make_result(
        chosen, query, algorithm="GREEDY", final_K=len(hits), iterations=1,
        stats={"distance_evals": hits.distance_evals, "hops": hits.hops},
    )


def _pgs_loop(state, dataset: Dataset, query: Query, ef: int, budget: _Budget):
    """Shared by PGS and the seeding phase of PSS.  Returns (R, K, iterations)."""
    k = query.k
    K = k
    it = 0
    while True:
        it += 1
        p = state.advance(min(K * ef, state.n))
        R = greedy_select(dataset, state.top(K), query.epsilon, k)
        if len(R) == k:
            return R, K, it
        if state.exhausted and K >= p:
            return R, p, it
        prev, K = K, K + k
        if state.exhausted:
            K = min(K, p)
        budget.check(K, make_result(R, query, algorithm="PGS", final_K=prev, iterations=it),
                     {"final_K": prev})


def pgs(index, dataset: Dataset, query: Query, ef: int = 40, config: AlgoConfig | None = None,
        source=None):
    config = config or AlgoConfig(Algorithm.PGS, ef=ef)
    state = _source(index, dataset, query, source)
    R, K, it = _pgs_loop(state, dataset, query, ef, _Budget(config, dataset.n))
    return make_result(R, query, algorithm="PGS", final_K=K, iterations=it, stats=_stats(state))


def pgs_star(index, dataset: Dataset, query: Query, ef: int = 40, config: AlgoConfig | None = None,
             source=None):
    """PGS that hands back its candidate state and K instead of a result."""
    config = config or AlgoConfig(Algorithm.PGS, ef=ef)
    state = _source(index, dataset, query, source)
    R, K, it = _pgs_loop(state, dataset, query, ef, _Budget(config, dataset.n))
    return state, K, R, it


def _finish_astar(graph, query, algorithm, K, it, state, extra, max_expansions):
    per = div_astar(graph, query.k, max_expansions=max_expansions)
    size = per.largest_feasible
    items = per.best(size) if size else ()
    stats = _stats(state, astar_expansions=per.stats["expansions"], graph_nodes=len(graph),
                   graph_density=graph.density, **extra)
    return make_result(items, query, algorithm=algorithm, final_K=K, iterations=it, stats=stats), per


def pds(index, dataset: Dataset, query: Query, ef: int = 40, config: AlgoConfig | None = None,
        source=None):
    config = config or AlgoConfig(Algorithm.PDS, ef=ef)
    budget = _Budget(config, dataset.n)
    state = _source(index, dataset, query, source)
    k = query.k
    graph = dg.DiversityGraph(dataset, query.epsilon)
    K = k
    it = 0
    while True:
        it += 1
        p = state.advance(min(K * ef, state.n))
        dg.grow_to(graph, state.top(K))
        estimate = dg.degree_based_K(graph, k)
        new_K = min(max(K, estimate), state.n)
        if new_K == K or (state.exhausted and p <= K):
            break
        if new_K > budget.max_K or time.perf_counter() > budget.deadline:
            partial = None
            try:
                partial, _ = _finish_astar(graph, query, "PDS", K, it, state, {}, config.max_expansions)
            except ResourceError:
                pass
            budget.check(new_K, partial, {"final_K": K, "estimated_K": estimate,
                                           "graph_density": graph.density})
        K = new_K
    result, _ = _finish_astar(graph, query, "PDS", min(K, len(graph)), it, state,
                              {"estimated_K": estimate}, config.max_expansions)
    return result


def pss(index, dataset: Dataset, query: Query, ef: int = 40, config: AlgoConfig | None = None,
        source=None):
    config = config or AlgoConfig(Algorithm.PSS, ef=ef)
    budget = _Budget(config, dataset.n)
    state = _source(index, dataset, query, source)
    k = query.k
    R, K, it = _pgs_loop(state, dataset, query, ef, budget)
    if len(R) < k:
        return make_result(R, query, algorithm="PSS", final_K=K, iterations=it,
                           stats=_stats(state, exit="infeasible"))
    graph = dg.DiversityGraph(dataset, query.epsilon)
    threshold = -math.inf
    first = True
    expansions = 0
    rounds = 0
    while True:
        rounds += 1
        if not first:
            K, _ = progressive_beam_search_until(state, threshold, ef, K)
        first = False
        dg.grow_to(graph, state.top(K))
        per = div_astar(graph, k, max_expansions=config.max_expansions)
        expansions += per.stats["expansions"]
        mv = min_value(per, k)
        if mv is None:
            mv = -math.inf
        K_eff = min(K, len(graph))
        if mv > state.score_at(K_eff):
            exit_reason = "score-gap"
            break
        if state.exhausted and K_eff >= state.prefix_len:
            exit_reason = "exhausted"
            break
        if time.perf_counter() > budget.deadline or K_eff >= budget.max_K:
            size = per.largest_feasible
            partial = make_result(per.best(size) if size else (), query, algorithm="PSS", final_K=K_eff,
                                  iterations=it + rounds)
            if K_eff >= budget.max_K and budget.max_K >= state.n:
                exit_reason = "exhausted"
                break
            raise ResourceError("PSS budget exceeded", partial, {"final_K": K_eff})
        threshold = mv
    size = per.largest_feasible
    items = per.best(size) if size else ()
    return make_result(
        items, query, algorithm="PSS", final_K=K_eff, iterations=it + rounds,
        stats=_stats(state, exit=exit_reason, min_value=mv, astar_expansions=expansions,
                     graph_nodes=len(graph)),
    )


def run_query(algorithm, index, dataset: Dataset, query: Query, config: AlgoConfig | None = None,
              source=None):
    algorithm = Algorithm.parse(algorithm)
    config = config or AlgoConfig(algorithm)
    if algorithm is Algorithm.GREEDY:
        return greedy_baseline(index, dataset, query, L=config.L, config=config)
    fn = {Algorithm.PGS: pgs, Algorithm.PDS: pds, Algorithm.PSS: pss}[algorithm]
    return fn(index, dataset, query, ef=config.ef, config=config, source=source)

