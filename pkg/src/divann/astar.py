"""Exact best independent set of every size 1..k on a diversity graph.

Tree search over partial solutions.  A tree node holds the chosen positions
(ascending), their total score, and the union of their conflicts; its
children add one further non-conflicting position.  Open nodes are expanded
best first by their optimistic total for size k.

Optimistic total for size ``i`` at a node with ``c`` chosen items: the
current score plus the ``i - c`` highest scores among positions after the
last chosen one that do not conflict with the *earlier* chosen items
(conflicts with the last item and among the remaining positions are
ignored).  That never underestimates what the subtree can reach, and it
works for negative scores because positions are score ordered: the highest
remaining scores are simply the first available bits.

Children are generated lazily: popping an entry (parent, j) materializes the
child "parent + j" and pushes the next sibling.  Siblings share the parent's
conflict mask, so a later sibling's estimate can only be lower than its
predecessor's; once a sibling fails the pruning test the rest are skipped.

A node is discarded only when, for *every* size it could still produce, its
optimistic total falls below the best total already found for that size;
pruning on size k alone would lose smaller-size optima.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .diversity_graph import DiversityGraph
from .errors import InputError, ResourceError
from .vectors import ScoredId

NEG_INF = -math.inf
DEFAULT_MAX_EXPANSIONS = 10_000_000


@dataclass
class PerSizeBest:
    """``sets[i]`` / ``scores[i]`` hold the best set of size ``i`` (index 0 unused)."""

    k: int
    sets: list
    scores: list
    stats: dict = field(default_factory=dict)

    def feasible(self, i: int) -> bool:
        return self.sets[i] is not None

    @property
    def largest_feasible(self) -> int:
        best = 0
        for i in range(1, self.k + 1):
            if self.feasible(i):
                best = i
        return best

    def best(self, i: int) -> tuple:
        return self.sets[i]


def _lowest_bits(mask: int, count: int) -> list:
    out = []
    while mask and len(out) < count:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _ids_key(positions, ids):
    return tuple(sorted(ids[p] for p in positions))


def _optimistic(scores, total, c, avail, last, k):
    """Optimistic totals for sizes c..k of a node with ``c`` chosen items whose
    last chosen position is ``last`` and whose still-compatible positions are ``avail``."""
    out = [NEG_INF] * (k + 1)
    out[c] = total
    run = total
    for t, b in enumerate(_lowest_bits(avail >> (last + 1), k - c)):
        run += scores[last + 1 + b]
        out[c + 1 + t] = run
    return out


def node_bounds(graph: DiversityGraph, chosen, k: int) -> list:
    """Optimistic totals, indexed by size, for the tree node that has picked
    the ascending ``chosen`` positions, exactly as the search computes them;
    ``-inf`` where no completion exists."""
    scores = [node.score for node in graph.nodes]
    masks = graph.masks()
    avail = (1 << len(graph)) - 1
    total = 0.0
    for p in chosen[:-1]:
        avail &= ~masks[p] & ~(1 << p)
    for p in chosen:
        total += scores[p]
    last = chosen[-1] if chosen else -1
    return _optimistic(scores, total, len(chosen), avail, last, k)


def div_astar(graph: DiversityGraph, k: int, prune: bool = True,
              max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> PerSizeBest:
    if k < 1:
        raise InputError("k must be >= 1")
    n = len(graph)
    scores = [node.score for node in graph.nodes]
    ids = graph.ids
    masks = graph.masks()
    full = (1 << n) - 1

    best_score = [NEG_INF] * (k + 1)
    best_set: list = [None] * (k + 1)

    def offer(positions, total):
        c = len(positions)
        if total > best_score[c] or (
            total == best_score[c] and _ids_key(positions, ids) < _ids_key(best_set[c], ids)
        ):
            best_score[c] = total
            best_set[c] = positions

    def estimates(total, c, avail, after):
        """Optimistic totals for sizes c+1..k of the child that adds position
        ``after`` to a node with ``c`` chosen items and mask ``avail``.
        Positions after ``after`` conflicting with it stay counted, which
        only loosens the bound."""
        return _optimistic(scores, total + scores[after], c + 1, avail, after, k)

    def alive(est, c_child):
        if not prune:
            return True
        # the child's own set (size c_child) is always offered when it is materialized
        for i in range(c_child, k + 1):
            if est[i] != NEG_INF and est[i] >= best_score[i]:
                return True
        return False

    def push_child(heap, parent, j, counter):
        chosen, total, avail = parent
        c = len(chosen)
        if c >= k:
            return
        est = estimates(total, c, avail, j)
        if not alive(est, c + 1):
            return
        # frontier order: optimistic total for size k, then deeper first, then positions
        heapq.heappush(heap, (-est[k], -(c + 1), chosen + (j,), counter[0], parent, j))
        counter[0] += 1

    root = ((), 0.0, full)
    heap: list = []
    counter = [0]
    expansions = 0
    pruned_siblings = 0
    first = _lowest_bits(full, 1)
    if first:
        push_child(heap, root, first[0], counter)
    while heap:
        _, _, _, _, parent, j = heapq.heappop(heap)
        chosen, total, avail = parent
        expansions += 1
        if expansions > max_expansions:
            raise ResourceError(
                f"div-A* exceeded {max_expansions} expansions",
                partial=PerSizeBest(k, list(best_set), list(best_score)),
                diagnostics={"graph_nodes": n, "density": graph.density},
            )
        # next sibling: next available position after j in the parent's mask
        sib = _lowest_bits(avail >> (j + 1), 1)
        if sib:
            before = counter[0]
            push_child(heap, parent, j + 1 + sib[0], counter)
            if counter[0] == before:
                pruned_siblings += 1
        # materialize the child
        child_chosen = chosen + (j,)
        child_total = total + scores[j]
        child_avail = avail & ~masks[j] & ~(1 << j)
        offer(child_chosen, child_total)
        if len(child_chosen) < k:
            nxt = _lowest_bits(child_avail >> (j + 1), 1)
            if nxt:
                push_child(heap, (child_chosen, child_total, child_avail), j + 1 + nxt[0], counter)

    sets: list = [None] * (k + 1)
    out_scores: list = [NEG_INF] * (k + 1)
    for i in range(1, k + 1):
        if best_set[i] is not None:
            sets[i] = tuple(ScoredId(ids[p], scores[p]) for p in best_set[i])
            out_scores[i] = math.fsum(scores[p] for p in best_set[i])
    return PerSizeBest(
        k, sets, out_scores,
        stats={"expansions": expansions, "pushed": counter[0], "pruned_siblings": pruned_siblings},
    )


def min_value(per_size: PerSizeBest, k: int):
    """Smallest average gain per extra item from any smaller optimum up to size k.

    ``min over 0 < i < k of (S_k - S_i) / (k - i)``; ``+inf`` for ``k == 1``.
    Returns ``None`` when some size up to ``k`` is infeasible, in which case
    the stopping test does not apply.
    """
    if any(not per_size.feasible(i) for i in range(1, k + 1)):
        return None
    s = per_size.scores
    return min(((s[k] - s[i]) / (k - i) for i in range(1, k)), default=math.inf)
