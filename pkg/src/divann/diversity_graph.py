"""Conflict graph over a score-ordered candidate prefix.

Two candidates conflict (share an edge) when their mutual similarity is at
least epsilon, so the independent sets of the graph are exactly the diverse
sets of the prefix.  Nodes are addressed by *position* in the prefix
(position 0 = highest score); dataset ids are kept alongside.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InputError
from .vectors import Dataset, ScoredId, sort_key


class DiversityGraph:
    def __init__(self, dataset: Dataset, epsilon: float):
        self.dataset = dataset
        self.epsilon = float(epsilon)
        self.metric = dataset.metric
        self.nodes: list[ScoredId] = []
        self._adj: list[list[int]] = []  # positions, ascending
        self._masks: list[int] | None = []

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> list:
        return [n.id for n in self.nodes]

    @property
    def scores(self) -> np.ndarray:
        return np.array([n.score for n in self.nodes], dtype=np.float64)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return int(self.degrees.sum()) // 2

    @property
    def density(self) -> float:
        n = len(self.nodes)
        return 0.0 if n < 2 else 2.0 * self.edge_count / (n * (n - 1))

    def neighbors(self, pos: int) -> list:
        return self._adj[pos]

    @property
    def adjacency(self) -> dict:
        """Dataset id -> neighbouring dataset ids, sorted ascending."""
        ids = self.ids
        return {ids[p]: sorted(ids[j] for j in nb) for p, nb in enumerate(self._adj)}

    def masks(self) -> list:
        """Adjacency of each position as an int bitmask over positions."""
        if self._masks is None or len(self._masks) != len(self.nodes):
            masks = []
            for nb in self._adj:
                m = 0
                for j in nb:
                    m |= 1 << j
                masks.append(m)
            self._masks = masks
        return self._masks

    def extend(self, new_candidates) -> "DiversityGraph":
        """Append lower-scored candidates, testing only pairs that involve them."""
        new = [ScoredId(int(c[0]), float(c[1])) for c in new_candidates]
        if not new:
            return self
        keys = [sort_key(c) for c in new]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise InputError("new candidates must be strictly ordered by (score desc, id asc)")
        if self.nodes and not sort_key(self.nodes[-1]) < keys[0]:
            raise InputError("new candidates must rank after every existing node")
        seen = set(self.ids)
        if any(c.id in seen for c in new) or len({c.id for c in new}) != len(new):
            raise InputError("duplicate candidate ids")
        old_n = len(self.nodes)
        new_ids = [c.id for c in new]
        eps = self.epsilon
        if old_n:
            cross = self.dataset.similarity_block(new_ids, self.ids) >= eps
        inner = self.dataset.similarity_matrix(new_ids) >= eps
        np.fill_diagonal(inner, False)
        for j in range(len(new)):
            pos = old_n + j
            nb = np.flatnonzero(cross[j]).tolist() if old_n else []
            for p in nb:
                self._adj[p].append(pos)
            nb_inner = (np.flatnonzero(inner[j, :j]) + old_n).tolist()
            for p in nb_inner:
                self._adj[p].append(pos)
            self._adj.append(nb + nb_inner)
        self.nodes.extend(new)
        self._masks = None
        return self

    def same_structure(self, other: "DiversityGraph") -> bool:
        return (
            self.ids == other.ids
            and [n.score for n in self.nodes] == [n.score for n in other.nodes]
            and self._adj == other._adj
            and self.epsilon == other.epsilon
        )

    def check(self) -> None:
        n = len(self.nodes)
        keys = [sort_key(c) for c in self.nodes]
        assert all(a < b for a, b in zip(keys, keys[1:])), "node order violated"
        for p, nb in enumerate(self._adj):
            assert nb == sorted(set(nb)) and p not in nb
            for j in nb:
                assert 0 <= j < n and p in self._adj[j], "asymmetric adjacency"

    def dump_jsonl(self, path) -> None:
        adj = self.adjacency
        with open(path, "w", encoding="utf-8") as fh:
            for node in self.nodes:
                fh.write(json.dumps({"id": node.id, "score": node.score, "neighbors": adj[node.id]}))
                fh.write("\n")


def build(candidates, dataset: Dataset, epsilon: float) -> DiversityGraph:
    return DiversityGraph(dataset, epsilon).extend(candidates)


def extend(graph: DiversityGraph, new_candidates, dataset: Dataset | None = None) -> DiversityGraph:
    if dataset is not None and dataset is not graph.dataset:
        raise InputError("graph was built over a different dataset")
    return graph.extend(new_candidates)


def grow_to(graph: DiversityGraph, candidates) -> DiversityGraph:
    """Extend ``graph`` so it covers exactly the prefix ``candidates`` (which
    must start with the graph's current nodes)."""
    have = len(graph)
    if have > len(candidates):
        raise InputError("graph already larger than the requested prefix")
    return graph.extend(candidates[have:])


def degree_based_K(graph: DiversityGraph, k: int) -> int:
    """Candidate count that certifies the prefix holds the optimal diverse set.

    Sum of (degree + 1) over the ``k - 1`` highest-degree nodes, plus one.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if len(graph) < k - 1:
        return k
    deg = graph.degrees
    order = np.lexsort((np.array(graph.ids), -deg))[: k - 1]
    return int(np.sum(deg[order] + 1)) + 1
