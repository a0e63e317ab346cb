import itertools
import math

import numpy as np
import pytest

from divann import diversity_graph as dg
from divann.astar import div_astar, min_value, node_bounds
from divann.errors import ResourceError
from divann.oracle import exact_knn, exhaustive_best_sets
from instances import (
    SCORE_GAP_EDGES, SCORE_GAP_SCORES, TIED_GAP_EDGES, TIED_GAP_SCORES, graph_instance,
)


def graph_of(scores, edges, k, K=None):
    ds, query = graph_instance(scores, edges, k)
    K = ds.n if K is None else K
    return dg.build(exact_knn(ds, query.q, K), ds, query.epsilon)


def random_graph(rng, n, density):
    scores = rng.uniform(-1, 1, size=n)
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    return scores, edges


def exhaustive(graph, k):
    nb = [set(graph.neighbors(p)) for p in range(len(graph))]
    return exhaustive_best_sets(list(graph.scores), lambda a, b: b in nb[a], k, graph.ids)


def assert_matches_exhaustive(graph, k, per):
    sets, totals = exhaustive(graph, k)
    for i in range(1, k + 1):
        if sets[i] is None:
            assert not per.feasible(i)
            continue
        assert per.feasible(i)
        assert sorted(x.id for x in per.best(i)) == sorted(graph.ids[p] for p in sets[i])
        assert per.scores[i] == pytest.approx(totals[i], abs=1e-9)


class TestDivAStar:
    def test_edgeless_gives_prefix_sums(self):
        g = graph_of([5.0, 4.0, 3.0, 2.0, 1.0], [], 4)
        per = div_astar(g, 4)
        for i in range(1, 5):
            assert [x.id for x in per.best(i)] == list(range(i))
            assert per.scores[i] == sum([5.0, 4.0, 3.0, 2.0][:i])

    def test_clique(self):
        n = 5
        g = graph_of([5.0, 4.0, 3.0, 2.0, 1.0], itertools.combinations(range(n), 2), 3)
        per = div_astar(g, 3)
        assert [x.id for x in per.best(1)] == [0]
        assert not per.feasible(2) and not per.feasible(3)
        assert per.largest_feasible == 1

    def test_score_gap_figure(self):
        g = graph_of(SCORE_GAP_SCORES, SCORE_GAP_EDGES, 3, K=6)
        per = div_astar(g, 3)
        assert sorted(x.id for x in per.best(2)) == [0, 1] and per.scores[2] == 17.0
        assert sorted(x.id for x in per.best(3)) == [2, 3, 4] and per.scores[3] == 20.0
        assert_matches_exhaustive(g, 3, per)
        mv = min_value(per, 3)
        assert mv <= 3.0
        assert mv == 3.0  # the S_1 = 9 term gives 5.5
        assert SCORE_GAP_SCORES[5] < mv

    def test_tied_gap_figure(self):
        g = graph_of(TIED_GAP_SCORES, TIED_GAP_EDGES, 3, K=10)
        per = div_astar(g, 3)
        assert per.scores[2] == 18.0 and per.scores[3] == 25.0
        assert per.scores[3] - per.scores[2] == 7.0
        assert_matches_exhaustive(g, 3, per)

    @pytest.mark.parametrize("density", [0.1, 0.3, 0.7])
    def test_random_graphs_match_exhaustive(self, density):
        rng = np.random.default_rng(int(density * 100))
        for _ in range(70):
            n = int(rng.integers(1, 15))
            k = int(rng.integers(1, 6))
            g = graph_of(*random_graph(rng, n, density), k)
            assert_matches_exhaustive(g, k, div_astar(g, k))

    def test_pruning_does_not_change_results(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(2, 13))
            k = int(rng.integers(1, 6))
            g = graph_of(*random_graph(rng, n, rng.choice([0.1, 0.3, 0.7])), k)
            a, b = div_astar(g, k), div_astar(g, k, prune=False)
            assert a.sets == b.sets and a.scores == b.scores
            assert a.stats["expansions"] <= b.stats["expansions"]

    def test_bounds_are_admissible(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            n = int(rng.integers(2, 10))
            k = int(rng.integers(1, 5))
            g = graph_of(*random_graph(rng, n, 0.3), k)
            nb = [set(g.neighbors(p)) for p in range(n)]
            scores = list(g.scores)
            for c in range(1, k + 1):
                for chosen in itertools.combinations(range(n), c):
                    if any(b in nb[a] for a, b in itertools.combinations(chosen, 2)):
                        continue
                    bound = node_bounds(g, chosen, k)
                    rest = [p for p in range(chosen[-1] + 1, n) if not any(p in nb[a] for a in chosen)]
                    for extra in range(0, k - c + 1):
                        best = -math.inf
                        for add in itertools.combinations(rest, extra):
                            if any(b in nb[a] for a, b in itertools.combinations(add, 2)):
                                continue
                            best = max(best, sum(scores[p] for p in chosen + add))
                        if best > -math.inf:
                            assert bound[c + extra] >= best - 1e-12

    def test_ties_go_to_smallest_id_tuple(self):
        g = graph_of([3.0, 2.0, 2.0, 1.0], [(0, 1), (0, 2)], 2)
        per = div_astar(g, 2)
        assert sorted(x.id for x in per.best(2)) == [0, 3]
        g = graph_of([3.0, 2.0, 2.0, 2.0], [(0, 1), (0, 2), (0, 3)], 2)
        assert sorted(x.id for x in div_astar(g, 2).best(2)) == [1, 2]

    def test_negative_scores(self):
        g = graph_of([-0.1, -0.2, -0.3, -5.0], [(0, 1)], 3)
        per = div_astar(g, 3)
        assert sorted(x.id for x in per.best(3)) == [0, 2, 3]
        assert per.scores[3] == pytest.approx(-5.4)

    def test_expansion_budget(self):
        rng = np.random.default_rng(2)
        g = graph_of(*random_graph(rng, 14, 0.3), 5)
        with pytest.raises(ResourceError) as err:
            div_astar(g, 5, max_expansions=3)
        assert err.value.partial is not None


class TestMinValue:
    def test_equal_spacing(self):
        g = graph_of([3.0, 3.0, 3.0, 3.0], [], 4)
        assert min_value(div_astar(g, 4), 4) == 3.0

    def test_single_item(self):
        g = graph_of([1.0, 0.5], [], 1)
        assert min_value(div_astar(g, 1), 1) == math.inf

    def test_infeasible_size_is_not_applicable(self):
        g = graph_of([2.0, 1.0], [(0, 1)], 2)
        assert min_value(div_astar(g, 2), 2) is None

    def test_slope_to_previous_size(self):
        g = graph_of(TIED_GAP_SCORES, TIED_GAP_EDGES, 3, K=10)
        per = div_astar(g, 3)
        # i = 2 term is 25 - 18 = 7, i = 1 term is (25 - 10) / 2
        assert min_value(per, 3) == 7.0
