"""Hand-built instances with a prescribed score list and conflict graph.

Node i gets the vector [s_i, a*e(edge) for each incident edge] under the
inner product, so with the query [1, 0, ...] its score is s_i and two nodes
have similarity s_i*s_j + a^2 when they share an edge, s_i*s_j otherwise.
With ``a^2`` far above every |s_i*s_j| the threshold a^2/2 reproduces the
edge set exactly.
"""

import numpy as np

from divann.vectors import Dataset, Metric, Query


def graph_instance(scores, edges, k):
    """(dataset, query) realizing ``scores`` (node order = id order) and the
    0-based ``edges`` as its conflict graph."""
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
    big = float(max(1.0, np.max(np.abs(scores))) ** 2 * 100.0)
    a = np.sqrt(big)
    vectors = np.zeros((n, 1 + len(edges)))
    vectors[:, 0] = scores
    for col, (u, v) in enumerate(edges, start=1):
        vectors[u, col] = a
        vectors[v, col] = a
    q = np.zeros(vectors.shape[1])
    q[0] = 1.0
    dataset = Dataset(vectors, Metric.INNER_PRODUCT)
    return dataset, Query(q, k, big / 2.0)


def one_based(edges):
    return [(u - 1, v - 1) for u, v in edges]


# greedy picks v1, v2, v6 (18) while v3, v4, v5 are optimal (20)
GREEDY_TRAP_SCORES = [9.5, 7.5, 7.25, 6.5, 6.25, 1.0, 0.5]
GREEDY_TRAP_EDGES = one_based([(1, 3), (1, 4), (2, 4), (2, 5)])

# R_2 = {v1, v2} with S_2 = 17, R_3 = {v3, v4, v5} with S_3 = 20, s_6 < 3,
# and {v1, v2, v7} is the best size-3 set reaching past the sixth node
SCORE_GAP_SCORES = [9.0, 8.0, 7.5, 6.5, 6.0, 2.5, 2.0, 1.0]
SCORE_GAP_EDGES = one_based([(1, 3), (1, 4), (1, 6), (2, 3), (2, 5), (2, 6), (1, 8), (2, 8)])

# three 3-cliques; k = 3 needs the seventh node
CLIQUES_SCORES = [9.0, 8.5, 8.0, 7.0, 6.5, 6.0, 5.0, 4.5, 4.0]
CLIQUES_EDGES = one_based([(1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6), (7, 8), (7, 9), (8, 9)])

# tied scores around the stopping threshold: over the first ten nodes
# S_2 = 18 and S_3 = 25, the score-gap test needs eleven candidates while the
# degree bound settles at six, and the optimum lies within the first six
TIED_GAP_SCORES = [10.0, 8.0, 7.5, 7.5, 7.5, 7.0, 7.0, 7.0, 7.0, 7.0, 6.0, 5.0]
TIED_GAP_EDGES = one_based([(1, 5), (2, 3), (2, 4), (3, 9), (3, 11), (7, 8)])
