"""Approximate diverse k-nearest-neighbour search.

Finds a size-k set of vectors with maximum total similarity to a query such
that every pair in the set has similarity below a threshold epsilon.  The
search runs over an HNSW-style proximity graph with a resumable progressive
beam search; candidate prefixes are diversified greedily or exactly with an
A* tree search over their conflict graph.
"""

from .astar import PerSizeBest, div_astar, min_value
from .dataio import GroundTruth, SyntheticSpec, generate, load_fvecs, load_ivecs, write_fvecs, write_ivecs
from .diversity_graph import DiversityGraph, degree_based_K
from .errors import DivannError, FormatError, InputError, MissingGroundTruthError, ResourceError
from .hnsw import ProximityIndex, beam_search, build_index, load_index, save_index
from .metrics import calibrate_epsilon, compute_recall, compute_score, recall_lower_bound
from .oracle import exact_knn, exact_optimal_diverse
from .progressive import ExactOrderState, SearchState, progressive_beam_search, progressive_beam_search_until
from .search import AlgoConfig, Algorithm, greedy_baseline, pds, pgs, pss, run_query
from .vectors import Dataset, DiverseResult, Metric, Query, ScoredId, is_diverse_pair, similarity

__version__ = "0.1.0"
