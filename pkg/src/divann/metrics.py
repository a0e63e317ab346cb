"""Quality metrics, the recall lower bound, and epsilon calibration."""

from __future__ import annotations

import numpy as np

from .dataio import GroundTruth
from .errors import InputError
from .vectors import Dataset, DiverseResult


def compute_recall(result: DiverseResult, truth: GroundTruth, k: int | None = None) -> float:
    """|result ∩ truth| / |truth| by id; an empty truth scores 1 only against an empty result."""
    k = result.k if k is None else k
    if truth.k != k or result.k != k:
        raise InputError(f"k mismatch: result k={result.k}, truth k={truth.k}, requested {k}")
    if not np.isclose(truth.epsilon, result.epsilon, rtol=0, atol=0):
        raise InputError(f"epsilon mismatch: result {result.epsilon!r}, truth {truth.epsilon!r}")
    truth_ids = set(truth.ids)
    if not truth_ids:
        return 1.0 if not result.items else 0.0
    tp = len(truth_ids.intersection(result.ids))
    fn = len(truth_ids) - tp
    return tp / (tp + fn)


def compute_score(result: DiverseResult, pad_to_k: bool = True) -> float:
    """Total similarity of the result.

    With ``pad_to_k`` a short result is scored as if its missing entries had
    similarity 0, which leaves the sum unchanged; the flag exists so callers
    state which convention they report.
    """
    missing = max(0, result.k - len(result.items)) if pad_to_k else 0
    return result.total_score + 0.0 * missing


def recall_lower_bound(K: int, k: int, lam: float) -> float:
    """``(1 - K*lam / (K - k + 1)) ** k`` clamped to [0, 1].

    Lower bound on diverse recall when the underlying nearest-neighbour search
    misses a fraction ``lam`` of the first K candidates.
    """
    if not 0.0 <= lam <= 1.0:
        raise InputError("lambda must lie in [0, 1]")
    if not K >= k >= 1:
        raise InputError("need K >= k >= 1")
    base = 1.0 - K * lam / (K - k + 1)
    if base <= 0.0:
        return 0.0
    return min(1.0, base**k)


def sample_pair_similarities(dataset: Dataset, sample_points: int = 1000, seed: int = 0) -> np.ndarray:
    """All pairwise similarities among a random sample of points, sorted ascending."""
    rng = np.random.default_rng(seed)
    m = min(sample_points, dataset.n)
    ids = np.sort(rng.choice(dataset.n, size=m, replace=False))
    sims = dataset.similarity_matrix(ids)
    iu = np.triu_indices(m, 1)
    return np.sort(sims[iu])


def mean_degree(dataset: Dataset, epsilon: float, sample_points: int = 1000, seed: int = 0,
                _sorted=None) -> float:
    """Estimated mean degree of the conflict graph over the full dataset at ``epsilon``."""
    sims = sample_pair_similarities(dataset, sample_points, seed) if _sorted is None else _sorted
    if sims.size == 0:
        return 0.0
    frac = (sims.size - np.searchsorted(sims, epsilon, side="left")) / sims.size
    return float(frac * (dataset.n - 1))


def calibrate_epsilon(dataset: Dataset, phi: float, sample_points: int = 1000, seed: int = 0,
                      iterations: int = 100) -> float:
    """Threshold whose estimated mean conflict degree is ``phi``.

    Bisection on the (monotone) sampled degree curve.
    """
    if phi < 0:
        raise InputError("phi must be >= 0")
    sims = sample_pair_similarities(dataset, sample_points, seed)
    if sims.size == 0:
        raise InputError("need at least two points to calibrate epsilon")
    lo, hi = float(sims[0]), float(np.nextafter(sims[-1], np.inf))
    # degree(lo) is the maximum (N-1), degree(hi) is 0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mean_degree(dataset, mid, _sorted=sims) > phi:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    return hi
