"""
Distances between empirical distributions.

Samples carry uniform mass 1/N. The Prokhorov distance between two samples
of equal size is computed exactly through bipartite matching: rho <= eps iff
the graph with edges {d_ij <= eps} has a matching that leaves at most
floor(N * eps) points unmatched. The bounded-Lipschitz distance is the optimum
of a finite linear program over test-function values at the sample points.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, sparse, stats
from scipy.spatial.distance import cdist

from .errors import (
    EdgeMismatchError,
    MetricCompatibilityError,
    NonFiniteDistanceError,
    SampleSizeError,
    ToleranceError,
)
from .matching import UNMATCHED, maximum_matching
from .trajectory_observables import Histogram, PathPL, resample

logger = logging.getLogger(__name__)

EUCLIDEAN = "euclidean"
SUP = "sup"
METRIC_TAGS = (EUCLIDEAN, SUP)

# absorbs rounding in N * eps at candidates eps = m / N
COUNT_SLACK = 1e-9
BL_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    """
    N points with uniform weight; feature vectors (euclidean) or paths (sup).

    Use from_features or from_paths rather than the constructor.
    """
    points: Any
    metric_tag: str

    def __post_init__(self):
        if self.metric_tag not in METRIC_TAGS:
            raise ValueError(f"metric_tag must be one of {METRIC_TAGS}, got '{self.metric_tag}'")
        if self.size < 1:
            raise ValueError("A sample needs at least one point")

    @classmethod
    def from_features(cls, features: np.ndarray) -> "EmpiricalSample":
        array = np.array(features, dtype=float)
        if array.ndim == 1:
            array = array[:, None]
        if not np.all(np.isfinite(array)):
            raise NonFiniteDistanceError("Feature vectors must be finite")
        array.setflags(write=False)
        return cls(array, EUCLIDEAN)

    @classmethod
    def from_paths(cls, paths: Sequence[PathPL]) -> "EmpiricalSample":
        return cls(tuple(paths), SUP)

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """d[i, j] = metric(a_i, b_j)."""
    d: np.ndarray
    metric_tag: str = EUCLIDEAN

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or 0 in d.shape:
            raise ValueError(f"Distance matrix must be a non-empty 2-D array, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise NonFiniteDistanceError("Distance matrix contains non-finite entries")
        if np.any(d < 0):
            raise ValueError("Distance matrix contains negative entries")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.d.shape


@dataclass
class MetricResult:
    """Value of a distance plus whatever certifies it."""
    metric: str
    value: float
    epsilon: Optional[float] = None
    matching_pairs: List[Tuple[int, int]] = field(default_factory=list)
    unmatched: List[int] = field(default_factory=list)
    test_function: Optional[np.ndarray] = None
    duality_gap: float = 0.0
    lower_bound: bool = False

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "metric": self.metric,
            "value": self.value,
            "epsilon": self.epsilon,
            "matching_pairs": [[int(i), int(j)] for i, j in self.matching_pairs],
            "unmatched": [int(i) for i in self.unmatched],
        }
        if self.test_function is not None:
            record["test_function"] = [float(g) for g in self.test_function]
            record["duality_gap"] = self.duality_gap
            record["lower_bound"] = self.lower_bound
        return record


def _paths_on_common_grid(paths: Sequence[PathPL], dt: float) -> np.ndarray:
    return np.stack([resample(p, dt).values for p in paths])


def pairwise_distances(a: EmpiricalSample, b: EmpiricalSample) -> DistanceMatrix:
    """
    All cross distances between two samples.

    Paths are refined to the finest grid present before the node-wise sup
    norm is taken, which is exact for piecewise-linear paths.

    Raises:
        MetricCompatibilityError: If the samples use different metrics
        NonFiniteDistanceError: If a distance is not finite
    """
    if a.metric_tag != b.metric_tag:
        raise MetricCompatibilityError(f"Cannot compare '{a.metric_tag}' and '{b.metric_tag}' samples")

    if a.metric_tag == EUCLIDEAN:
        if a.points.shape[1] != b.points.shape[1]:
            raise MetricCompatibilityError(
                f"Feature dimensions differ: {a.points.shape[1]} vs {b.points.shape[1]}"
            )
        d = cdist(a.points, b.points, metric="euclidean")
    else:
        dt = min(p.dt_grid for p in list(a.points) + list(b.points))
        left = _paths_on_common_grid(a.points, dt)
        right = _paths_on_common_grid(b.points, dt)
        if left.shape[1:] != right.shape[1:]:
            raise MetricCompatibilityError(f"Path grids differ: {left.shape[1:]} vs {right.shape[1:]}")
        d = np.empty((a.size, b.size))
        for i in range(a.size):
            diff = right - left[i]
            d[i] = np.max(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)

    if not np.all(np.isfinite(d)):
        raise NonFiniteDistanceError("Non-finite distance between sample points")
    return DistanceMatrix(d, a.metric_tag)


def _feasible(d: np.ndarray, eps: float) -> Tuple[bool, np.ndarray]:
    n = d.shape[0]
    match = maximum_matching(d <= eps)
    matched = int(np.sum(match != UNMATCHED))
    allowed_unmatched = math.floor(n * eps + COUNT_SLACK)
    return matched >= n - allowed_unmatched, match


def prokhorov_empirical(dm: DistanceMatrix) -> MetricResult:
    """
    Exact Prokhorov distance between two uniform samples of equal size.

    The optimum lies in {d_ij} union {m/N}; a binary search over these
    candidates runs one maximum matching per candidate tested. The least feasible
    candidate is returned (closed-infimum convention).

    Args:
        dm (DistanceMatrix): N x N cross distances

    Returns:
        MetricResult: value in [0, 1] with the optimal matching as certificate

    Raises:
        SampleSizeError: If the sample sizes differ
    """
    n_a, n_b = dm.shape
    if n_a != n_b:
        raise SampleSizeError(f"Prokhorov distance needs equal sample sizes, got {n_a} and {n_b}")
    n = n_a
    candidates = np.unique(np.concatenate([dm.d.ravel(), np.arange(n + 1) / n]))
    candidates = candidates[candidates <= 1.0]

    # eps = 1 is always feasible; best_match always belongs to candidates[hi]
    lo, hi = 0, len(candidates) - 1
    _, best_match = _feasible(dm.d, candidates[hi])
    tested = 1
    while lo < hi:
        mid = (lo + hi) // 2
        ok, match = _feasible(dm.d, candidates[mid])
        tested += 1
        if ok:
            hi, best_match = mid, match
        else:
            lo = mid + 1

    value = float(candidates[hi])
    pairs = [(i, int(j)) for i, j in enumerate(best_match) if j != UNMATCHED]
    unmatched = [i for i, j in enumerate(best_match) if j == UNMATCHED]
    logger.debug(f"Prokhorov: N={n}, {len(candidates)} candidates, {tested} tested, rho={value:.6g}")
    return MetricResult("prokhorov", value, epsilon=value, matching_pairs=pairs, unmatched=unmatched)


def _within_distance_bound(cross: np.ndarray) -> np.ndarray:
    # triangle inequality: d(x, x') >= |d(x, y) - d(x', y)| for every y on the other side
    rows = cross[:, None, :] - cross[None, :, :]
    return np.max(np.abs(rows), axis=2)


def bl_distance_empirical(
    dm: DistanceMatrix,
    d_aa: Optional[np.ndarray] = None,
    d_bb: Optional[np.ndarray] = None,
    tolerance: float = BL_TOLERANCE,
) -> MetricResult:
    """
    Bounded-Lipschitz distance between two uniform samples.

    Maximizes (1/N_A) sum g(a_i) - (1/N_B) sum g(b_j) over values g at the
    sample points with max|g| + Lip(g) <= 1, written as the linear program
    |g| <= B, g_p - g_q <= L d_pq, B + L <= 1 and solved with HiGHS.

    Args:
        dm (DistanceMatrix): N_A x N_B cross distances
        d_aa (np.ndarray, optional): Distances within the first sample
        d_bb (np.ndarray, optional): Distances within the second sample
        tolerance (float): Largest accepted duality gap

    Returns:
        MetricResult: value, the optimal g (first sample then second) and
            the duality gap. If within-sample distances were missing they
            are replaced by a triangle-inequality lower bound and the value
            is flagged as a lower bound.

    Raises:
        ToleranceError: If the solver does not reach optimality within tolerance
    """
    cross = dm.d
    n_a, n_b = cross.shape
    lower_bound = d_aa is None or d_bb is None
    if d_aa is None:
        d_aa = _within_distance_bound(cross)
    if d_bb is None:
        d_bb = _within_distance_bound(cross.T)

    full = np.block([[np.asarray(d_aa, dtype=float), cross], [cross.T, np.asarray(d_bb, dtype=float)]])
    n = n_a + n_b
    b_index, l_index = n, n + 1

    # one Lipschitz row per ordered pair p != q
    p_idx, q_idx = np.nonzero(~np.eye(n, dtype=bool))
    m_lip = p_idx.size
    lip_rows = np.arange(m_lip)
    lip = sparse.coo_matrix(
        (
            np.concatenate([np.ones(m_lip), -np.ones(m_lip), -full[p_idx, q_idx]]),
            (np.concatenate([lip_rows, lip_rows, lip_rows]), np.concatenate([p_idx, q_idx, np.full(m_lip, l_index)])),
        ),
        shape=(m_lip, n + 2),
    )
    points = np.arange(n)
    bound = sparse.coo_matrix(
        (
            np.concatenate([np.ones(n), -np.ones(n), -np.ones(2 * n)]),
            (np.concatenate([points, n + points, points, n + points]),
             np.concatenate([points, points, np.full(2 * n, b_index)])),
        ),
        shape=(2 * n, n + 2),
    )
    budget = sparse.coo_matrix(([1.0, 1.0], ([0, 0], [b_index, l_index])), shape=(1, n + 2))
    a_ub = sparse.vstack([lip, bound, budget]).tocsr()
    b_ub = np.zeros(a_ub.shape[0])
    b_ub[-1] = 1.0

    weights = np.concatenate([np.full(n_a, 1.0 / n_a), np.full(n_b, -1.0 / n_b)])
    c = np.concatenate([-weights, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0.0, None), (0.0, None)]

    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise ToleranceError(f"Bounded-Lipschitz program failed: {res.message}")
    gap = abs(float(res.fun) - float(b_ub @ res.ineqlin.marginals))
    if gap > tolerance:
        raise ToleranceError(f"Bounded-Lipschitz duality gap {gap:.3g} exceeds {tolerance}", gap=gap)

    value = max(-float(res.fun), 0.0)
    logger.debug(f"BL program: {n} points, {a_ub.shape[0]} constraints, value={value:.6g}, gap={gap:.2g}")
    return MetricResult(
        "bounded_lipschitz",
        value,
        test_function=np.asarray(res.x[:n]),
        duality_gap=gap,
        lower_bound=lower_bound,
    )


def ks_distance(hist_a: Histogram, hist_b: Histogram) -> float:
    """
    Largest gap between the normalized cumulative counts of two histograms.

    Underflow and overflow slots take part as the first and last cells.

    Raises:
        EdgeMismatchError: If the bin edges differ
    """
    if hist_a.edges.shape != hist_b.edges.shape or not np.array_equal(hist_a.edges, hist_b.edges):
        raise EdgeMismatchError("Histograms have different bin edges")
    if hist_a.total == 0 or hist_b.total == 0:
        raise ValueError("Cannot compare an empty histogram")

    def cdf(h: Histogram) -> np.ndarray:
        cells = np.concatenate([[h.underflow], h.counts, [h.overflow]]).astype(float)
        return np.cumsum(cells) / h.total

    return float(np.max(np.abs(cdf(hist_a) - cdf(hist_b))))


def ks_two_sample(values_a: Sequence[float], values_b: Sequence[float]) -> Tuple[float, float]:
    """Two-sample KS statistic and p-value on raw values, NaNs dropped."""
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    result = stats.ks_2samp(a[~np.isnan(a)], b[~np.isnan(b)])
    return float(result.statistic), float(result.pvalue)


def ks_threshold(n_a: int, n_b: int, alpha: float = 0.05) -> float:
    """
    Asymptotic two-sample KS critical value at level alpha.

    Returns:
        float: K_{1-alpha} * sqrt((n_a + n_b) / (n_a n_b)); about 0.1358 for 200 vs 200
    """
    if n_a < 1 or n_b < 1:
        raise ValueError(f"Sample sizes must be positive, got {n_a} and {n_b}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.kstwobign.isf(alpha)) * math.sqrt((n_a + n_b) / (n_a * n_b))


def expectation_gap_bound(rho: float, bl_norm: float) -> float:
    """Upper bound 2 ||G||_BL rho on |E G(X) - E G(Y)|."""
    if rho < 0 or bl_norm < 0:
        raise ValueError("rho and bl_norm must be non-negative")
    return 2.0 * bl_norm * rho
