"""
Law-preserving couplings between two empirical samples.

Given samples X and Y of equal size N (images under a projection, either
feature vectors or single-particle paths) at Prokhorov distance alpha, the
construction below produces a bijection psi on sample indices with

    fraction{ i : d(x_i, y_psi(i)) > alpha + 3 eps } < alpha + 3 eps.

Steps: split each sample into equal-count cells of diameter < eps, relate
cells at distance < alpha + eps, add k slack vertices on each side, find a
perfect matching of the augmented relation and pair indices inside matched
cells. Everything the matching leaves over is paired by lowest index.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np

from .distribution_metrics import (
    EUCLIDEAN,
    DistanceMatrix,
    EmpiricalSample,
    pairwise_distances,
    prokhorov_empirical,
)
from .ensemble import initial_conditions, simulate_ensemble
from .errors import InfeasiblePartitionError, NoPerfectMatchingError, SampleSizeError
from .matching import UNMATCHED, hall_violator, maximum_matching

if TYPE_CHECKING:
    from .experiments.config import ExperimentConfig

logger = logging.getLogger(__name__)

CEIL_SLACK = 1e-9
AUTO_EPSILON_EXPONENTS = range(12, 0, -1)


@dataclass
class CellPartition:
    """
    Equal-count cells plus a remainder over the indices of one sample.

    Attributes:
        cells (List[np.ndarray]): Index arrays of exactly cell_size points each
        remainder (np.ndarray): Indices in no cell, ascending
        epsilon (float): Diameter bound
        cell_size (int): Points per cell
        num_points (int): Sample size N
    """
    cells: List[np.ndarray]
    remainder: np.ndarray
    epsilon: float
    cell_size: int
    num_points: int

    @property
    def delta(self) -> float:
        """Mass of one cell."""
        return self.cell_size / self.num_points

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def check(self, within: np.ndarray) -> None:
        """
        Assert the cell conditions against within-sample distances.

        Raises:
            InfeasiblePartitionError: Naming the first violated condition
        """
        seen = np.concatenate(self.cells + [self.remainder]) if self.cells else self.remainder
        if seen.size != self.num_points or np.unique(seen).size != self.num_points:
            raise InfeasiblePartitionError("Cells and remainder do not partition the sample", "disjoint_cover")
        for cell in self.cells:
            if cell.size != self.cell_size:
                raise InfeasiblePartitionError(f"Cell of {cell.size} points, expected {self.cell_size}", "equal_mass")
            if cell.size > 1 and not np.max(within[np.ix_(cell, cell)]) < self.epsilon:
                raise InfeasiblePartitionError(f"Cell diameter reaches epsilon={self.epsilon}", "diameter")
        if not self.remainder.size / self.num_points < self.epsilon:
            raise InfeasiblePartitionError(
                f"Remainder holds {self.remainder.size} of {self.num_points} points", "remainder"
            )


def _sort_key(sample: EmpiricalSample) -> np.ndarray:
    # first feature coordinate; for paths the x displacement at the final time
    if sample.metric_tag == EUCLIDEAN:
        return np.asarray(sample.points)[:, 0]
    return np.array([p.values[-1, 0] for p in sample.points])


def partition_sample(
    sample: EmpiricalSample,
    epsilon: float,
    cell_size: int = 1,
    within: Optional[np.ndarray] = None,
) -> CellPartition:
    """
    Greedy ball covering followed by equal-count slicing.

    Every sample point in index order is a ball centre of radius eps/2; each
    ball takes the points not yet claimed. Each ball is then cut into runs of
    cell_size points along the sort key (index breaks ties) and any short
    tail goes to the remainder.

    Args:
        sample (EmpiricalSample): Points to partition
        epsilon (float): Diameter bound, positive
        cell_size (int): Points per cell
        within (np.ndarray, optional): Precomputed within-sample distances

    Returns:
        CellPartition: Checked partition

    Raises:
        InfeasiblePartitionError: If the conditions cannot all be met
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = sample.size
    if cell_size < 1 or cell_size > n:
        raise InfeasiblePartitionError(f"cell_size {cell_size} does not fit a sample of {n}", "cell_size")
    if n < 1.0 / epsilon:
        logger.warning(f"Sample of {n} points is smaller than 1/epsilon = {1.0 / epsilon:.1f}")
    if within is None:
        within = pairwise_distances(sample, sample).d

    key = _sort_key(sample)
    claimed = np.zeros(n, dtype=bool)
    cells: List[np.ndarray] = []
    leftovers: List[np.ndarray] = []
    for centre in range(n):
        ball = np.flatnonzero(~claimed & (within[centre] < 0.5 * epsilon))
        if ball.size == 0:
            continue
        claimed[ball] = True
        ordered = ball[np.lexsort((ball, key[ball]))]
        full = (ordered.size // cell_size) * cell_size
        cells.extend(ordered[start:start + cell_size] for start in range(0, full, cell_size))
        if full < ordered.size:
            leftovers.append(ordered[full:])

    remainder = np.sort(np.concatenate(leftovers)) if leftovers else np.zeros(0, dtype=np.int64)
    if not cells:
        raise InfeasiblePartitionError(f"No cell of {cell_size} points fits within diameter {epsilon}", "cell_count")
    partition = CellPartition(cells, remainder, epsilon, cell_size, n)
    partition.check(within)
    logger.debug(f"Partition: {partition.num_cells} cells of {cell_size}, remainder {remainder.size}")
    return partition


def _drop_surplus(partition: CellPartition, keep: int) -> CellPartition:
    if partition.num_cells <= keep:
        return partition
    moved = partition.cells[keep:]
    remainder = np.sort(np.concatenate([partition.remainder] + moved))
    return CellPartition(partition.cells[:keep], remainder, partition.epsilon, partition.cell_size, partition.num_points)


class SlackRelation:
    """
    Relation between n real cells per side plus k slack vertices per side.

    Index n + s is slack vertex s; slack vertices are related to everything.
    """

    def __init__(self, n: int, k: int, adjacency: np.ndarray):
        adjacency = np.asarray(adjacency, dtype=bool)
        size = n + k
        if adjacency.shape != (size, size):
            raise ValueError(f"Adjacency must be {size} x {size}, got {adjacency.shape}")
        if not (adjacency[n:, :].all() and adjacency[:, n:].all()):
            raise ValueError("Slack rows and columns must be fully related")
        self.n = n
        self.k = k
        self.adjacency = adjacency

    @classmethod
    def from_real_block(cls, real: np.ndarray, k: int) -> "SlackRelation":
        real = np.asarray(real, dtype=bool)
        n = real.shape[0]
        adjacency = np.ones((n + k, n + k), dtype=bool)
        adjacency[:n, :n] = real
        return cls(n, k, adjacency)

    @property
    def size(self) -> int:
        return self.n + self.k


def slack_count(alpha: float, epsilon: float, delta: float) -> int:
    """k = ceil((alpha + eps) / delta)."""
    return max(int(math.ceil((alpha + epsilon) / delta - CEIL_SLACK)), 0)


def cell_relation(
    cells_x: List[np.ndarray],
    cells_y: List[np.ndarray],
    cross: np.ndarray,
    threshold: float,
) -> np.ndarray:
    """real[a, b] iff some x in cell a and y in cell b are closer than threshold."""
    if not cells_x or not cells_y:
        return np.zeros((len(cells_x), len(cells_y)), dtype=bool)
    grid_x = np.stack(cells_x)
    grid_y = np.stack(cells_y)
    block = cross[grid_x[:, None, :, None], grid_y[None, :, None, :]]
    return block.min(axis=(2, 3)) < threshold


def hall_matching(rel: SlackRelation) -> np.ndarray:
    """
    Perfect matching of the slack relation, real-to-real pairs maximised first.

    A maximum matching on the real block is completed through the slack
    vertices: unmatched real rows take slack columns, unmatched real columns
    take slack rows, and the remaining slack vertices pair up in order.

    Returns:
        np.ndarray: phi with phi[row] = column, a permutation of range(n + k)

    Raises:
        NoPerfectMatchingError: With rows A and N(A), |N(A)| < |A|, when more
            than k real rows stay unmatched
    """
    n, k = rel.n, rel.k
    real_match = maximum_matching(rel.adjacency[:n, :n]) if n else np.zeros(0, dtype=np.int64)
    free_rows = [u for u in range(n) if real_match[u] == UNMATCHED]
    if len(free_rows) > k:
        rows, cols = hall_violator(rel.adjacency)
        raise NoPerfectMatchingError(rows, cols)

    matched_cols = set(int(v) for v in real_match if v != UNMATCHED)
    free_cols = [v for v in range(n) if v not in matched_cols]
    phi = np.full(n + k, UNMATCHED, dtype=np.int64)
    phi[:n] = real_match
    for s, u in enumerate(free_rows):
        phi[u] = n + s
    for s, v in enumerate(free_cols):
        phi[n + s] = v
    for s in range(len(free_cols), k):
        phi[n + s] = n + len(free_rows) + s - len(free_cols)
    return phi


@dataclass
class CouplingMap:
    """
    Bijection between sample indices and the distance of every pair.

    Attributes:
        assignment (np.ndarray): assignment[i] = index in the second sample
        per_pair_distance (np.ndarray): d(x_i, y_assignment[i])
    """
    assignment: np.ndarray
    per_pair_distance: np.ndarray
    alpha: float = 0.0
    epsilon: float = 0.0
    delta: float = 0.0
    k: int = 0
    n_cells: int = 0

    def is_bijection(self) -> bool:
        n = self.assignment.size
        return bool(np.array_equal(np.sort(self.assignment), np.arange(n)))

    def exceedance(self, beta: float) -> float:
        """Fraction of pairs farther apart than beta."""
        return float(np.mean(self.per_pair_distance > beta))

    def exceedance_curve(self, betas: np.ndarray) -> List[Tuple[float, float]]:
        return [(float(b), self.exceedance(b)) for b in betas]

    def pairs(self) -> List[Tuple[int, int, float]]:
        return [(i, int(j), float(d)) for i, (j, d) in enumerate(zip(self.assignment, self.per_pair_distance))]


def build_shadow_map(
    sample_x: EmpiricalSample,
    sample_y: EmpiricalSample,
    epsilon: float,
    alpha: Optional[float] = None,
    cell_size: int = 1,
    cross: Optional[DistanceMatrix] = None,
) -> CouplingMap:
    """
    Coupling with exceedance(alpha + 3 eps) < alpha + 3 eps when delta < eps.

    Args:
        sample_x (EmpiricalSample): First sample
        sample_y (EmpiricalSample): Second sample, same size and metric
        epsilon (float): Cell diameter bound
        alpha (float, optional): Prokhorov distance of the samples; computed if omitted
        cell_size (int): Points per cell on both sides
        cross (DistanceMatrix, optional): Precomputed cross distances

    Returns:
        CouplingMap: The bijection with construction parameters

    Raises:
        SampleSizeError: If the sample sizes differ
        InfeasiblePartitionError: If either side cannot be partitioned
        NoPerfectMatchingError: If alpha underestimates the true distance
    """
    if sample_x.size != sample_y.size:
        raise SampleSizeError(f"Samples differ in size: {sample_x.size} vs {sample_y.size}")
    n_points = sample_x.size
    if cross is None:
        cross = pairwise_distances(sample_x, sample_y)
    if alpha is None:
        alpha = prokhorov_empirical(cross).value

    part_x = partition_sample(sample_x, epsilon, cell_size)
    part_y = partition_sample(sample_y, epsilon, cell_size)
    n_cells = min(part_x.num_cells, part_y.num_cells)
    part_x = _drop_surplus(part_x, n_cells)
    part_y = _drop_surplus(part_y, n_cells)
    for part in (part_x, part_y):
        if not part.remainder.size / n_points < epsilon:
            raise InfeasiblePartitionError(
                f"Aligning cell counts leaves {part.remainder.size} of {n_points} points unassigned", "remainder"
            )

    delta = part_x.delta
    k = slack_count(alpha, epsilon, delta)
    real = cell_relation(part_x.cells, part_y.cells, cross.d, alpha + epsilon)
    phi = hall_matching(SlackRelation.from_real_block(real, k))

    assignment = np.full(n_points, UNMATCHED, dtype=np.int64)
    used_y = set()
    loose_x: List[int] = []
    for a in range(n_cells):
        b = int(phi[a])
        if b < n_cells:
            assignment[np.sort(part_x.cells[a])] = np.sort(part_y.cells[b])
            used_y.add(b)
        else:
            loose_x.append(a)
    loose_y = [b for b in range(n_cells) if b not in used_y]

    # cells matched through slack, then the remainders, by lowest index
    for a, b in zip(loose_x, loose_y):
        assignment[np.sort(part_x.cells[a])] = np.sort(part_y.cells[b])
    assignment[part_x.remainder] = part_y.remainder

    distances = cross.d[np.arange(n_points), assignment]
    coupling = CouplingMap(assignment, distances, alpha, epsilon, delta, k, n_cells)
    logger.info(
        f"Shadow map: N={n_points}, alpha={alpha:.4g}, eps={epsilon:.4g}, k={k}, "
        f"cells={n_cells}, slack-matched cells={len(loose_x)}"
    )
    return coupling


@dataclass
class WeakShadowingReport:
    """Outcome of checking exceedance(beta) < beta."""
    beta: float
    exceedance: float
    passed: bool
    offending_pairs: List[Tuple[int, int, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "exceedance": self.exceedance,
            "pass": self.passed,
            "offending_pairs": [[i, j, d] for i, j, d in self.offending_pairs],
        }


def verify_weak_shadowing(coupling: CouplingMap, beta: float) -> WeakShadowingReport:
    """Pass iff the fraction of pairs farther than beta is strictly below beta."""
    exceedance = coupling.exceedance(beta)
    passed = exceedance < beta
    offending = [] if passed else [pair for pair in coupling.pairs() if pair[2] > beta]
    return WeakShadowingReport(beta, exceedance, passed, offending)


def choose_epsilon(
    sample_x: EmpiricalSample,
    sample_y: EmpiricalSample,
    cell_size: int = 1,
) -> float:
    """
    Smallest eps = 2^-j (j = 1..12) with feasible partitions and delta < eps.

    Raises:
        InfeasiblePartitionError: If no grid value works
    """
    delta = cell_size / sample_x.size
    within_x = pairwise_distances(sample_x, sample_x).d
    within_y = pairwise_distances(sample_y, sample_y).d
    for j in AUTO_EPSILON_EXPONENTS:
        epsilon = 2.0 ** -j
        if not delta < epsilon:
            continue
        try:
            partition_sample(sample_x, epsilon, cell_size, within_x)
            partition_sample(sample_y, epsilon, cell_size, within_y)
        except InfeasiblePartitionError as exc:
            logger.debug(f"epsilon={epsilon} rejected: {exc}")
            continue
        logger.info(f"Auto epsilon: {epsilon}")
        return epsilon
    raise InfeasiblePartitionError("No epsilon in the 2^-j grid admits a partition", "epsilon_grid")


@dataclass
class ShadowDiagnostic:
    """Full record of one shadow-pipeline run."""
    alpha: float
    epsilon: float
    delta: float
    k: int
    n_cells: int
    beta: float
    exceedance_curve: List[Tuple[float, float]]
    matching: List[Tuple[int, int, float]]
    passed: bool
    bijective: bool
    dt: float
    dt_ref: float
    ensemble_size: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "k": self.k,
            "n_cells": self.n_cells,
            "beta": self.beta,
            "exceedance_curve": [[b, f] for b, f in self.exceedance_curve],
            "matching": [[i, j, d] for i, j, d in self.matching],
            "pass": self.passed,
            "bijective": self.bijective,
            "dt": self.dt,
            "dt_ref": self.dt_ref,
            "ensemble_size": self.ensemble_size,
        }


def shadow_md_pipeline(config: "ExperimentConfig", workers: int = 1) -> ShadowDiagnostic:
    """
    Couple numerical paths at config.dt_values[0] with reference paths at config.dt_ref.

    Both ensembles start from the same N canonical initial conditions. The
    tracked particle's displacement paths are compared in the sup norm.

    Args:
        config (ExperimentConfig): Validated exp5 configuration
        workers (int): Process count for the ensemble runs

    Returns:
        ShadowDiagnostic: alpha, construction parameters, exceedance curve and verdict
    """
    spec = config.ensemble_spec()
    dt = config.dt_values[0]
    members = list(range(config.ensemble_size))
    states = initial_conditions(spec, members, workers)
    numerical = simulate_ensemble(spec, dt, members, workers, states=states)
    reference = simulate_ensemble(spec, config.dt_ref, members, workers, states=states)

    sample_x = EmpiricalSample.from_paths(numerical)
    sample_y = EmpiricalSample.from_paths(reference)
    cross = pairwise_distances(sample_x, sample_y)
    alpha = prokhorov_empirical(cross).value
    epsilon = config.epsilon if config.epsilon is not None else choose_epsilon(sample_x, sample_y)

    coupling = build_shadow_map(sample_x, sample_y, epsilon, alpha=alpha, cross=cross)
    beta = alpha + 3.0 * epsilon
    report = verify_weak_shadowing(coupling, beta)
    betas = alpha + epsilon * np.arange(0.0, 6.5, 0.5)
    logger.info(f"Weak shadowing at beta={beta:.4g}: exceedance={report.exceedance:.4g}, pass={report.passed}")

    return ShadowDiagnostic(
        alpha=alpha,
        epsilon=epsilon,
        delta=coupling.delta,
        k=coupling.k,
        n_cells=coupling.n_cells,
        beta=beta,
        exceedance_curve=coupling.exceedance_curve(betas),
        matching=coupling.pairs(),
        passed=report.passed,
        bijective=coupling.is_bijection(),
        dt=dt,
        dt_ref=config.dt_ref,
        ensemble_size=config.ensemble_size,
    )
