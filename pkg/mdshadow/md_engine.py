"""
Periodic two-dimensional Lennard-Jones system and its Störmer-Verlet integrator.

Positions live on the torus [0, side)^2, masses are 1 so momenta and
velocities coincide. The pair potential is the truncated, infinitely smooth
Lennard-Jones form

    V(r) = s (r^-12 - r^-6) exp(1 / (r - r_cutoff))   for r < r_cutoff
    V(r) = 0                                           otherwise

Forces are summed pair by pair in ascending (i, j) order whichever pair
search is used, so the cell-list path and the all-pairs path give
bit-identical results.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import InstabilityError, InvalidSeparationError, ParticleOverlapError

logger = logging.getLogger(__name__)

DIMENSION = 2
LJ_MINIMUM = 2.0 ** (1.0 / 6.0)


@dataclass(frozen=True)
class BoxSpec:
    """Square periodic domain."""
    side_length: float = 11.5
    dimension: int = DIMENSION

    def __post_init__(self):
        if not self.side_length > 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        if self.dimension != DIMENSION:
            raise ValueError(f"Only {DIMENSION}-D boxes are supported, got dimension={self.dimension}")

    def check_cutoff(self, potential: "PotentialSpec") -> None:
        """Raise if the box is too small for unambiguous minimum-image pairs."""
        if not self.side_length > 2.0 * potential.r_cutoff:
            raise ValueError(
                f"side_length {self.side_length} must exceed 2 * r_cutoff = {2.0 * potential.r_cutoff}"
            )


@dataclass(frozen=True)
class PotentialSpec:
    """Smoothed, truncated Lennard-Jones parameters."""
    r_cutoff: float = 2.5
    well_depth_scale: float = 4.0

    def __post_init__(self):
        if not self.r_cutoff > LJ_MINIMUM:
            raise ValueError(f"r_cutoff must exceed 2^(1/6) = {LJ_MINIMUM:.6f}, got {self.r_cutoff}")
        if not self.well_depth_scale > 0:
            raise ValueError(f"well_depth_scale must be positive, got {self.well_depth_scale}")


@dataclass(frozen=True, eq=False)
class SystemState:
    """
    Positions and momenta of n particles at one instant.

    Arrays are copied on construction and marked read-only.
    """
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        p = np.array(self.p, dtype=float)
        if q.ndim != 2 or q.shape[1] != DIMENSION:
            raise ValueError(f"q must have shape (n, {DIMENSION}), got {q.shape}")
        if p.shape != q.shape:
            raise ValueError(f"p shape {p.shape} does not match q shape {q.shape}")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def total_momentum(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.p * self.p))

    def negate_momenta(self) -> "SystemState":
        return SystemState(self.q, -self.p)

    def replace(self, q: Optional[np.ndarray] = None, p: Optional[np.ndarray] = None) -> "SystemState":
        return SystemState(self.q if q is None else q, self.p if p is None else p)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))

    def validate(self, box: BoxSpec) -> None:
        """Raise ValueError unless every coordinate lies in [0, side)."""
        if not self.is_finite():
            raise ValueError("State contains non-finite coordinates")
        if np.any(self.q < 0.0) or np.any(self.q >= box.side_length):
            raise ValueError(f"Positions must lie in [0, {box.side_length})")


@dataclass(frozen=True, eq=False)
class ForceField:
    """Forces -dH/dq on every particle."""
    f: np.ndarray

    def net(self) -> np.ndarray:
        return self.f.sum(axis=0)

    def max_magnitude(self) -> float:
        if self.f.size == 0:
            return 0.0
        return float(np.max(np.sqrt(np.sum(self.f * self.f, axis=1))))


def min_image(delta: np.ndarray, box: BoxSpec) -> np.ndarray:
    """
    Representative of delta modulo the box lattice, components in [-side/2, side/2).

    Args:
        delta (np.ndarray): Displacement(s), last axis of length 2
        box (BoxSpec): Periodic domain

    Returns:
        np.ndarray: Minimum-image displacement, same shape as delta
    """
    side = box.side_length
    half = 0.5 * side
    delta = np.asarray(delta, dtype=float)
    wrapped = delta - side * np.floor(delta / side + 0.5)
    # floor() rounding can leave a value a hair outside the half-open range
    wrapped = np.where(wrapped >= half, wrapped - side, wrapped)
    wrapped = np.where(wrapped < -half, wrapped + side, wrapped)
    return wrapped


def wrap_positions(q: np.ndarray, box: BoxSpec) -> np.ndarray:
    """Map positions into [0, side)."""
    side = box.side_length
    wrapped = np.mod(q, side)
    return np.where(wrapped >= side, wrapped - side, wrapped)


def lj_potential(r: float, spec: PotentialSpec) -> float:
    """
    Smoothed truncated Lennard-Jones energy of one pair.

    Args:
        r (float): Pair separation
        spec (PotentialSpec): Potential parameters

    Returns:
        float: Pair energy, exactly 0 for r >= r_cutoff

    Raises:
        InvalidSeparationError: If r <= 0
    """
    if not r > 0:
        raise InvalidSeparationError(f"Pair separation must be positive, got {r}")
    if r >= spec.r_cutoff:
        return 0.0
    inv6 = 1.0 / (r * r * r * r * r * r)
    return spec.well_depth_scale * (inv6 * inv6 - inv6) * math.exp(1.0 / (r - spec.r_cutoff))


def _pair_energy(r: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    # r must be strictly inside (0, r_cutoff)
    inv2 = 1.0 / (r * r)
    inv6 = inv2 * inv2 * inv2
    return spec.well_depth_scale * (inv6 * inv6 - inv6) * np.exp(1.0 / (r - spec.r_cutoff))


def _force_over_r(r: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """-V'(r) / r for separations strictly inside (0, r_cutoff)."""
    inv2 = 1.0 / (r * r)
    inv6 = inv2 * inv2 * inv2
    shifted = r - spec.r_cutoff
    smoothing = np.exp(1.0 / shifted)
    lj = inv6 * inv6 - inv6
    lj_prime = (6.0 * inv6 - 12.0 * inv6 * inv6) / r
    dvdr = spec.well_depth_scale * smoothing * (lj_prime - lj / (shifted * shifted))
    return -dvdr / r


def lj_force_pair(delta: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """
    Force on particle i due to particle j, with delta = q_i - q_j (minimum image).

    Args:
        delta (np.ndarray): Minimum-image displacement of length 2
        spec (PotentialSpec): Potential parameters

    Returns:
        np.ndarray: Force vector; zero beyond the cutoff

    Raises:
        ParticleOverlapError: If |delta| == 0
    """
    delta = np.asarray(delta, dtype=float).reshape(1, DIMENSION)
    r = np.sqrt(delta[:, 0] * delta[:, 0] + delta[:, 1] * delta[:, 1])
    if r[0] == 0.0:
        raise ParticleOverlapError()
    if r[0] >= spec.r_cutoff:
        return np.zeros(DIMENSION)
    return (delta * _force_over_r(r, spec)[:, None])[0]


def _all_pairs(n: int) -> Tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def _cell_pairs(q: np.ndarray, box: BoxSpec, spec: PotentialSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Candidate pairs (i < j) from a cell list with cell edge >= r_cutoff.

    Returned pairs are sorted lexicographically by (i, j).
    """
    n = q.shape[0]
    ncell = int(box.side_length // spec.r_cutoff)
    if ncell < 3:
        # every cell neighbours every other one
        return _all_pairs(n)

    edge = box.side_length / ncell
    coords = np.minimum(np.floor(q / edge).astype(np.int64), ncell - 1)
    cx, cy = coords[:, 0], coords[:, 1]
    cell = cx * ncell + cy

    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=ncell * ncell)
    starts = np.cumsum(counts) - counts
    particles = np.arange(n)

    first: List[np.ndarray] = []
    second: List[np.ndarray] = []
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            neighbour = ((cx + ox) % ncell) * ncell + (cy + oy) % ncell
            per_particle = counts[neighbour]
            total = int(per_particle.sum())
            if total == 0:
                continue
            i_rep = np.repeat(particles, per_particle)
            offsets = np.arange(total) - np.repeat(np.cumsum(per_particle) - per_particle, per_particle)
            j_rep = order[np.repeat(starts[neighbour], per_particle) + offsets]
            keep = i_rep < j_rep
            first.append(i_rep[keep])
            second.append(j_rep[keep])

    if not first:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    i = np.concatenate(first)
    j = np.concatenate(second)
    ordering = np.argsort(i * n + j, kind="stable")
    return i[ordering], j[ordering]


def _interacting(q: np.ndarray, i: np.ndarray, j: np.ndarray, box: BoxSpec, spec: PotentialSpec):
    """Filter candidate pairs to those inside the cutoff; returns (i, j, delta, r)."""
    delta = min_image(q[i] - q[j], box)
    r = np.sqrt(delta[:, 0] * delta[:, 0] + delta[:, 1] * delta[:, 1])
    inside = r < spec.r_cutoff
    i, j, delta, r = i[inside], j[inside], delta[inside], r[inside]
    overlap = np.flatnonzero(r == 0.0)
    if overlap.size:
        k = overlap[0]
        raise ParticleOverlapError(int(i[k]), int(j[k]))
    return i, j, delta, r


def _accumulate(q: np.ndarray, i: np.ndarray, j: np.ndarray, box: BoxSpec, spec: PotentialSpec) -> np.ndarray:
    n = q.shape[0]
    i, j, delta, r = _interacting(q, i, j, box, spec)
    forces = np.zeros((n, DIMENSION))
    if i.size == 0:
        return forces
    pair_forces = delta * _force_over_r(r, spec)[:, None]

    # interleave (i, +f_ij), (j, -f_ij) so each particle sums in ascending pair order
    targets = np.empty(2 * i.size, dtype=np.int64)
    targets[0::2] = i
    targets[1::2] = j
    contributions = np.empty((2 * i.size, DIMENSION))
    contributions[0::2] = pair_forces
    contributions[1::2] = -pair_forces
    np.add.at(forces, targets, contributions)
    return forces


def compute_forces(state: SystemState, box: BoxSpec, spec: PotentialSpec) -> ForceField:
    """
    Forces on all particles using a cell-list pair search.

    Args:
        state (SystemState): Current positions (momenta unused)
        box (BoxSpec): Periodic domain
        spec (PotentialSpec): Potential parameters

    Returns:
        ForceField: Per-particle forces

    Raises:
        ParticleOverlapError: If two particles coincide
    """
    i, j = _cell_pairs(state.q, box, spec)
    return ForceField(_accumulate(state.q, i, j, box, spec))


def compute_forces_naive(state: SystemState, box: BoxSpec, spec: PotentialSpec) -> ForceField:
    """All-pairs O(n^2) reference for compute_forces, same summation order."""
    i, j = _all_pairs(state.n)
    return ForceField(_accumulate(state.q, i, j, box, spec))


def potential_energy(state: SystemState, box: BoxSpec, spec: PotentialSpec) -> float:
    """Sum of pair energies over minimum-image separations."""
    i, j = _cell_pairs(state.q, box, spec)
    _, _, _, r = _interacting(state.q, i, j, box, spec)
    if r.size == 0:
        return 0.0
    return float(np.sum(_pair_energy(r, spec)))


def total_energy(state: SystemState, box: BoxSpec, spec: PotentialSpec) -> float:
    """H(q, p) = |p|^2 / 2 + sum_{i<j} V(|q_i - q_j|)."""
    return state.kinetic_energy() + potential_energy(state, box, spec)


def verlet_step(state: SystemState, dt: float, box: BoxSpec, spec: PotentialSpec) -> SystemState:
    """
    One Störmer-Verlet step: half drift, full kick at the half-step position, half drift.

    Args:
        state (SystemState): State at time t
        dt (float): Step length
        box (BoxSpec): Periodic domain
        spec (PotentialSpec): Potential parameters

    Returns:
        SystemState: State at time t + dt, positions wrapped into the box

    Raises:
        ValueError: If dt <= 0
        InstabilityError: If the new state is not finite
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        q_half = wrap_positions(state.q + (0.5 * dt) * state.p, box)
        if not np.all(np.isfinite(q_half)):
            raise InstabilityError("Non-finite positions in Verlet drift", dt=dt)
        i, j = _cell_pairs(q_half, box, spec)
        p_new = state.p + dt * _accumulate(q_half, i, j, box, spec)
        q_new = wrap_positions(q_half + (0.5 * dt) * p_new, box)
    if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(q_new))):
        raise InstabilityError("Non-finite state after Verlet step", dt=dt)
    return SystemState(q_new, p_new)


def integrate(
    state: SystemState,
    dt: float,
    num_steps: int,
    box: BoxSpec,
    spec: PotentialSpec,
    record_stride: int = 1,
) -> List[SystemState]:
    """
    Iterate verlet_step and record every record_stride-th state, step 0 included.

    Args:
        state (SystemState): Initial state
        dt (float): Step length
        num_steps (int): Number of steps, at least 1
        box (BoxSpec): Periodic domain
        spec (PotentialSpec): Potential parameters
        record_stride (int): Keep one state every this many steps

    Returns:
        List[SystemState]: Recorded states

    Raises:
        ValueError: If num_steps < 1 or record_stride < 1
        InstabilityError: With the failing step index
    """
    if num_steps < 1:
        raise ValueError(f"num_steps must be at least 1, got {num_steps}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be at least 1, got {record_stride}")

    recorded = [state]
    current = state
    for step in range(1, num_steps + 1):
        try:
            current = verlet_step(current, dt, box, spec)
        except InstabilityError as exc:
            logger.error(f"Integration blew up at step {step} (dt={dt})")
            raise InstabilityError(f"Non-finite state at step {step} with dt={dt}", step=step, dt=dt) from exc
        if step % record_stride == 0:
            recorded.append(current)
    return recorded
