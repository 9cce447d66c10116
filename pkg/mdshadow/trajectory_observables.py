"""
Single-particle path observables.

A path is the piecewise-linear interpolation through the unwrapped
displacement Q^n = dt * sum_{i<n} p^i of one particle. On such paths the five
functionals, the sup-norm distance and the first crossing times all have
exact per-segment formulas, so no extra sampling grid is involved.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .canonical_sampler import STREAM_BROWNIAN, derive_rng
from .errors import DegenerateAngleError, GridMismatchError, InstabilityError
from .md_engine import BoxSpec, PotentialSpec, SystemState, verlet_step

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-9
ERROR_SUFFIX = "_error"
F4_RADIUS = 1.0


@dataclass(frozen=True, eq=False)
class PathPL:
    """
    Piecewise-linear path through values[i] at time t0 + i * dt_grid.

    Attributes:
        t0 (float): Start time
        dt_grid (float): Node spacing
        values (np.ndarray): Node values, shape (m, k) with m >= 2
    """
    t0: float
    dt_grid: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 2:
            raise ValueError(f"A path needs at least 2 nodes, got shape {values.shape}")
        if not self.dt_grid > 0:
            raise ValueError(f"dt_grid must be positive, got {self.dt_grid}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return (self.num_nodes - 1) * self.dt_grid

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_grid * np.arange(self.num_nodes)

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation at time t (clamped to the path's interval)."""
        times = self.times
        return np.array([np.interp(t, times, self.values[:, c]) for c in range(self.dimension)])

    def to_frame(self) -> pd.DataFrame:
        """Table with a time column and one column per coordinate (qx, qy for planar paths)."""
        names = ["qx", "qy"] if self.dimension == 2 else [f"q{c}" for c in range(self.dimension)]
        frame = pd.DataFrame(self.values, columns=names)
        frame.insert(0, "t", self.times)
        return frame


def resample(path: PathPL, dt_new: float) -> PathPL:
    """
    Exact refinement of a path onto a grid dt_new that divides dt_grid.

    Raises:
        GridMismatchError: If dt_grid / dt_new is not a positive integer
    """
    ratio = path.dt_grid / dt_new
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > GRID_TOLERANCE * max(ratio, 1.0):
        raise GridMismatchError(f"Cannot refine grid {path.dt_grid} onto {dt_new}: ratio {ratio} is not an integer")
    if factor == 1:
        return path

    nodes = (path.num_nodes - 1) * factor + 1
    # fractional node positions avoid drift from repeated float addition
    positions = np.arange(nodes) / factor
    coarse = np.arange(path.num_nodes)
    values = np.column_stack([np.interp(positions, coarse, path.values[:, c]) for c in range(path.dimension)])
    return PathPL(path.t0, path.dt_grid / factor, values)


def common_grid(a: PathPL, b: PathPL) -> Tuple[PathPL, PathPL]:
    """
    Bring two paths onto the finer of their two grids.

    Raises:
        GridMismatchError: If the paths differ in start, length or dimension,
            or the grids are not nested
    """
    if a.dimension != b.dimension:
        raise GridMismatchError(f"Path dimensions differ: {a.dimension} vs {b.dimension}")
    if abs(a.t0 - b.t0) > GRID_TOLERANCE or abs(a.T - b.T) > GRID_TOLERANCE * max(a.T, 1.0):
        raise GridMismatchError(f"Path intervals differ: [{a.t0}, {a.t0 + a.T}] vs [{b.t0}, {b.t0 + b.T}]")
    if a.dt_grid >= b.dt_grid:
        a = resample(a, b.dt_grid)
    else:
        b = resample(b, a.dt_grid)
    if a.num_nodes != b.num_nodes:
        raise GridMismatchError(f"Node counts differ after refinement: {a.num_nodes} vs {b.num_nodes}")
    return a, b


def unwrap_displacement(states: Sequence[SystemState], particle: int, dt: float) -> PathPL:
    """
    Path of Q^n = dt * sum_{i<n} p_particle^i through consecutive states.

    Args:
        states (Sequence[SystemState]): At least 2 states spaced dt apart
        particle (int): Particle index
        dt (float): Step length

    Returns:
        PathPL: Displacement path starting at the origin
    """
    if len(states) < 2:
        raise ValueError(f"Need at least 2 states, got {len(states)}")
    momenta = np.array([s.p[particle] for s in states[:-1]])
    values = np.vstack([np.zeros((1, momenta.shape[1])), dt * np.cumsum(momenta, axis=0)])
    return PathPL(0.0, dt, values)


def track_particle_path(
    state: SystemState,
    dt: float,
    num_steps: int,
    box: BoxSpec,
    spec: PotentialSpec,
    particle: int = 0,
    record_stride: int = 1,
) -> Tuple[PathPL, SystemState]:
    """
    Integrate with Störmer-Verlet while accumulating one particle's displacement.

    Only every record_stride-th node is kept, but Q is summed over every step,
    so the result equals unwrap_displacement on the full record sampled at
    the stride.

    Args:
        state (SystemState): Initial state
        dt (float): Step length
        num_steps (int): Number of steps, a multiple of record_stride
        box (BoxSpec): Periodic domain
        spec (PotentialSpec): Potential parameters
        particle (int): Tracked particle index
        record_stride (int): Node spacing in steps

    Returns:
        Tuple[PathPL, SystemState]: Displacement path and the final state

    Raises:
        InstabilityError: With the failing step index
    """
    if num_steps < 1 or record_stride < 1 or num_steps % record_stride:
        raise ValueError(f"num_steps ({num_steps}) must be a positive multiple of record_stride ({record_stride})")
    if not 0 <= particle < state.n:
        raise IndexError(f"Particle index {particle} out of range for n={state.n}")

    nodes = np.zeros((num_steps // record_stride + 1, 2))
    q = np.zeros(2)
    current = state
    for step in range(1, num_steps + 1):
        q = q + dt * current.p[particle]
        try:
            current = verlet_step(current, dt, box, spec)
        except InstabilityError as exc:
            raise InstabilityError(f"Non-finite state at step {step} with dt={dt}", step=step, dt=dt) from exc
        if step % record_stride == 0:
            nodes[step // record_stride] = q
    return PathPL(0.0, dt * record_stride, nodes), current


def sup_distance(a: PathPL, b: PathPL) -> float:
    """
    sup_t |a(t) - b(t)| for piecewise-linear paths.

    The Euclidean norm of a linear function is convex on every segment, so the
    supremum is attained at a node of the common grid.
    """
    a, b = common_grid(a, b)
    diff = a.values - b.values
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=1))))


def _first_crossing(values: np.ndarray, dt: float, radius: float) -> Optional[float]:
    """Earliest time at which |values(t)| reaches radius, or None."""
    norms = np.sqrt(np.sum(values * values, axis=1))
    hits = np.flatnonzero(norms >= radius)
    if hits.size == 0:
        return None
    k = int(hits[0])
    if k == 0:
        return 0.0

    # |a + s d|^2 = radius^2 on the segment (k-1, k), with |a| < radius
    a = values[k - 1]
    d = values[k] - values[k - 1]
    quad = float(d @ d)
    half_lin = float(a @ d)
    const = float(a @ a) - radius * radius
    root = math.sqrt(max(half_lin * half_lin - quad * const, 0.0))
    if half_lin > 0:
        s = -const / (half_lin + root)
    else:
        s = (root - half_lin) / quad
    s = min(max(s, 0.0), 1.0)
    return (k - 1 + s) * dt


def first_divergence_time(a: PathPL, b: PathPL, threshold: float = 1.0) -> Optional[float]:
    """
    First time (relative to t0) at which |a(t) - b(t)| reaches threshold.

    Returns:
        float or None: Crossing time, or None if the paths stay closer
    """
    a, b = common_grid(a, b)
    return _first_crossing(a.values - b.values, a.dt_grid, threshold)


class FunctionalKind(Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"
    F5 = "F5"


@dataclass(frozen=True)
class FunctionalId:
    """One of the path functionals; tau only matters for F5."""
    kind: FunctionalKind
    tau: float = 0.1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def name(self) -> str:
        return self.kind.value

    @classmethod
    def parse(cls, name: str, tau: float = 0.1) -> "FunctionalId":
        try:
            return cls(FunctionalKind(name.upper()), tau)
        except ValueError:
            raise ValueError(f"Unknown functional '{name}', expected one of F1..F5")


ALL_FUNCTIONALS = tuple(FunctionalId(kind) for kind in FunctionalKind)


def _sine_moment(path: PathPL) -> float:
    # (1/T) * integral of x(t) sin(2 pi (t - t0) / T), integrated by parts per segment
    x = path.values[:, 0]
    T = path.T
    omega = 2.0 * math.pi / T
    s = omega * (path.times - path.t0)
    cos_s = np.cos(s)
    sin_s = np.sin(s)
    slopes = np.diff(x) / path.dt_grid
    boundary = -(x[1:] * cos_s[1:] - x[:-1] * cos_s[:-1]) / omega
    interior = slopes * np.diff(sin_s) / (omega * omega)
    return float(np.sum(boundary + interior)) / T


def _endpoint_angle(path: PathPL, tau: float) -> float:
    T = path.T
    if not T >= 2.0 * tau:
        raise ValueError(f"F5 needs T >= 2 tau, got T={T}, tau={tau}")
    end = path.t0 + T
    q_end = path.at(end)
    q_mid = path.at(end - tau)
    q_start = path.at(end - 2.0 * tau)
    u = q_end - q_mid
    v = q_mid - q_start
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateAngleError(f"Zero increment over the last 2*tau={2 * tau} of the path")
    return float(np.clip((u @ v) / (nu * nv), -1.0, 1.0))


def eval_functional(fid: FunctionalId, path: PathPL) -> float:
    """
    Evaluate one functional on a displacement path.

    F1 is the x endpoint. F2 is (1/T) * integral of Q_x(t) sin(2 pi t / T).
    F3 is max_t |Q(t)|. F4 is the first time |Q| reaches 1, or T if it
    never does. F5 is the cosine of the angle between the increments over
    [T - tau, T] and [T - 2 tau, T - tau].

    Raises:
        DegenerateAngleError: For F5 when an increment is zero
    """
    kind = fid.kind
    if kind is FunctionalKind.F1:
        return float(path.values[-1, 0])
    if kind is FunctionalKind.F2:
        return _sine_moment(path)
    if kind is FunctionalKind.F3:
        return float(np.max(np.sqrt(np.sum(path.values * path.values, axis=1))))
    if kind is FunctionalKind.F4:
        crossing = _first_crossing(path.values, path.dt_grid, F4_RADIUS)
        return path.T if crossing is None else crossing
    return _endpoint_angle(path, fid.tau)


def error_column(name: str) -> str:
    return f"{name}{ERROR_SUFFIX}"


def eval_functionals(functionals: Sequence[FunctionalId], path: PathPL) -> Dict[str, Any]:
    """
    Evaluate several functionals.

    A functional that is undefined on the path (degenerate F5) gets NaN as its
    value and the error message under error_column(name).
    """
    values: Dict[str, Any] = {}
    for fid in functionals:
        try:
            values[fid.name] = eval_functional(fid, path)
        except DegenerateAngleError as exc:
            logger.warning(f"{fid.name} undefined on this path: {exc}")
            values[fid.name] = float("nan")
            values[error_column(fid.name)] = str(exc)
    return values


def value_columns(names: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> List[str]:
    """Functional columns, then an error column for each functional that failed on some row."""
    failed = [error_column(n) for n in names if any(error_column(n) in row for row in rows)]
    return list(names) + failed


def brownian_reference(
    target_variance_at_T: float,
    T: float,
    dt_grid: float,
    seed: int,
    stream: int = 0,
) -> PathPL:
    """
    Planar Brownian path with Var(B_x(T)) = Var(B_y(T)) = target_variance_at_T.

    Args:
        target_variance_at_T (float): Endpoint variance per component
        T (float): Final time
        dt_grid (float): Node spacing dividing T
        seed (int): Master seed
        stream (int): Stream index, e.g. the ensemble member

    Returns:
        PathPL: Path starting at the origin
    """
    if not target_variance_at_T > 0:
        raise ValueError(f"target variance must be positive, got {target_variance_at_T}")
    steps = int(round(T / dt_grid))
    if steps < 1 or abs(steps * dt_grid - T) > GRID_TOLERANCE * max(T, 1.0):
        raise GridMismatchError(f"T={T} is not a multiple of dt_grid={dt_grid}")
    rng = derive_rng(seed, STREAM_BROWNIAN, stream)
    scale = math.sqrt(target_variance_at_T / steps)
    increments = scale * rng.standard_normal((steps, 2))
    values = np.vstack([np.zeros((1, 2)), np.cumsum(increments, axis=0)])
    return PathPL(0.0, dt_grid, values)


@dataclass(frozen=True)
class BinSpec:
    """num_bins equal-width bins spanning [low, high]."""
    low: float
    high: float
    num_bins: int

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)) or not self.high > self.low:
            raise ValueError(f"Bin range must be finite with high > low, got [{self.low}, {self.high}]")
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be at least 1, got {self.num_bins}")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.low, self.high, self.num_bins + 1)


@dataclass
class Histogram:
    """Bin counts with explicit out-of-range slots."""
    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def to_frame(self) -> pd.DataFrame:
        """Bins in order, framed by an underflow row (-inf, low) and an overflow row (high, inf)."""
        low, high = float(self.edges[0]), float(self.edges[-1])
        return pd.DataFrame({
            "bin_left": np.concatenate([[-np.inf], self.edges[:-1], [high]]),
            "bin_right": np.concatenate([[low], self.edges[1:], [np.inf]]),
            "count": np.concatenate([[self.underflow], self.counts, [self.overflow]]).astype(np.int64),
        })


def histogram(values: Sequence[float], bin_spec: BinSpec) -> Histogram:
    """
    Count values into half-open bins [e_i, e_{i+1}); the last bin is closed.

    NaN values (degenerate functionals) are dropped with a warning.
    """
    data = np.asarray(values, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("Cannot histogram an empty sequence")
    missing = np.isnan(data)
    if missing.any():
        logger.warning(f"Dropping {int(missing.sum())} NaN values from histogram")
        data = data[~missing]

    edges = bin_spec.edges
    counts, _ = np.histogram(data, bins=edges)
    return Histogram(
        edges=edges,
        counts=counts,
        underflow=int(np.sum(data < bin_spec.low)),
        overflow=int(np.sum(data > bin_spec.high)),
    )


def functional_table(paths: Sequence[PathPL], functionals: Sequence[FunctionalId]) -> pd.DataFrame:
    """One row per path, one column per functional plus error columns where evaluation failed."""
    rows = [eval_functionals(functionals, path) for path in paths]
    return pd.DataFrame(rows, columns=value_columns([f.name for f in functionals], rows))
