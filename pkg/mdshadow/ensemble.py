"""
Ensemble simulation: per-member initial conditions and displacement paths.

Member i always draws from the stream (master_seed, STREAM_INITIAL, i), so
results do not depend on evaluation order or on the number of workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .canonical_sampler import (
    STREAM_INITIAL,
    ThermostatSpec,
    derive_rng,
    kick_particle,
    remove_com_velocity,
    sample_canonical,
)
from .md_engine import BoxSpec, PotentialSpec, SystemState
from .trajectory_observables import FunctionalId, PathPL, eval_functionals, track_particle_path

logger = logging.getLogger(__name__)

MemberResult = Union[PathPL, Dict[str, Any]]


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything needed to reproduce one ensemble member from its index."""
    box: BoxSpec
    potential: PotentialSpec
    thermostat: ThermostatSpec
    n_particles: int
    T: float
    master_seed: int
    particle: int = 0
    kick: Optional[Tuple[float, float]] = None

    def num_steps(self, dt: float) -> int:
        steps = int(round(self.T / dt))
        if steps < 1 or abs(steps * dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError(f"T={self.T} is not a multiple of dt={dt}")
        return steps


def initial_condition(spec: EnsembleSpec, member: int) -> SystemState:
    """
    Canonical draw for one member with zero total momentum, then the optional kick.

    Args:
        spec (EnsembleSpec): Ensemble parameters
        member (int): Member index

    Returns:
        SystemState: Initial state
    """
    rng = derive_rng(spec.master_seed, STREAM_INITIAL, member)
    state = sample_canonical(spec.box, spec.potential, spec.n_particles, spec.thermostat, rng=rng)
    state = remove_com_velocity(state)
    if spec.kick is not None:
        state = kick_particle(state, spec.particle, spec.kick)
    return state


def simulate_member(
    spec: EnsembleSpec,
    dt: float,
    member: int,
    state: Optional[SystemState] = None,
    record_stride: int = 1,
) -> PathPL:
    """Displacement path of the tracked particle for one member at step dt."""
    if state is None:
        state = initial_condition(spec, member)
    path, _ = track_particle_path(
        state, dt, spec.num_steps(dt), spec.box, spec.potential,
        particle=spec.particle, record_stride=record_stride,
    )
    return path


def _run_task(task: tuple) -> MemberResult:
    spec, dt, member, state, functionals = task
    path = simulate_member(spec, dt, member, state)
    if functionals is None:
        return path
    return eval_functionals(functionals, path)


def simulate_ensemble(
    spec: EnsembleSpec,
    dt: float,
    members: Sequence[int],
    workers: int = 1,
    states: Optional[Sequence[SystemState]] = None,
    functionals: Optional[Sequence[FunctionalId]] = None,
) -> List[MemberResult]:
    """
    Simulate several members, optionally reducing each path to functional values.

    Args:
        spec (EnsembleSpec): Ensemble parameters
        dt (float): Step length
        members (Sequence[int]): Member indices
        workers (int): Process count; 1 runs in-process
        states (Sequence[SystemState], optional): Precomputed initial states, one per member
        functionals (Sequence[FunctionalId], optional): If given, return {name: value} per member

    Returns:
        List: One PathPL or functional dict per member, in member order
    """
    if states is not None and len(states) != len(members):
        raise ValueError(f"Got {len(states)} initial states for {len(members)} members")
    tasks = [
        (spec, dt, member, None if states is None else states[k], None if functionals is None else tuple(functionals))
        for k, member in enumerate(members)
    ]
    logger.info(f"Simulating {len(tasks)} members at dt={dt} (T={spec.T}, workers={workers})")
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(task) for task in tasks]


def initial_conditions(spec: EnsembleSpec, members: Sequence[int], workers: int = 1) -> List[SystemState]:
    """Initial states for several members, in member order."""
    if workers > 1 and len(members) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(initial_condition, [spec] * len(members), members))
    return [initial_condition(spec, member) for member in members]
