"""
Initial conditions from the canonical density C exp(-beta H) via Langevin dynamics.

The sampler places particles on a perturbed square lattice, draws Gaussian
momenta and then runs BAOAB Langevin dynamics for a burn-in period. The
normalization constant C is never needed.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ThermostatInstabilityError
from .md_engine import (
    BoxSpec,
    ForceField,
    PotentialSpec,
    SystemState,
    compute_forces,
    wrap_positions,
)

logger = logging.getLogger(__name__)

# Spawn-key tags for independent random streams
STREAM_INITIAL = 0
STREAM_BROWNIAN = 1

MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class ThermostatSpec:
    """Langevin thermostat parameters."""
    beta: float = 1.0
    gamma: float = 1.0
    langevin_dt: float = 0.01
    burn_in_steps: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.langevin_dt > 0:
            raise ValueError(f"langevin_dt must be positive, got {self.langevin_dt}")
        if self.burn_in_steps < 1:
            raise ValueError(f"burn_in_steps must be at least 1, got {self.burn_in_steps}")
        if not 0 <= self.seed < MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def friction_factors(self) -> Tuple[float, float]:
        """(c1, c3) for the exact Ornstein-Uhlenbeck substep of length langevin_dt."""
        c1 = math.exp(-self.gamma * self.langevin_dt)
        c3 = math.sqrt((1.0 - c1 * c1) / self.beta)
        return c1, c3


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """
    Independent generator for the stream identified by (master_seed, *keys).

    Args:
        master_seed (int): Experiment-level seed
        *keys (int): Stream path, e.g. (STREAM_INITIAL, member_index)

    Returns:
        np.random.Generator: PCG64 generator seeded from a SeedSequence
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(sequence)


def lattice_state(n: int, box: BoxSpec, rng: np.random.Generator, jitter: float = 0.1) -> SystemState:
    """
    Zero-momentum state with particles on a randomly perturbed square lattice.

    Args:
        n (int): Number of particles
        box (BoxSpec): Periodic domain
        rng (np.random.Generator): Random stream for the perturbation
        jitter (float): Perturbation amplitude as a fraction of the lattice spacing

    Returns:
        SystemState: Overlap-free starting configuration
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    per_side = int(math.ceil(math.sqrt(n)))
    spacing = box.side_length / per_side
    if spacing < 1.0:
        logger.warning(f"Lattice spacing {spacing:.3f} is below the LJ core size; burn-in may be unstable")

    ix, iy = np.divmod(np.arange(n), per_side)
    sites = (np.column_stack([ix, iy]) + 0.5) * spacing
    offsets = rng.uniform(-0.5, 0.5, size=(n, 2)) * (jitter * spacing)
    return SystemState(wrap_positions(sites + offsets, box), np.zeros((n, 2)))


def baoab_step(
    state: SystemState,
    force: ForceField,
    dt: float,
    c1: float,
    c3: float,
    box: BoxSpec,
    spec: PotentialSpec,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[SystemState, ForceField]:
    """
    One BAOAB Langevin step with a cached force.

    With c1 = 1 and c3 = 0 the friction and noise vanish and the step is a
    kick-drift-kick velocity Verlet step.

    Args:
        state (SystemState): Current state
        force (ForceField): Forces at state.q
        dt (float): Step length
        c1 (float): Momentum damping factor exp(-gamma dt)
        c3 (float): Noise scale sqrt((1 - c1^2) / beta)
        box (BoxSpec): Periodic domain
        spec (PotentialSpec): Potential parameters
        rng (np.random.Generator, optional): Required when c3 != 0

    Returns:
        Tuple[SystemState, ForceField]: New state and the forces at its positions
    """
    p = state.p + (0.5 * dt) * force.f
    q = wrap_positions(state.q + (0.5 * dt) * p, box)
    if c3 != 0.0:
        if rng is None:
            raise ValueError("rng is required when the noise scale is non-zero")
        p = c1 * p + c3 * rng.standard_normal(p.shape)
    else:
        p = c1 * p
    q = wrap_positions(q + (0.5 * dt) * p, box)
    if not np.all(np.isfinite(q)):
        raise ThermostatInstabilityError("Non-finite positions in Langevin step", dt=dt)
    new_force = compute_forces(SystemState(q, p), box, spec)
    p = p + (0.5 * dt) * new_force.f
    return SystemState(q, p), new_force


def sample_canonical(
    box: BoxSpec,
    potential: PotentialSpec,
    n: int,
    thermo: ThermostatSpec,
    rng: Optional[np.random.Generator] = None,
) -> SystemState:
    """
    Draw one state approximately distributed as exp(-beta H).

    Args:
        box (BoxSpec): Periodic domain
        potential (PotentialSpec): Potential parameters
        n (int): Number of particles, at least 2
        thermo (ThermostatSpec): Thermostat parameters; thermo.seed is used when rng is None
        rng (np.random.Generator, optional): Explicit random stream

    Returns:
        SystemState: Thermalized state

    Raises:
        ValueError: If n < 2
        ThermostatInstabilityError: If the burn-in produces non-finite values
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    box.check_cutoff(potential)
    if rng is None:
        rng = derive_rng(thermo.seed, STREAM_INITIAL)

    state = lattice_state(n, box, rng)
    state = state.replace(p=rng.standard_normal((n, 2)) / math.sqrt(thermo.beta))
    force = compute_forces(state, box, potential)
    c1, c3 = thermo.friction_factors()

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, thermo.burn_in_steps + 1):
            try:
                state, force = baoab_step(state, force, thermo.langevin_dt, c1, c3, box, potential, rng)
            except ThermostatInstabilityError:
                state = state.replace(q=np.full_like(state.q, np.nan))
            if not (state.is_finite() and np.all(np.isfinite(force.f))):
                logger.error(f"Thermostat blew up at burn-in step {step}")
                raise ThermostatInstabilityError(
                    f"Non-finite state at burn-in step {step}; reduce langevin_dt ({thermo.langevin_dt})",
                    step=step,
                    dt=thermo.langevin_dt,
                )

    logger.debug(f"Burn-in finished: n={n}, steps={thermo.burn_in_steps}, KE={state.kinetic_energy():.4f}")
    return state


def remove_com_velocity(state: SystemState) -> SystemState:
    """Subtract the mean momentum from every particle; positions unchanged."""
    if state.n < 1:
        raise ValueError("State has no particles")
    p = state.p - state.p.mean(axis=0)
    return state.replace(p=p)


def kick_particle(state: SystemState, index: int, dv: Sequence[float]) -> SystemState:
    """
    Add dv to the momentum of one particle.

    Raises:
        IndexError: If index is outside [0, n)
    """
    if not 0 <= index < state.n:
        raise IndexError(f"Particle index {index} out of range for n={state.n}")
    p = np.array(state.p)
    p[index] += np.asarray(dv, dtype=float)
    return state.replace(p=p)
