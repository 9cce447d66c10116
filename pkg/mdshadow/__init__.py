"""
mdshadow - Lennard-Jones molecular dynamics with distributional accuracy checks.

Simulates a periodic 2-D Lennard-Jones gas with Störmer-Verlet, samples
canonical initial conditions, measures path functionals and compares
ensembles through Prokhorov, bounded-Lipschitz and KS distances, including a
constructive law-preserving coupling (weak shadowing) between them.
"""

from .canonical_sampler import ThermostatSpec, kick_particle, remove_com_velocity, sample_canonical
from .distribution_metrics import (
    DistanceMatrix,
    EmpiricalSample,
    MetricResult,
    bl_distance_empirical,
    ks_distance,
    pairwise_distances,
    prokhorov_empirical,
)
from .md_engine import BoxSpec, PotentialSpec, SystemState, compute_forces, integrate, verlet_step
from .shadow_coupler import build_shadow_map, hall_matching, partition_sample, verify_weak_shadowing
from .trajectory_observables import FunctionalId, PathPL, eval_functional, sup_distance, unwrap_displacement
from .utils import log_run_to_file

__version__ = "0.3.0"
__all__ = [
    "BoxSpec",
    "PotentialSpec",
    "SystemState",
    "compute_forces",
    "verlet_step",
    "integrate",
    "ThermostatSpec",
    "sample_canonical",
    "remove_com_velocity",
    "kick_particle",
    "PathPL",
    "FunctionalId",
    "unwrap_displacement",
    "sup_distance",
    "eval_functional",
    "EmpiricalSample",
    "DistanceMatrix",
    "MetricResult",
    "pairwise_distances",
    "prokhorov_empirical",
    "bl_distance_empirical",
    "ks_distance",
    "partition_sample",
    "hall_matching",
    "build_shadow_map",
    "verify_weak_shadowing",
    "log_run_to_file",
]
