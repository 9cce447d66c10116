"""
Shared fixtures for the mdshadow test suite.
"""

import numpy as np
import pytest

from mdshadow.canonical_sampler import lattice_state
from mdshadow.md_engine import BoxSpec, PotentialSpec, SystemState


@pytest.fixture
def box():
    return BoxSpec(11.5)


@pytest.fixture
def potential():
    return PotentialSpec(2.5, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_state(box):
    """Factory for lattice states with Gaussian momenta."""

    def _make(n: int, seed: int, momentum_scale: float = 1.0) -> SystemState:
        generator = np.random.default_rng(seed)
        state = lattice_state(n, box, generator, jitter=0.3)
        return state.replace(p=momentum_scale * generator.standard_normal((n, 2)))

    return _make


@pytest.fixture
def small_config_text():
    """Tiny desk-preset overrides that run in well under a second per member."""
    return "\n".join([
        "n_particles: 4",
        "burn_in_steps: 20",
        "T: 0.5",
        "dt: [0.01]",
        "ensemble_size: 2",
        "seed: 11",
    ])
