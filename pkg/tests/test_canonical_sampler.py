"""
Tests for canonical initial conditions and momentum adjustments.
"""

import numpy as np
import pytest
from scipy import stats

from mdshadow.canonical_sampler import (
    ThermostatSpec,
    baoab_step,
    derive_rng,
    kick_particle,
    lattice_state,
    remove_com_velocity,
    sample_canonical,
)
from mdshadow.errors import ThermostatInstabilityError
from mdshadow.md_engine import ForceField, SystemState, compute_forces, wrap_positions


class TestThermostatSpec:
    @pytest.mark.parametrize("field", ["beta", "gamma", "langevin_dt"])
    def test_rejects_non_positive(self, field):
        with pytest.raises(ValueError):
            ThermostatSpec(**{field: 0.0})

    def test_rejects_seed_outside_u64(self):
        with pytest.raises(ValueError):
            ThermostatSpec(seed=2 ** 64)

    def test_friction_factors(self):
        c1, c3 = ThermostatSpec(beta=2.0, gamma=1.0, langevin_dt=0.01).friction_factors()
        assert c1 == pytest.approx(np.exp(-0.01))
        assert c3 == pytest.approx(np.sqrt((1 - np.exp(-0.02)) / 2.0))


class TestStreams:
    def test_same_keys_same_stream(self):
        a = derive_rng(42, 0, 3).standard_normal(5)
        b = derive_rng(42, 0, 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_different_keys_differ(self):
        a = derive_rng(42, 0, 3).standard_normal(5)
        b = derive_rng(42, 0, 4).standard_normal(5)
        assert not np.array_equal(a, b)


class TestLattice:
    def test_no_close_pairs(self, box):
        state = lattice_state(100, box, np.random.default_rng(0))
        diffs = state.q[:, None, :] - state.q[None, :, :]
        distances = np.sqrt(np.sum(diffs ** 2, axis=2)) + np.eye(100) * 100
        assert distances.min() > 0.8 * 1.15
        assert np.all(state.p == 0)


class TestBaoab:
    def test_without_friction_or_noise_is_velocity_verlet(self, box, potential, make_state):
        state = make_state(16, seed=9)
        force = compute_forces(state, box, potential)
        dt = 0.01
        stepped, _ = baoab_step(state, force, dt, 1.0, 0.0, box, potential)

        p_half = state.p + 0.5 * dt * force.f
        q_new = wrap_positions(wrap_positions(state.q + 0.5 * dt * p_half, box) + 0.5 * dt * p_half, box)
        p_new = p_half + 0.5 * dt * compute_forces(SystemState(q_new, p_half), box, potential).f
        np.testing.assert_allclose(stepped.q, q_new, atol=1e-14)
        np.testing.assert_allclose(stepped.p, p_new, atol=1e-14)

    def test_noise_requires_rng(self, box, potential, make_state):
        state = make_state(4, seed=0)
        with pytest.raises(ValueError):
            baoab_step(state, compute_forces(state, box, potential), 0.01, 0.9, 0.1, box, potential)


class TestSampleCanonical:
    def test_deterministic_given_seed(self, box, potential):
        thermo = ThermostatSpec(burn_in_steps=50, seed=123)
        a = sample_canonical(box, potential, 16, thermo)
        b = sample_canonical(box, potential, 16, thermo)
        np.testing.assert_array_equal(a.q, b.q)
        np.testing.assert_array_equal(a.p, b.p)

    def test_requires_two_particles(self, box, potential):
        with pytest.raises(ValueError):
            sample_canonical(box, potential, 1, ThermostatSpec(burn_in_steps=1))

    def test_blow_up_is_reported(self, box, potential, monkeypatch):
        calls = []

        def failing_forces(state, box, spec):
            calls.append(1)
            value = 0.0 if len(calls) < 3 else np.inf
            return ForceField(np.full_like(state.q, value))

        monkeypatch.setattr("mdshadow.canonical_sampler.compute_forces", failing_forces)
        with pytest.raises(ThermostatInstabilityError) as excinfo:
            sample_canonical(box, potential, 4, ThermostatSpec(burn_in_steps=10, seed=1))
        assert excinfo.value.step == 2
        assert excinfo.value.dt == 0.01

    @pytest.mark.slow
    @pytest.mark.parametrize("burn_in_steps, draws", [(2000, 200), (100_000, 50)])
    def test_equipartition_and_gaussian_momenta(self, box, potential, burn_in_steps, draws):
        thermo = ThermostatSpec(burn_in_steps=burn_in_steps)
        per_dof = np.empty(draws)
        first_px = np.empty(draws)
        for k in range(draws):
            state = sample_canonical(box, potential, 16, thermo, rng=derive_rng(99, 0, k))
            per_dof[k] = 0.5 * np.mean(state.p ** 2)
            first_px[k] = state.p[0, 0]

        standard_error = per_dof.std(ddof=1) / np.sqrt(draws)
        assert abs(per_dof.mean() - 0.5) < 3 * standard_error
        assert abs(stats.skew(first_px)) < 3 * np.sqrt(6.0 / draws)


class TestMomentumAdjustments:
    def test_equal_momenta_become_zero(self):
        state = SystemState(np.zeros((3, 2)), np.full((3, 2), 2.5))
        np.testing.assert_array_equal(remove_com_velocity(state).p, 0.0)

    def test_zero_total_momentum_unchanged(self):
        state = SystemState(np.zeros((2, 2)), np.array([[1.0, -2.0], [-1.0, 2.0]]))
        np.testing.assert_array_equal(remove_com_velocity(state).p, state.p)

    def test_idempotent_with_zero_mean(self, rng):
        state = SystemState(rng.uniform(0, 5, (16, 2)), rng.standard_normal((16, 2)))
        once = remove_com_velocity(state)
        twice = remove_com_velocity(once)
        assert np.max(np.abs(once.p.mean(axis=0))) < 1e-14
        np.testing.assert_allclose(twice.p, once.p, atol=1e-15)
        np.testing.assert_array_equal(once.q, state.q)

    def test_zero_kick_is_identity(self, make_state):
        state = make_state(4, seed=1)
        np.testing.assert_array_equal(kick_particle(state, 0, (0.0, 0.0)).p, state.p)

    def test_kick_energy_change(self, make_state):
        state = make_state(4, seed=1)
        kicked = kick_particle(state, 0, (10.0, 0.0))
        expected = 0.5 * (2 * 10.0 * state.p[0, 0] + 100.0)
        assert kicked.kinetic_energy() - state.kinetic_energy() == pytest.approx(expected, rel=1e-12)

    def test_kick_then_remove_com(self, make_state):
        state = remove_com_velocity(kick_particle(make_state(8, seed=2), 0, (10.0, 0.0)))
        np.testing.assert_allclose(state.total_momentum(), 0.0, atol=1e-12)

    def test_kick_index_out_of_range(self, make_state):
        with pytest.raises(IndexError):
            kick_particle(make_state(4, seed=1), 4, (1.0, 0.0))
