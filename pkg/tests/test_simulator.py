import math

import numpy as np
import pandas as pd
import pytest

from tte_stability.exceptions import NotAnEquilibriumError, ValidationError
from tte_stability.models import ORIGINAL, SmibParams, Trajectory
from tte_stability.smib import smib_network


@pytest.fixture
def sim(study):
    return study.mm.sim


@pytest.fixture
def undamped(sim):
    params = SmibParams(delta_s=math.pi / 6, alpha=0.0, beta=10.0)
    return params, smib_network(params)


def _near_sep(system, radius, count, seed=0):
    rng = np.random.default_rng(seed)
    states = np.tile(system.sep_state(), (count, 1))
    states[:, 0::2] += rng.uniform(-radius, radius, size=(count, system.base.m))
    states[:, 1::2] = rng.normal(scale=0.5, size=(count, system.base.m))
    return states


class TestRightHandSide:

    @pytest.mark.parametrize("order", list(range(1, 16)) + [ORIGINAL])
    def test_zero_at_postfault_equilibrium(self, sim, cont1, order):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, order)
        assert np.abs(sim.rhs(system, system.sep_state())).max() < 1e-9

    def test_zero_at_smib_unstable_equilibrium(self, sim, undamped):
        params, net = undamped
        system = sim.build_tte_system(net, [params.delta_s], ORIGINAL)
        assert np.abs(sim.rhs(system, [params.delta_u1, 0.0])).max() < 1e-9

    def test_zero_at_order_two_uep(self, study, sim, undamped):
        params, net = undamped
        system = sim.build_tte_system(net, [params.delta_s], 2)
        uep = study.smib.uep_closed_form(params, 2).value
        assert np.abs(sim.rhs(system, [uep, 0.0])).max() < 1e-9

    def test_order_two_matches_polynomial_form(self, sim, smib_params):
        net = smib_network(smib_params)
        system = sim.build_tte_system(net, [smib_params.delta_s], 2)
        ds, a, b = smib_params.delta_s, smib_params.alpha, smib_params.beta
        for delta, omega in [(0.1, 0.0), (1.2, -0.7), (2.5, 1.3)]:
            x = delta - ds
            expected = -a * omega - b * (math.cos(ds) * x - 0.5 * math.sin(ds) * x**2)
            out = sim.rhs(system, [delta, omega])
            assert out[0] == omega
            assert out[1] == pytest.approx(expected, abs=1e-12)

    def test_high_order_agrees_with_original_near_sep(self, sim, cont1):
        original = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, ORIGINAL)
        tte15 = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 15)
        states = _near_sep(original, 0.3, 50)
        np.testing.assert_allclose(sim.rhs(tte15, states), sim.rhs(original, states), atol=1e-9)

    @pytest.mark.parametrize("order", [3, ORIGINAL])
    def test_uniform_angle_shift(self, sim, cont1, order):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, order)
        state = _near_sep(system, 0.5, 1)[0]
        shifted = state.copy()
        shifted[0::2] += 0.37
        np.testing.assert_allclose(sim.rhs(system, shifted), sim.rhs(system, state), atol=1e-9)

    def test_batched_shape(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 4)
        states = _near_sep(system, 0.2, 6).reshape(2, 3, 6)
        assert sim.rhs(system, states).shape == (2, 3, 6)


class TestBuildSystem:

    def test_rejects_non_equilibrium(self, sim, cont1):
        with pytest.raises(NotAnEquilibriumError):
            sim.build_tte_system(cont1.postfault, cont1.prefault_sep, 3)

    @pytest.mark.parametrize("order", [0, 16, "seven"])
    def test_rejects_bad_order(self, sim, cont1, order):
        with pytest.raises(ValidationError):
            sim.build_tte_system(cont1.postfault, cont1.postfault_sep, order)

    def test_rejects_wrong_sep_size(self, sim, cont1):
        with pytest.raises(ValidationError):
            sim.build_tte_system(cont1.postfault, [0.0, 0.1], 3)

    def test_default_frames(self, sim, cont1, smib_original):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 2)
        assert system.frame == "coi"
        assert smib_original.frame == "absolute"
        assert system.coeffs.shape == (3, 3, 3)


class TestJacobian:

    @staticmethod
    def _finite_difference(sim, system, state, h=1e-6):
        state = np.asarray(state, dtype=float)
        jac = np.empty((state.size, state.size))
        for k in range(state.size):
            step = np.zeros_like(state)
            step[k] = h
            jac[:, k] = (sim.rhs(system, state + step) - sim.rhs(system, state - step)) / (2 * h)
        return jac

    def test_first_order_is_linearization(self, sim, cont1):
        original = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, ORIGINAL)
        tte1 = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 1)
        numeric = self._finite_difference(sim, original, original.sep_state())
        np.testing.assert_allclose(sim.jacobian(tte1, tte1.sep_state()), numeric, atol=1e-6)

    @pytest.mark.parametrize("order", [4, ORIGINAL])
    def test_analytic_matches_finite_difference(self, sim, cont1, order):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, order)
        state = _near_sep(system, 0.4, 1, seed=5)[0]
        numeric = self._finite_difference(sim, system, state)
        np.testing.assert_allclose(sim.jacobian(system, state), numeric, atol=1e-6)

    def test_smib_jacobian(self, sim, smib_params, smib_original):
        jac = sim.jacobian(smib_original, smib_original.sep_state())
        expected = [[0.0, 1.0], [-smib_params.beta * math.cos(smib_params.delta_s), -smib_params.alpha]]
        np.testing.assert_allclose(jac, expected, atol=1e-12)


class TestIntegrate:

    def test_stays_at_equilibrium(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, ORIGINAL)
        traj = sim.integrate(system, system.sep_state(), 1.0, 0.01)
        assert len(traj.times) == 101
        np.testing.assert_allclose(traj.states, np.broadcast_to(system.sep_state(), traj.states.shape), atol=1e-8)

    def test_last_step_lands_on_horizon(self, sim, smib_original):
        traj = sim.integrate(smib_original, smib_original.sep_state(), 0.105, 0.01)
        assert traj.times[-1] == 0.105
        assert len(traj.times) == 12

    def test_fourth_order_convergence(self, sim, smib_original):
        x0 = [smib_original.expansion_sep[0] + 1.0, 0.0]
        finals = [sim.integrate(smib_original, x0, 2.0, dt, record=False).final_state for dt in (0.04, 0.02, 0.01)]
        ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
        assert 12 <= ratio <= 20

    @pytest.mark.parametrize("order", [5, ORIGINAL])
    def test_energy_conserved_without_damping(self, sim, undamped, order):
        params, net = undamped
        system = sim.build_tte_system(net, [params.delta_s], order)
        traj = sim.integrate(system, [params.delta_s + 0.5, 0.0], 10.0, 1e-3)
        assert traj.times[-1] == pytest.approx(10.0)
        energy = sim.hamiltonian(system, traj.states)
        assert (energy.max() - energy.min()) / abs(energy[0]) < 1e-6

    def test_hamiltonian_needs_single_machine_infinite_bus(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, ORIGINAL)
        with pytest.raises(ValidationError):
            sim.hamiltonian(system, system.sep_state())

    def test_cubic_system_escapes(self, sim, smib_params):
        net = smib_network(smib_params)
        tte3 = sim.build_tte_system(net, [smib_params.delta_s], 3)
        traj = sim.integrate(tte3, [4.0, 0.0], 10.0, 0.01)
        assert bool(traj.diverged)
        assert np.isfinite(traj.states).all()
        assert sim.classify_stable(traj) is False

    def test_batch_matches_single_runs(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 3)
        starts = _near_sep(system, 0.3, 3, seed=11)
        batch = sim.integrate(system, starts, 1.0, 0.01, record=False)
        assert batch.final_state.shape == (3, 6)
        for k in range(3):
            single = sim.integrate(system, starts[k], 1.0, 0.01, record=False)
            np.testing.assert_allclose(batch.final_state[k], single.final_state, rtol=1e-12, atol=1e-12)

    def test_repeatable(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 6)
        starts = _near_sep(system, 0.3, 4, seed=2)
        a = sim.integrate(system, starts, 0.5, 0.01)
        b = sim.integrate(system, starts, 0.5, 0.01)
        assert np.array_equal(a.states, b.states)

    def test_fault_on_spread_grows(self, sim, cont7):
        fault_on = sim.build_tte_system(cont7.fault_on, cont7.prefault_sep, ORIGINAL, check_equilibrium=False)
        traj = sim.integrate(fault_on, fault_on.sep_state(), 0.3, 1e-3)
        angles = traj.states[:, 0::2]
        spread = angles.max(axis=1) - angles.min(axis=1)
        assert (np.diff(spread) >= -1e-12).all()
        assert spread[-1] > spread[0]

    @pytest.mark.parametrize("horizon, dt", [(0.0, 0.01), (1.0, -0.01)])
    def test_rejects_bad_steps(self, sim, smib_original, horizon, dt):
        with pytest.raises(ValidationError):
            sim.integrate(smib_original, smib_original.sep_state(), horizon, dt)


class TestClassify:

    @staticmethod
    def _traj(final, infinite_bus=False, diverged=False):
        final = np.asarray(final, dtype=float)
        states = np.stack([np.zeros_like(final), final])
        return Trajectory(times=[0.0, 1.0], states=states, diverged=diverged, infinite_bus=infinite_bus)

    def test_spread_threshold(self, sim):
        assert sim.classify_stable(self._traj([0.0, 0.0, 3.0, 0.0])) is True
        assert sim.classify_stable(self._traj([0.0, 0.0, 3.2, 0.0])) is False

    def test_diverged_is_unstable(self, sim):
        assert sim.classify_stable(self._traj([0.0, 0.0, 0.1, 0.0], diverged=True)) is False

    def test_infinite_bus_reference_counts(self, sim):
        assert sim.classify_stable(self._traj([3.5, 0.0], infinite_bus=True)) is False
        assert sim.classify_stable(self._traj([2.0, 0.0], infinite_bus=True)) is True

    def test_relative_mode(self, sim):
        traj = self._traj([1.0, 0.0, 4.0, 0.0])
        assert sim.classify_stable(traj, mode="relative", sep=[0.9, 3.8]) is True
        with pytest.raises(ValidationError):
            sim.classify_stable(traj, mode="relative")

    def test_batched_flags(self, sim):
        final = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 5.0, 0.0]])
        states = np.stack([np.zeros_like(final), final])
        traj = Trajectory(times=[0.0, 1.0], states=states, diverged=[False, False])
        np.testing.assert_array_equal(sim.classify_stable(traj), [True, False])


class TestExport:

    def test_trajectory_csv(self, sim, cont1, tmp_path):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 2)
        traj = sim.integrate(system, system.sep_state(), 0.1, 0.01)
        path = sim.write_trajectory(traj, tmp_path / "traj.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["t", "delta_1", "delta_2", "delta_3", "domega_1", "domega_2", "domega_3"]
        assert len(frame) == 11

    def test_batched_trajectory_rejected(self, sim, cont1, tmp_path):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 2)
        traj = sim.integrate(system, np.tile(system.sep_state(), (2, 1)), 0.1, 0.01)
        with pytest.raises(ValidationError):
            sim.write_trajectory(traj, tmp_path / "traj.csv")

    def test_coefficient_rows_per_ordered_pair(self, sim, cont1):
        system = sim.build_tte_system(cont1.postfault, cont1.postfault_sep, 4)
        table = sim.coefficient_table(system)
        assert list(table.columns) == ["pair_i", "pair_j", "k", "e_k"]
        assert len(table) == 6 * 5
        row = table[(table["pair_i"] == 2) & (table["pair_j"] == 3) & (table["k"] == 3)]
        assert row["e_k"].item() == system.coeffs[3, 1, 2]

    def test_coefficient_rows_for_infinite_bus(self, sim, smib_params):
        system = sim.build_tte_system(smib_network(smib_params), [smib_params.delta_s], 3)
        table = sim.coefficient_table(system)
        assert table["pair_j"].tolist() == [0] * 4
        np.testing.assert_allclose(
            table["e_k"], [math.sin(smib_params.delta_s), math.cos(smib_params.delta_s),
                           -math.sin(smib_params.delta_s) / 2, -math.cos(smib_params.delta_s) / 6],
            atol=1e-15,
        )

    def test_original_system_has_no_coefficients(self, sim, smib_original):
        with pytest.raises(ValidationError):
            sim.coefficient_table(smib_original)
