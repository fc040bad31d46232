"""Cooling protocol: config validation, waiting-time optimization, full
runs, entropy bookkeeping, finite-shot thermometry."""

from __future__ import annotations

import math

import numpy as np
import pytest

from spinfridge import (
    DomainError,
    LindbladGenerator,
    ProtocolConfig,
    SpinNetwork,
    SwapSpec,
    attach_thermal_qubit,
    binary_entropy,
    cool_step,
    default_grid,
    entropy_accounting,
    estimate_temperature,
    ideal_waiting_schedule,
    optimize_waiting_time,
    partial_trace,
    perfect_swap,
    run_protocol,
    temperature_of,
    thermal_populations,
    thermal_product_state,
    trace_distance,
)


def chain_generator(n: int, gamma: float = 0.0) -> LindbladGenerator:
    return LindbladGenerator.from_network(
        SpinNetwork.uniform_chain(n, 1.0), gamma)


class TestProtocolConfig:
    def test_defaults(self):
        cfg = ProtocolConfig(3, 0.2)
        assert cfg.probe_beta_tildes == (math.inf,) * 3
        assert cfg.swap.mode == "perfect"
        assert cfg.steps == 40
        assert cfg.waiting_policy == "optimized"

    def test_bath_entropy(self):
        cfg = ProtocolConfig(2, 0.2)
        assert cfg.bath_entropy == pytest.approx(binary_entropy(0.2),
                                                 abs=1e-15)

    def test_probe_hotter_than_bath_rejected(self):
        with pytest.raises(DomainError):
            ProtocolConfig(2, 0.5, probe_beta_tildes=(0.5, 0.3))

    def test_probe_at_bath_accepted(self):
        cfg = ProtocolConfig(2, 0.5, probe_beta_tildes=(0.5, 0.5))
        assert cfg.probe_beta_tildes == (0.5, 0.5)

    @pytest.mark.parametrize("kwargs", [
        {"probe_size": 0, "bath_beta_tilde": 0.2},
        {"probe_size": 2, "bath_beta_tilde": 0.0},
        {"probe_size": 2, "bath_beta_tilde": math.inf},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "coupling": 0.0},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "dephasing_rate": -1.0},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "steps": -1},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "waiting_policy": "random"},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "grid_spacing": 3.0},
        {"probe_size": 2, "bath_beta_tilde": 0.2,
         "probe_beta_tildes": (0.9,)},
        {"probe_size": 2, "bath_beta_tilde": 0.2,
         "waiting_policy": "schedule"},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "steps": 3,
         "waiting_policy": "schedule", "tau_schedule": (1.0, 2.0)},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "steps": 2,
         "waiting_policy": "schedule", "tau_schedule": (1.0, -0.5)},
        {"probe_size": 2, "bath_beta_tilde": 0.2, "steps": 2,
         "tau_schedule": (1.0, 2.0)},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(DomainError):
            ProtocolConfig(**kwargs)


class TestDefaultGrid:
    def test_span_and_spacing(self):
        grid = default_grid(3)
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(3.0, abs=1e-12)
        assert len(grid) == 301
        assert np.allclose(np.diff(grid), 0.01)


class TestAttachThermalQubit:
    def test_joint_register(self):
        probe = thermal_product_state([0.5, 0.5])
        joint = attach_thermal_qubit(probe, 0.2)
        assert joint.register.labels == (0, 1, 2)

    def test_reduced_states_preserved(self):
        probe = thermal_product_state([0.7, 1.4])
        joint = attach_thermal_qubit(probe, 0.2)
        qubit = partial_trace(joint, keep=(0,))
        rest = partial_trace(joint, keep=(1, 2))
        assert temperature_of(qubit).beta_tilde == pytest.approx(0.2,
                                                                 abs=1e-12)
        assert trace_distance(rest, probe) < 1e-13

    def test_blocked_assembly_matches_dense(self, rng):
        from conftest import random_blocked_state
        probe = random_blocked_state(rng, 3)
        blocked = attach_thermal_qubit(probe, 0.4)
        dense = attach_thermal_qubit(probe.to_dense(), 0.4)
        assert blocked.is_blocked
        assert trace_distance(blocked, dense) < 1e-13

    def test_qubit_slot_must_be_free(self):
        probe = thermal_product_state([0.5])
        joint = attach_thermal_qubit(probe, 0.2)
        with pytest.raises(DomainError):
            attach_thermal_qubit(joint, 0.2)


class TestOptimizeWaitingTime:
    def post_first_swap_probe(self, n: int = 2, bath: float = 0.2):
        """Probe after round 1 of the ideal protocol: site 1 holds chi(bath),
        the rest stay fully polarized."""
        return thermal_product_state([bath] + [math.inf] * (n - 1))

    def test_pure_probe_ties_resolve_to_time_zero(self):
        # A fully polarized probe is stationary: every grid time ties, the
        # earliest (J*tau = 0) must win.
        probe = thermal_product_state([math.inf] * 2)
        jtau, predicted = optimize_waiting_time(probe, chain_generator(2))
        assert jtau == 0.0
        assert predicted.is_zero_temperature

    def test_two_site_optimum(self):
        # Round-2 optimum of the ideal N=2 run: a perfect polarization
        # revival would need J*tau = pi/4 ~ 0.785; the 0.01 grid gives 0.79.
        probe = self.post_first_swap_probe()
        jtau, predicted = optimize_waiting_time(probe, chain_generator(2))
        assert jtau == pytest.approx(0.79, abs=1e-12)
        assert predicted.beta_tilde == pytest.approx(10.1744342, abs=1e-6)

    def test_ideal_scan_ignores_dephasing(self):
        probe = self.post_first_swap_probe()
        clean = optimize_waiting_time(probe, chain_generator(2))
        noisy = optimize_waiting_time(probe, chain_generator(2, 0.8))
        assert noisy[0] == clean[0]
        assert noisy[1].beta_tilde == pytest.approx(clean[1].beta_tilde,
                                                    abs=1e-12)

    def test_dissipative_scan_differs(self):
        probe = self.post_first_swap_probe()
        gen = chain_generator(2, 0.8)
        ideal_beta = optimize_waiting_time(probe, gen)[1].beta_tilde
        _, dissipative = optimize_waiting_time(probe, gen, use_ideal=False)
        assert dissipative.beta_tilde < ideal_beta

    def test_coupling_rescales_physical_time(self):
        probe = self.post_first_swap_probe()
        gen2 = LindbladGenerator.from_network(
            SpinNetwork.uniform_chain(2, 2.0))
        jtau, predicted = optimize_waiting_time(probe, gen2, coupling=2.0)
        assert jtau == pytest.approx(0.79, abs=1e-12)
        assert predicted.beta_tilde == pytest.approx(10.1744342, abs=1e-6)

    @pytest.mark.parametrize("grid", [[], [0.2, 0.1], [-0.5, 0.0]])
    def test_bad_grids_rejected(self, grid):
        probe = self.post_first_swap_probe()
        with pytest.raises(DomainError):
            optimize_waiting_time(probe, chain_generator(2), grid)

    def test_register_mismatch_rejected(self):
        probe = thermal_product_state([math.inf] * 3)
        with pytest.raises(DomainError):
            optimize_waiting_time(probe, chain_generator(2))


class TestCoolStep:
    def test_stationary_probe_emits_at_bath(self):
        probe = thermal_product_state([0.2] * 3)
        next_probe, qubit, record = cool_step(
            probe, 0.2, chain_generator(3), SwapSpec.perfect(), tau=1.3)
        assert record.qubit_out.beta_tilde == pytest.approx(0.2, abs=1e-12)
        assert record.eta == 0.0
        assert trace_distance(next_probe, probe) < 1e-12

    def test_pure_probe_first_step(self):
        probe = thermal_product_state([math.inf] * 2)
        _, qubit, record = cool_step(
            probe, 0.2, chain_generator(2), SwapSpec.perfect(), tau=0.0)
        assert record.qubit_out.is_zero_temperature
        assert record.eta == 1.0
        assert record.qubit_entropy_drop == pytest.approx(
            binary_entropy(0.2), abs=1e-12)

    def test_negative_tau_rejected(self):
        probe = thermal_product_state([0.2])
        with pytest.raises(DomainError):
            cool_step(probe, 0.2, chain_generator(1), SwapSpec.perfect(), -1.0)


class TestRunProtocol:
    def test_two_site_ideal_run(self):
        report = run_protocol(ProtocolConfig(2, 0.2, steps=3))
        # step 1: the polarized probe hands out a pure qubit
        assert report.records[0].eta == pytest.approx(1.0, abs=1e-12)
        assert report.records[0].wait_jtau == 0.0
        # step 2: optimal revival on the 0.01 grid (J*tau = 0.79)
        assert report.records[1].wait_jtau == pytest.approx(0.79, abs=1e-12)
        assert report.records[1].eta == pytest.approx(0.980342887272,
                                                      abs=1e-9)
        # analytic baselines
        p0, p1 = thermal_populations(0.2)
        assert report.initial_distance == pytest.approx(1.0 - p1 ** 2,
                                                        abs=1e-12)
        assert report.records[0].distance_to_pseudothermal \
            == pytest.approx(p0, abs=1e-12)
        assert report.records[0].probe_entropy \
            == pytest.approx(binary_entropy(0.2), abs=1e-12)

    def test_report_array_properties(self):
        report = run_protocol(ProtocolConfig(2, 0.3, steps=4))
        assert report.etas.shape == (4,)
        assert report.distances.shape == (4,)
        assert report.probe_entropies.shape == (4,)
        drops = report.cumulative_entropy_drop
        assert drops.shape == (4,)
        assert np.all(np.diff(drops) >= -1e-12)
        assert [r.index for r in report.records] == [1, 2, 3, 4]

    def test_fixed_waiting_policy(self):
        report = run_protocol(ProtocolConfig(
            2, 0.2, steps=3, waiting_policy="fixed", fixed_jtau=1.0))
        assert all(r.wait_jtau == pytest.approx(1.0, abs=1e-15)
                   for r in report.records)

    def test_fixed_policy_never_beats_optimized(self):
        base = dict(probe_size=3, bath_beta_tilde=0.2, steps=6)
        optimized = run_protocol(ProtocolConfig(**base))
        fixed = run_protocol(ProtocolConfig(
            **base, waiting_policy="fixed", fixed_jtau=1.0))
        # The grid scan maximizes each emission's polarization, so its
        # total entropy extraction dominates the fixed schedule.
        assert optimized.cumulative_entropy_drop[-1] \
            >= fixed.cumulative_entropy_drop[-1] - 1e-9

    def test_schedule_policy_replays_optimized_run(self):
        base = dict(probe_size=2, bath_beta_tilde=0.2, steps=3)
        optimized = run_protocol(ProtocolConfig(**base))
        taus = tuple(r.wait_jtau for r in optimized.records)
        replayed = run_protocol(ProtocolConfig(
            **base, waiting_policy="schedule", tau_schedule=taus))
        assert tuple(r.wait_jtau for r in replayed.records) == taus
        assert np.array_equal(replayed.etas, optimized.etas)

    def test_ideal_waiting_schedule_strips_noise(self):
        noisy = ProtocolConfig(2, 0.2, steps=3, dephasing_rate=0.4,
                               swap=SwapSpec(mode="partial",
                                             interaction_strength=5.0))
        clean = ProtocolConfig(2, 0.2, steps=3)
        schedule = ideal_waiting_schedule(noisy)
        assert schedule == tuple(
            r.wait_jtau for r in run_protocol(clean).records)
        # and the schedule is usable on the noisy config itself
        replay = run_protocol(ProtocolConfig(
            2, 0.2, steps=3, dephasing_rate=0.4,
            waiting_policy="schedule", tau_schedule=schedule))
        assert len(replay.records) == 3

    def test_zero_steps(self):
        report = run_protocol(ProtocolConfig(2, 0.2, steps=0))
        assert report.records == ()
        assert report.initial_probe_entropy == pytest.approx(0.0, abs=1e-12)

    def test_thermal_start_stays_thermal(self):
        report = run_protocol(ProtocolConfig(
            2, 0.4, steps=3, probe_beta_tildes=(0.4, 0.4)))
        assert all(abs(r.eta) < 1e-12 for r in report.records)
        assert all(r.distance_to_pseudothermal < 1e-12
                   for r in report.records)

    def test_dephasing_degrades_entropy_extraction(self):
        clean = run_protocol(ProtocolConfig(2, 0.2, steps=5))
        noisy = run_protocol(ProtocolConfig(2, 0.2, steps=5,
                                            dephasing_rate=0.5))
        # step 1 is identical (the polarized probe is dephasing-invariant)
        assert noisy.records[0].eta == pytest.approx(1.0, abs=1e-12)
        assert noisy.records[1].eta < clean.records[1].eta
        # from step 2 on the noisy run has strictly extracted less in total
        clean_total = clean.cumulative_entropy_drop
        noisy_total = noisy.cumulative_entropy_drop
        assert noisy_total[0] == pytest.approx(clean_total[0], abs=1e-12)
        assert np.all(noisy_total[1:] < clean_total[1:])

    def test_partial_swap_run(self):
        report = run_protocol(ProtocolConfig(
            2, 0.2, steps=2, swap=SwapSpec.partial(5.0)))
        # eta_1 < 1: during the finite window the probe's own coupling
        # leaks excitation into the chain before the exchange completes.
        assert 0.9 < report.records[0].eta < 1.0
        audit = entropy_accounting(report)
        assert audit.passed


class TestEntropyAccounting:
    def test_ideal_run_passes(self):
        audit = entropy_accounting(run_protocol(ProtocolConfig(3, 0.2,
                                                               steps=6)))
        assert audit.passed
        assert audit.offending_step is None
        assert audit.total_drop <= audit.capacity + 1e-9
        assert audit.capacity == pytest.approx(3 * binary_entropy(0.2),
                                               abs=1e-12)

    def test_dephased_run_passes(self):
        audit = entropy_accounting(run_protocol(
            ProtocolConfig(2, 0.3, steps=5, dephasing_rate=0.4)))
        assert audit.passed

    def test_hot_probe_violates_bookkeeping(self):
        # Start the probe hotter than the bath (bypassing the config guard):
        # the first emitted qubit comes out hotter, its entropy "drop" is
        # negative, and the audit must flag it.
        cfg = ProtocolConfig(2, 0.5, steps=2)
        hot = thermal_product_state([0.1, 0.1])
        audit = entropy_accounting(run_protocol(cfg, initial_probe=hot))
        assert not audit.passed
        assert audit.offending_step == 1


class TestEstimateTemperature:
    def test_exact_inversion_on_thermal_product(self):
        probe = thermal_product_state([0.7] * 4)
        result = estimate_temperature(probe)
        assert result.beta_tilde == pytest.approx(0.7, abs=1e-12)
        assert result.stderr == 0.0
        assert not result.boundary and not result.inverted
        assert result.record is not None

    def test_finite_shots_reproducible(self):
        probe = thermal_product_state([0.2] * 3)
        a = estimate_temperature(probe, shots_per_site=200, seed=42)
        b = estimate_temperature(probe, shots_per_site=200, seed=42)
        assert a.beta_tilde == b.beta_tilde
        assert a.excited_count == b.excited_count

    def test_more_shots_tighter_stderr(self):
        probe = thermal_product_state([0.2] * 3)
        few = estimate_temperature(probe, shots_per_site=50, seed=1)
        many = estimate_temperature(probe, shots_per_site=5000, seed=1)
        assert many.stderr < few.stderr

    def test_zero_shots_rejected(self):
        probe = thermal_product_state([0.2])
        with pytest.raises(DomainError):
            estimate_temperature(probe, shots_per_site=0)

    def test_pure_probe_hits_boundary(self):
        probe = thermal_product_state([math.inf] * 2)
        result = estimate_temperature(probe, shots_per_site=100, seed=3)
        assert result.boundary
        assert math.isinf(result.beta_tilde)
