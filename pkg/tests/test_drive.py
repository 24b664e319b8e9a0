"""Hysteresis comparator, commutation windows, gate logic, inverter model."""

import numpy as np
import pytest

from srm_forge.characteristics import CommutationAngles, conventional_commutation
from srm_forge.drive import (
    DriveConfig,
    commutation_signals,
    commutation_table,
    gate,
    hysteresis_step,
    inverter_voltage,
)


@pytest.fixture
def cfg():
    comm = CommutationAngles.from_alpha_beta(1.025, 0.326, 20.0, aligned_angle=19.8)
    return DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm, n_r=18)


class TestHysteresis:
    def test_below_band_demands(self, cfg):
        assert hysteresis_step(5.7, cfg, 0) == 1

    def test_above_band_drops(self, cfg):
        assert hysteresis_step(6.3, cfg, 1) == 0

    def test_in_band_memory(self, cfg):
        assert hysteresis_step(6.0, cfg, 1) == 1
        assert hysteresis_step(6.0, cfg, 0) == 0

    def test_band_edges(self, cfg):
        # edges are inside the band: the comparator holds
        assert hysteresis_step(5.8, cfg, 0) == 0
        assert hysteresis_step(6.2, cfg, 1) == 1

    def test_transitions_only_at_band_crossings(self, cfg):
        # random current walks: every state change coincides with a sample
        # beyond the band; inside the band the state never changes
        rng = np.random.default_rng(123)
        currents = rng.uniform(5.0, 7.0, size=100_000)
        s = 0
        for i_meas in currents:
            s_next = hysteresis_step(float(i_meas), cfg, s)
            if s_next != s:
                assert i_meas < 5.8 or i_meas > 6.2
            else:
                if 5.8 <= i_meas <= 6.2:
                    assert s_next == s
            s = s_next


class TestGate:
    def test_truth_table(self):
        assert gate(1, 1) == 1
        assert gate(1, 0) == 0
        assert gate(0, 1) == 0
        assert gate(0, 0) == 0

    def test_exhaustive_equals_and(self):
        for s in (0, 1):
            for c in (0, 1):
                assert gate(s, c) == (s & c)


class TestCommutationWindows:
    def test_window_width_equals_theta_on(self, cfg):
        # integrate the indicator over one electrical cycle
        thetas = np.arange(0.0, 20.0, 0.001)
        on = sum(commutation_signals(float(t), cfg)[0] for t in thetas) * 0.001
        assert on == pytest.approx(cfg.commutation.theta_on, abs=0.005)

    def test_overlap_equals_alpha_minus_beta(self, cfg):
        thetas = np.arange(0.0, 20.0, 0.001)
        both = sum(
            1 for t in thetas
            if commutation_signals(float(t), cfg) == (1, 1)
        ) * 0.001
        want = 2.0 * max(0.0, cfg.commutation.theta_on - 10.0)  # two handovers
        assert both == pytest.approx(want, abs=0.005)

    def test_zero_alpha_beta_windows_abut(self):
        comm = conventional_commutation(0.0, 20.0)
        cfg = DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm, n_r=18)
        thetas = np.arange(0.0, 20.0, 0.001)
        signals = [commutation_signals(float(t), cfg) for t in thetas]
        assert all(ca + cb == 1 for ca, cb in signals)

    def test_pitch_periodicity(self, cfg):
        for theta in (0.0, 3.7, 9.99, 15.5):
            assert commutation_signals(theta, cfg) == commutation_signals(
                theta + 20.0, cfg)

    def test_phase_b_is_half_pitch_behind(self, cfg):
        for theta in np.arange(0.0, 20.0, 0.37):
            c_a, _ = commutation_signals(float(theta), cfg)
            _, c_b = commutation_signals(float(theta) - 10.0, cfg)
            assert c_a == c_b

    def test_encoder_quantisation(self):
        comm = CommutationAngles.from_alpha_beta(1.0, 0.2, 20.0)
        cfg = DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm,
                          n_r=18, encoder_step=0.1)
        a = commutation_signals(comm.unaligned_angle + 0.04, cfg)
        b = commutation_signals(comm.unaligned_angle - 0.04, cfg)
        assert a == b  # both quantise onto the same encoder count


class TestInverter:
    def test_gate_high_applies_bus(self, cfg):
        assert inverter_voltage(1, 0.0, cfg) == 150.0
        assert inverter_voltage(1, 6.0, cfg) == 150.0

    def test_freewheel_reverses_bus(self, cfg):
        assert inverter_voltage(0, 3.0, cfg) == -150.0

    def test_diodes_block_at_zero_current(self, cfg):
        assert inverter_voltage(0, 0.0, cfg) == 0.0
        assert inverter_voltage(0, -0.1, cfg) == 0.0

    def test_device_drop(self):
        comm = conventional_commutation(0.0, 20.0)
        cfg = DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm,
                          n_r=18, device_drop=1.5)
        assert inverter_voltage(1, 1.0, cfg) == 148.5
        assert inverter_voltage(0, 1.0, cfg) == -151.5

    def test_soft_chopping(self):
        comm = conventional_commutation(0.0, 20.0)
        cfg = DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm,
                          n_r=18, chopping="soft")
        assert inverter_voltage(0, 3.0, cfg) == 0.0
        assert inverter_voltage(1, 3.0, cfg) == 150.0


class TestConfigValidation:
    def test_band_must_be_positive(self):
        comm = conventional_commutation(0.0, 20.0)
        with pytest.raises(ValueError):
            DriveConfig(i_ref=6.0, delta=0.0, v_dc=150.0, commutation=comm, n_r=18)

    def test_reference_above_band(self):
        comm = conventional_commutation(0.0, 20.0)
        with pytest.raises(ValueError):
            DriveConfig(i_ref=0.1, delta=0.2, v_dc=150.0, commutation=comm, n_r=18)

    def test_bus_voltage_positive(self):
        comm = conventional_commutation(0.0, 20.0)
        with pytest.raises(ValueError):
            DriveConfig(i_ref=6.0, delta=0.2, v_dc=0.0, commutation=comm, n_r=18)


def test_commutation_table_export(cfg):
    rows = commutation_table(cfg)
    assert [r["phase"] for r in rows] == ["A", "B"]
    a = rows[0]
    assert (a["off_angle_mech"] - a["on_angle_mech"]) % 20.0 == pytest.approx(
        cfg.commutation.theta_on)
    b = rows[1]
    assert (b["on_angle_mech"] - a["on_angle_mech"]) % 20.0 == pytest.approx(10.0)
