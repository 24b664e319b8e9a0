"""Magnetic maps and the fixed-step constant-speed simulation."""

import numpy as np
import pytest

from srm_forge.characteristics import conventional_commutation
from srm_forge.drive import DriveConfig
from srm_forge.mec import flux_linkage
from srm_forge.metrics import compute_metrics
from srm_forge.simulate import (
    SimulationError,
    cycle_boundaries,
    precompute_maps,
    simulate,
    steady_state_window,
)


@pytest.fixture(scope="module")
def motor1_maps(specs):
    return precompute_maps(specs["motor1"], mode="saturable")


class TestMaps:
    def test_zero_current_row_plain_motor(self, motor1_maps):
        assert np.allclose(motor1_maps.lam[:, 0], 0.0, atol=1e-15)
        assert np.allclose(motor1_maps.torque[:, 0], 0.0, atol=1e-12)

    def test_grid_node_equals_direct_call(self, specs, motor4_maps):
        spec = specs["motor4"]
        for k, j in ((0, 0), (57, 33), (150, 80)):
            direct = flux_linkage(spec, float(motor4_maps.theta_grid[k]),
                                  float(motor4_maps.i_grid[j]), "A", "saturable")
            assert motor4_maps.lam[k, j] == direct

    def test_interpolated_lambda_near_fresh_solve(self, specs, motor4_maps):
        spec = specs["motor4"]
        for theta, cur in ((5.234, 3.33), (14.05, 6.05), (19.93, 1.27)):
            approx = motor4_maps.lam_at(theta, cur)
            exact = flux_linkage(spec, theta, cur, "A", "saturable")
            assert approx == pytest.approx(exact, rel=5e-3, abs=2e-5)

    def test_maps_periodic_in_angle(self, motor4_maps):
        for cur in (2.0, 6.0):
            assert motor4_maps.lam_at(0.0, cur) == pytest.approx(
                motor4_maps.lam_at(20.0, cur), rel=1e-12)
            assert motor4_maps.torque_at(1.0, cur) == pytest.approx(
                motor4_maps.torque_at(21.0, cur), rel=1e-12)

    def test_lambda_monotone_in_current(self, motor4_maps):
        assert (np.diff(motor4_maps.lam, axis=1) >= -1e-12).all()

    def test_torque_nodes_match_static_torque(self, specs, sat_tables):
        # map torque nodes reproduce the central-difference evaluation
        from srm_forge.characteristics import static_torque
        maps = precompute_maps(specs["motor4"], mode="saturable",
                               i_max=6.0, table=sat_tables["motor4"])
        for k, j in ((10, 20), (100, 60), (173, 41)):
            want = static_torque(specs["motor4"], float(maps.theta_grid[k]),
                                 float(maps.i_grid[j]), mode="saturable",
                                 table=sat_tables["motor4"])
            assert maps.torque[k, j] == pytest.approx(want, rel=1e-12, abs=1e-15)


class TestSimulate:
    def test_zero_bus_voltage_stays_dead(self, specs, motor4_maps, windows):
        drive = DriveConfig(i_ref=6.0, delta=0.2, v_dc=1e-6,
                            commutation=windows["motor4"], n_r=18)
        trace = simulate(specs["motor4"], motor4_maps, drive, 600.0, 0.002, 1e-6)
        assert np.allclose(trace.i_a, 0.0, atol=1e-7)
        assert np.allclose(trace.i_b, 0.0, atol=1e-7)
        assert np.allclose(trace.t_total, 0.0, atol=1e-9)

    def test_trace_length_and_uniform_step(self, motor4_trace):
        assert len(motor4_trace) == round(0.05 / 1e-6) + 1
        dt = np.diff(motor4_trace.time)
        assert np.allclose(dt, 1e-6, rtol=1e-9)

    def test_electrical_period_duration(self, motor4_trace):
        # 20 mech deg at 600 rpm (3600 deg/s) lasts 5.556 ms
        bounds = cycle_boundaries(motor4_trace)
        spans = np.diff(motor4_trace.time[bounds])
        assert np.allclose(spans, 20.0 / 3600.0, atol=2e-6)

    def test_currents_never_negative(self, motor4_trace):
        assert (motor4_trace.i_a >= 0.0).all()
        assert (motor4_trace.i_b >= 0.0).all()

    def test_gate_is_and_of_s_and_c(self, motor4_trace):
        # G never on outside the window
        assert not np.any(motor4_trace.g_a & (1 - motor4_trace.c_a))
        assert not np.any(motor4_trace.g_b & (1 - motor4_trace.c_b))

    def test_band_containment_with_one_step_slew(self, motor4_steady, motor4_drive):
        lo = motor4_drive.i_ref - motor4_drive.delta
        hi = motor4_drive.i_ref + motor4_drive.delta
        for i_ph, c_ph in ((motor4_steady.i_a, motor4_steady.c_a),
                           (motor4_steady.i_b, motor4_steady.c_b)):
            entered = False
            for k in range(1, len(i_ph)):
                if not c_ph[k]:
                    entered = False
                    continue
                if lo <= i_ph[k] <= hi:
                    entered = True
                if entered:
                    slew = abs(i_ph[k] - i_ph[k - 1]) + 1e-9
                    assert i_ph[k] <= hi + slew
                    assert i_ph[k] >= lo - slew

    def test_determinism_bit_identical(self, specs, motor4_maps, motor4_drive):
        a = simulate(specs["motor4"], motor4_maps, motor4_drive, 600.0, 0.003, 1e-6)
        b = simulate(specs["motor4"], motor4_maps, motor4_drive, 600.0, 0.003, 1e-6)
        assert np.array_equal(a.i_a, b.i_a)
        assert np.array_equal(a.t_total, b.t_total)
        assert np.array_equal(a.v_b, b.v_b)

    def test_energy_balance(self, motor4_steady):
        p_elec = float(np.mean(motor4_steady.v_a * motor4_steady.i_a
                               + motor4_steady.v_b * motor4_steady.i_b))
        omega = motor4_steady.speed_rpm * np.pi / 30.0
        p_mech = float(np.mean(motor4_steady.t_total)) * omega
        assert p_elec >= p_mech * 0.98  # winding loss keeps input above output

    def test_dt_too_coarse_rejected(self, specs, motor4_maps, motor4_drive):
        with pytest.raises(SimulationError, match="dt"):
            simulate(specs["motor4"], motor4_maps, motor4_drive, 600.0, 0.01, 1e-4)

    def test_band_escape_detected(self, specs, motor4_maps, motor4_drive):
        # an unrealistically tight slew allowance trips the dt advisory
        with pytest.raises(SimulationError, match="smaller dt"):
            simulate(specs["motor4"], motor4_maps, motor4_drive, 600.0, 0.02,
                     5e-6, slew_cap=1e-4)

    def test_csv_round_trip_header(self, motor4_steady):
        text = motor4_steady.to_csv()
        header = text.split("\n", 1)[0]
        assert header == "t_s,theta_mech_deg,i_A,i_B,v_A,v_B,G_A,G_B,T_A,T_B,T_total"


class TestSteadyWindow:
    def test_trailing_cycles_boundary_aligned(self, motor4_trace):
        steady = steady_state_window(motor4_trace, 4)
        pitch = motor4_trace.metadata["pitch"]
        for theta in (steady.theta[0], steady.theta[-1]):
            wrapped = theta % pitch
            assert min(wrapped, pitch - wrapped) < 0.01
        span = steady.time[-1] - steady.time[0]
        assert span == pytest.approx(4 * 20.0 / 3600.0, abs=1e-5)

    def test_boundaries_agree_with_theta_mod_pitch(self, motor4_trace):
        pitch = motor4_trace.metadata["pitch"]
        for idx in cycle_boundaries(motor4_trace):
            wrapped = motor4_trace.theta[idx] % pitch
            assert min(wrapped, pitch - wrapped) < 0.01

    def test_too_many_cycles_rejected(self, motor4_trace):
        with pytest.raises(SimulationError, match="too short"):
            steady_state_window(motor4_trace, 50)

    def test_settling_interval_enforced(self, specs, motor4_maps, motor4_drive):
        short = simulate(specs["motor4"], motor4_maps, motor4_drive,
                         600.0, 0.012, 1e-6)
        with pytest.raises(SimulationError, match="settling"):
            steady_state_window(short, 2, settle_cycles=3)


def test_dt_halving_changes_mean_torque_little(specs, motor4_maps, motor4_drive):
    spec = specs["motor4"]
    t_end = 0.034  # three settling plus two measured cycles
    coarse = steady_state_window(
        simulate(spec, motor4_maps, motor4_drive, 600.0, t_end, 2e-6), 2)
    fine = steady_state_window(
        simulate(spec, motor4_maps, motor4_drive, 600.0, t_end, 1e-6), 2)
    m_coarse = compute_metrics(coarse, spec)
    m_fine = compute_metrics(fine, spec)
    assert abs(m_fine.t_mean - m_coarse.t_mean) <= 0.005 * m_coarse.t_mean


def test_standstill_torque_sign(motor4_maps, windows):
    # wherever a phase window is active, that phase can pull at 6 A: start
    # capability at any rest position
    comm = windows["motor4"]
    drive = DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0, commutation=comm, n_r=18)
    from srm_forge.drive import commutation_signals
    eps = 0.02 * max(abs(float(motor4_maps.torque.max())),
                     abs(float(motor4_maps.torque.min())))
    for theta in np.arange(0.0, 20.0, 0.25):
        c_a, c_b = commutation_signals(float(theta), drive)
        torques = []
        if c_a:
            torques.append(motor4_maps.torque_at(float(theta), 6.0))
        if c_b:
            torques.append(motor4_maps.torque_at(float(theta) - 10.0, 6.0))
        assert torques and max(torques) > -eps
