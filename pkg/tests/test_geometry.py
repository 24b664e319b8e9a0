"""Geometry, presets, and air-gap permeance primitives."""

import json
import math

import numpy as np
import pytest

from srm_forge.geometry import (
    MU0,
    BHCurve,
    MotorSpec,
    SpecError,
    airgap_reluctance,
    bore_diameter,
    load_motor_spec,
    motor_spec_from_dict,
    preset_spec,
    overlap_arc,
    _preset_dict,
)


def overlap_oracle(displacement, tooth_arc, beta_r, pitch, step=1e-3):
    """Brute-force arc intersection with the nearest rotor pole.

    Measures the tooth face covered by the single rotor pole closest to the
    tooth centre, sampled on a fine angular grid; a tooth wider than the
    inter-pole gap can additionally touch the next pole near
    anti-alignment, which the permeance model leaves to the fringing floor.
    """
    d = (displacement + pitch / 2) % pitch - pitch / 2
    xs = np.arange(-tooth_arc / 2, tooth_arc / 2, step) + step / 2
    covered = np.abs(xs - d) < beta_r / 2
    return covered.sum() * step


class TestPresets:
    def test_motor4_pm_lengths(self):
        spec = preset_spec("table1-motor4")
        assert spec.l_PM1 == 5.0
        assert spec.l_PM2 == 10.0

    def test_motor1_no_pm_sets(self):
        spec = preset_spec("table1-motor1")
        assert spec.pm_sets() == ()
        assert spec.N_pole == 90

    def test_reference_values(self):
        spec = preset_spec("table1-motor2")
        assert spec.N_r == 18
        assert spec.m_teeth == 2
        assert spec.n_ccores == 4
        assert spec.beta_s == 8.4
        assert spec.beta_s_wide == 11.9
        assert spec.beta_r == 8.8
        assert spec.l_g == 0.3
        assert spec.L_stack == 20.0
        assert spec.active_volume == 0.320

    def test_preset_round_trip(self):
        for k in range(1, 5):
            spec = preset_spec(f"table1-motor{k}")
            again = load_motor_spec(spec.to_json())
            assert again == spec
            assert again.spec_hash() == spec.spec_hash()

    def test_pm_volumes(self):
        assert preset_spec("motor1").pm_volume_ml() == 0.0
        assert preset_spec("motor2").pm_volume_ml() == pytest.approx(2.0)
        assert preset_spec("motor3").pm_volume_ml() == pytest.approx(4.0)
        assert preset_spec("motor4").pm_volume_ml() == pytest.approx(6.0)


class TestSpecValidation:
    def test_zero_airgap_rejected(self):
        data = _preset_dict("motor1")
        data["l_g"] = 0.0
        with pytest.raises(SpecError, match="air-gap length must be positive"):
            motor_spec_from_dict(data)

    def test_wide_arc_consistency(self):
        data = _preset_dict("motor1")
        data["a_ext"] = 2.0  # no longer beta_s_wide - beta_s
        with pytest.raises(SpecError, match="beta_s_wide"):
            motor_spec_from_dict(data)

    def test_rotor_arc_below_pitch(self):
        data = _preset_dict("motor1")
        data["beta_r"] = 21.0
        with pytest.raises(SpecError, match="rotor pitch"):
            motor_spec_from_dict(data)

    def test_pm_topology_requires_magnets(self):
        data = _preset_dict("motor2")
        data["l_PM1"] = 0.0
        with pytest.raises(SpecError, match="pm1"):
            motor_spec_from_dict(data)

    def test_malformed_json(self):
        with pytest.raises(SpecError, match="not valid JSON"):
            load_motor_spec("{not json")

    def test_unknown_preset(self):
        with pytest.raises(SpecError, match="unknown preset"):
            load_motor_spec(json.dumps({"preset": "table1-motor9"}))

    def test_preset_with_override(self):
        spec = load_motor_spec(json.dumps({"preset": "table1-motor1",
                                           "R_phase": 0.3}))
        assert spec.R_phase == 0.3
        assert spec.N_pole == 90


class TestBHCurve:
    def test_default_knee(self):
        spec = preset_spec("motor1")
        assert spec.lamination.knee_b == 1.9

    def test_monotone_required(self):
        with pytest.raises(SpecError):
            BHCurve("bad", ((0.0, 0.0), (10.0, 0.5), (5.0, 0.7)), 1.9)

    def test_origin_required(self):
        with pytest.raises(SpecError):
            BHCurve("bad", ((1.0, 0.1), (10.0, 0.5)), 1.9)

    def test_secant_mu_positive_finite(self):
        bh = preset_spec("motor1").lamination
        for b in (0.0, 0.1, 1.0, 1.9, 2.5, 4.0):
            mu = bh.secant_mu(b)
            assert 0 < mu < float("inf")
        # beyond the last point the curve continues at the air slope
        h_deep = bh.h_at_b(3.0)
        assert h_deep == pytest.approx(bh.points[-1][0] + (3.0 - bh.points[-1][1]) / MU0)


class TestBore:
    def test_reference_stackup(self):
        spec = preset_spec("motor1")
        # 94 - 2*(4.6 + 10.8 + 3.2 + 2.8)
        assert bore_diameter(spec) == pytest.approx(51.2)

    def test_zero_bore_rejected(self):
        data = _preset_dict("motor1")
        data["D_o"] = 2 * (4.6 + 10.8 + 3.2 + 2.8)
        spec = motor_spec_from_dict(data)
        with pytest.raises(SpecError, match="inconsistent radial dimensions"):
            bore_diameter(spec)

    def test_doubled_thicknesses_hand_value(self):
        data = _preset_dict("motor1")
        data.update(b_sy=9.2, h_s=21.6, b_ty=6.4, h_t=5.6)
        spec = motor_spec_from_dict(data)
        assert bore_diameter(spec) == pytest.approx(94.0 - 2 * 42.8)


class TestOverlapArc:
    def test_aligned_full_overlap(self, specs):
        spec = specs["motor1"]
        assert overlap_arc(0.0, 8.4, spec) == pytest.approx(8.4)

    def test_periodicity(self, specs):
        spec = specs["motor1"]
        assert overlap_arc(20.0, 8.4, spec) == pytest.approx(
            overlap_arc(0.0, 8.4, spec))
        assert overlap_arc(27.3, 11.9, spec) == pytest.approx(
            overlap_arc(7.3, 11.9, spec), abs=1e-12)

    def test_partial_overlap_brute_force(self, specs):
        spec = specs["motor1"]
        assert overlap_arc(6.6, 8.4, spec) == pytest.approx(2.0)
        assert overlap_oracle(6.6, 8.4, 8.8, 20.0) == pytest.approx(2.0, abs=5e-3)

    def test_matches_oracle_across_displacements(self, specs):
        spec = specs["motor1"]
        for tooth in (8.4, 11.9):
            for disp in np.linspace(-25.0, 25.0, 41):
                got = overlap_arc(float(disp), tooth, spec)
                want = overlap_oracle(float(disp), tooth, spec.beta_r, 20.0)
                assert got == pytest.approx(want, abs=5e-3)

    def test_even_and_bounded(self, specs):
        spec = specs["motor1"]
        for disp in np.linspace(0, 10, 31):
            a = overlap_arc(float(disp), 8.4, spec)
            b = overlap_arc(float(-disp), 8.4, spec)
            assert a == pytest.approx(b, abs=1e-12)
            assert 0.0 <= a <= min(8.4, spec.beta_r)

    def test_piecewise_linear(self, specs):
        # interior second differences vanish except at the kink angles
        spec = specs["motor1"]
        xs = np.linspace(-10, 10, 2001)
        ys = np.array([overlap_arc(float(x), 8.4, spec) for x in xs])
        d2 = np.abs(np.diff(ys, 2))
        assert (d2 < 1e-9).sum() > len(d2) - 10


class TestAirgapReluctance:
    def test_reference_value(self, specs):
        # l_g / (mu0 * (D/2) * theta_ov * L) at full narrow-tooth overlap
        spec = specs["motor1"]
        want = (0.3e-3) / (MU0 * 0.5 * 51.2e-3 * math.radians(8.4) * 20e-3)
        got = airgap_reluctance(8.4, spec)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(3.18e6, rel=5e-3)

    def test_zero_overlap_floor_finite(self, specs):
        spec = specs["motor1"]
        r0 = airgap_reluctance(0.0, spec)
        assert np.isfinite(r0) and r0 > 0
        # floor equals an air path of l_g + h_r over the tooth face
        want = ((0.3 + 4.64) * 1e-3) / (MU0 * 0.5 * 51.2e-3 * math.radians(8.4) * 20e-3)
        assert r0 == pytest.approx(want, rel=1e-12)

    def test_gap_length_linearity(self, specs):
        data = _preset_dict("motor1")
        data["l_g"] = 0.6
        doubled = motor_spec_from_dict(data)
        base = specs["motor1"]
        assert airgap_reluctance(8.4, doubled) == pytest.approx(
            2.0 * airgap_reluctance(8.4, base), rel=1e-9)

    def test_monotone_non_increasing(self, specs):
        spec = specs["motor1"]
        values = [airgap_reluctance(float(t), spec) for t in np.linspace(0, 8.4, 100)]
        assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))
        assert all(np.isfinite(v) and v > 0 for v in values)

    def test_negative_overlap_rejected(self, specs):
        with pytest.raises(ValueError):
            airgap_reluctance(-1.0, specs["motor1"])


def test_pure_functions_bit_identical(specs):
    spec = specs["motor2"]
    for fn, args in (
        (bore_diameter, (spec,)),
        (overlap_arc, (3.123456, 8.4, spec)),
        (airgap_reluctance, (4.5678, spec)),
    ):
        assert fn(*args) == fn(*args)


def test_symmetric_variant(specs):
    sym = specs["motor4"].symmetric_variant()
    assert sym.beta_s_wide == sym.beta_s
    assert sym.a_ext == 0.0
    assert sym.wide_tooth_offset == 0.0
    # everything else untouched
    assert sym.l_PM1 == specs["motor4"].l_PM1
