"""Shared fixtures: presets, saturable curve sets, maps, and reference runs.

The heavy magnetics fixtures are session-scoped so the characterisation,
simulation, and acceptance tests amortise one build.
"""

import warnings

import pytest

from srm_forge import preset_spec
from srm_forge.characteristics import (
    build_flux_table,
    extract_for_drive,
    torque_angle_curve,
)
from srm_forge.drive import DriveConfig
from srm_forge.simulate import precompute_maps, simulate, steady_state_window

MOTORS = ("motor1", "motor2", "motor3", "motor4")


@pytest.fixture(scope="session")
def specs():
    return {m: preset_spec(m) for m in MOTORS}


@pytest.fixture(scope="session")
def sat_tables(specs):
    return {
        m: build_flux_table(specs[m], "saturable", theta_step=0.05,
                            i_max=6.0, i_step=0.1)
        for m in MOTORS
    }


@pytest.fixture(scope="session")
def sat_curves(specs, sat_tables):
    out = {}
    for m in MOTORS:
        curves = torque_angle_curve(
            specs[m], [1, 2, 3, 4, 5, 6], mode="saturable", table=sat_tables[m]
        )
        out[m] = {c.current: c for c in curves}
    return out


@pytest.fixture(scope="session")
def windows(specs, sat_tables):
    out = {}
    for m in MOTORS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out[m] = extract_for_drive(
                specs[m], 6.0, mode="saturable", table=sat_tables[m]
            )
    return out


@pytest.fixture(scope="session")
def motor4_maps(specs):
    return precompute_maps(specs["motor4"], mode="saturable")


@pytest.fixture(scope="session")
def motor4_drive(windows):
    return DriveConfig(i_ref=6.0, delta=0.2, v_dc=150.0,
                       commutation=windows["motor4"], n_r=18)


@pytest.fixture(scope="session")
def motor4_trace(specs, motor4_maps, motor4_drive):
    return simulate(specs["motor4"], motor4_maps, motor4_drive,
                    speed_rpm=600.0, t_end=0.05, dt=1e-6)


@pytest.fixture(scope="session")
def motor4_steady(motor4_trace):
    return steady_state_window(motor4_trace, 5)
