"""Hysteresis current control, position-based commutation, and the inverter.

The controller is a deterministic transducer: a hysteresis comparator with
in-band memory per phase, commutation windows from the extracted drive
angles, gate = comparator AND window, and a two-leg half-bridge with
free-wheeling diodes modelled as hard chopping by default.
"""

from __future__ import annotations

from dataclasses import dataclass

from .characteristics import CommutationAngles


@dataclass(frozen=True)
class DriveConfig:
    """Controller and inverter parameters.

    i_ref/delta define the hysteresis band [i_ref - delta, i_ref + delta];
    commutation carries the window geometry in mechanical degrees for an
    n_r-tooth rotor.
    """

    i_ref: float
    delta: float
    v_dc: float
    commutation: CommutationAngles
    n_r: int
    device_drop: float = 0.0
    chopping: str = "hard"              # 'hard' -> -V_dc off-state, 'soft' -> 0 V
    encoder_step: float | None = None   # optional encoder quantisation [mech deg]

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("hysteresis band delta must be positive")
        if self.v_dc <= 0:
            raise ValueError("bus voltage must be positive")
        if self.i_ref <= self.delta:
            raise ValueError("reference current must exceed the hysteresis band")
        if self.chopping not in ("hard", "soft"):
            raise ValueError("chopping must be 'hard' or 'soft'")
        if self.n_r <= 0:
            raise ValueError("rotor tooth count must be positive")

    @property
    def pitch(self) -> float:
        return 360.0 / self.n_r

    @property
    def half_pitch(self) -> float:
        return 180.0 / self.n_r


@dataclass(frozen=True)
class GateState:
    """Controller bits for both phases at one instant; G = S AND C."""

    s_a: int
    s_b: int
    c_a: int
    c_b: int

    @property
    def g_a(self) -> int:
        return self.s_a & self.c_a

    @property
    def g_b(self) -> int:
        return self.s_b & self.c_b


def hysteresis_step(i_meas: float, cfg: DriveConfig, prev_s: int) -> int:
    """Comparator with memory: demand current below the band, drop above it."""
    if i_meas < cfg.i_ref - cfg.delta:
        return 1
    if i_meas > cfg.i_ref + cfg.delta:
        return 0
    return prev_s


def commutation_signals(theta: float, cfg: DriveConfig) -> tuple[int, int]:
    """Window bits (C_A, C_B) at a rotor position [mech deg].

    Each phase conducts over a window of width theta_on starting at its
    effective unaligned position; phase B is half a pitch behind phase A.
    Windows overlap by alpha - beta when theta_on exceeds the half pitch.
    """
    if cfg.encoder_step:
        theta = round(theta / cfg.encoder_step) * cfg.encoder_step
    pitch = cfg.pitch
    start = cfg.commutation.unaligned_angle
    width = cfg.commutation.theta_on
    c_a = 1 if (theta - start) % pitch < width else 0
    c_b = 1 if (theta - start - cfg.half_pitch) % pitch < width else 0
    return c_a, c_b


def gate(s: int, c: int) -> int:
    """Gate pulse: hysteresis demand AND commutation window."""
    return 1 if (s and c) else 0


def inverter_voltage(g: int, i: float, cfg: DriveConfig) -> float:
    """Phase terminal voltage for one leg of the half-bridge.

    Gate high applies the bus; gate low returns a positive current through
    the free-wheeling diodes (hard chopping reverses the bus, soft chopping
    shorts the phase). With no current the diodes block and the phase
    floats at zero.
    """
    if g:
        return cfg.v_dc - cfg.device_drop
    if i > 0.0:
        if cfg.chopping == "hard":
            return -cfg.v_dc - cfg.device_drop
        return -cfg.device_drop
    return 0.0


def commutation_table(cfg: DriveConfig) -> list[dict]:
    """Per-cycle on/off angles for both phases [mech deg, reduced to a pitch]."""
    pitch = cfg.pitch
    rows = []
    for phase, shift in (("A", 0.0), ("B", cfg.half_pitch)):
        on = (cfg.commutation.unaligned_angle + shift) % pitch
        off = (on + cfg.commutation.theta_on) % pitch
        rows.append({"phase": phase, "on_angle_mech": on, "off_angle_mech": off})
    return rows
