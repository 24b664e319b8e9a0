"""Fixed-step time-domain simulation of both phases at constant speed.

The electrical state of each phase follows
    di/dt = (v - R i - omega * dlambda/dtheta) / (dlambda/di)
with the flux-linkage partials read from precomputed magnetic maps by
bilinear interpolation. The controller is evaluated once per step (zero-
order hold) and an explicit fourth-order Runge-Kutta step advances the
currents; the rotor angle advances analytically with the fixed speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import FluxLinkageTable, build_flux_table, static_torque
from .drive import DriveConfig, commutation_signals, hysteresis_step, inverter_voltage
from .geometry import MotorSpec

INDUCTANCE_FLOOR = 1e-4  # [H] incremental-inductance floor in the ODE


class SimulationError(RuntimeError):
    pass


class _Bilinear:
    """Bilinear interpolation on a (theta, i) grid, periodic in theta.

    Holds plain nested lists: the simulation loop is scalar and pure-Python
    indexing is faster and bit-stable.
    """

    def __init__(self, theta_step: float, i_step: float, values: np.ndarray, pitch: float):
        self.theta_step = theta_step
        self.i_step = i_step
        self.pitch = pitch
        self.n_theta = values.shape[0]
        self.n_i = values.shape[1]
        self.rows = [list(map(float, row)) for row in values]

    def at(self, theta: float, i: float) -> float:
        x = (theta % self.pitch) / self.theta_step
        k = int(x)
        fx = x - k
        k0 = k % self.n_theta
        k1 = (k + 1) % self.n_theta
        y = i / self.i_step
        if y < 0.0:
            y = 0.0
        j = int(y)
        if j >= self.n_i - 1:
            j = self.n_i - 2
        fy = y - j
        if fy > 1.0:
            fy = 1.0
        r0 = self.rows[k0]
        r1 = self.rows[k1]
        v0 = r0[j] + (r0[j + 1] - r0[j]) * fy
        v1 = r1[j] + (r1[j + 1] - r1[j]) * fy
        return v0 + (v1 - v0) * fx


@dataclass
class MagneticMaps:
    """Flux-linkage and torque tables for the phase-A loop.

    Phase B reads the same maps shifted by half a rotor pitch. Partial
    derivatives are central differences on the lambda map, interpolated
    like the maps themselves.
    """

    theta_grid: np.ndarray
    i_grid: np.ndarray
    lam: np.ndarray
    torque: np.ndarray
    pitch: float
    mode: str
    topology: str
    spec_hash: str
    _lam_t: _Bilinear = field(repr=False, default=None)
    _torque_t: _Bilinear = field(repr=False, default=None)
    _dlam_dtheta_t: _Bilinear = field(repr=False, default=None)
    _dlam_di_t: _Bilinear = field(repr=False, default=None)

    def __post_init__(self):
        th_step = float(self.theta_grid[1] - self.theta_grid[0])
        i_step = float(self.i_grid[1] - self.i_grid[0])
        d_theta = np.radians(2.0 * th_step)
        dlam_dtheta = (np.roll(self.lam, -1, axis=0) - np.roll(self.lam, 1, axis=0)) / d_theta
        dlam_di = np.gradient(self.lam, i_step, axis=1)
        self._lam_t = _Bilinear(th_step, i_step, self.lam, self.pitch)
        self._torque_t = _Bilinear(th_step, i_step, self.torque, self.pitch)
        self._dlam_dtheta_t = _Bilinear(th_step, i_step, dlam_dtheta, self.pitch)
        self._dlam_di_t = _Bilinear(th_step, i_step, dlam_di, self.pitch)

    @property
    def i_max(self) -> float:
        return float(self.i_grid[-1])

    def lam_at(self, theta: float, i: float) -> float:
        return self._lam_t.at(theta, i)

    def torque_at(self, theta: float, i: float) -> float:
        return self._torque_t.at(theta, i)

    def partials_at(self, theta: float, i: float) -> tuple[float, float]:
        """(dlambda/dtheta [Wb/rad], dlambda/di [H]) at an operating point."""
        return self._dlam_dtheta_t.at(theta, i), self._dlam_di_t.at(theta, i)


def precompute_maps(
    spec: MotorSpec,
    topology: str | None = None,
    mode: str = "saturable",
    theta_step: float = 0.1,
    i_step: float = 0.1,
    i_max: float = 8.0,
    table: FluxLinkageTable | None = None,
) -> MagneticMaps:
    """Tabulate lambda(theta, i) and torque(theta, i) over one electrical period.

    The flux table is solved at half the map angle step so the torque nodes
    use the same central difference as the static-torque evaluation.
    """
    if table is None:
        table = build_flux_table(
            spec, mode, topology, theta_step=theta_step / 2.0,
            i_max=i_max, i_step=i_step,
        )
    n_map = round(spec.rotor_pitch / theta_step)
    if 2 * n_map != len(table.theta_grid):
        raise ValueError("flux table must be sampled at half the map angle step")
    theta_grid = table.theta_grid[::2].copy()
    lam = table.lam[::2].copy()

    delta_rad = math.radians(table.theta_step)
    w = table.w
    w_hi = np.roll(w, -1, axis=0)[::2]
    w_lo = np.roll(w, 1, axis=0)[::2]
    torque = (w_hi - w_lo) / (2.0 * delta_rad)

    return MagneticMaps(
        theta_grid=theta_grid,
        i_grid=table.i_grid.copy(),
        lam=lam,
        torque=torque,
        pitch=spec.rotor_pitch,
        mode=mode,
        topology=table.topology,
        spec_hash=table.spec_hash,
    )


@dataclass
class SimulationTrace:
    """Uniform time series of one constant-speed run."""

    time: np.ndarray
    theta: np.ndarray    # absolute rotor angle [mech deg]
    i_a: np.ndarray
    i_b: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    g_a: np.ndarray
    g_b: np.ndarray
    c_a: np.ndarray
    c_b: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray
    t_total: np.ndarray
    speed_rpm: float
    dt: float
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.time)

    CSV_HEADER = "t_s,theta_mech_deg,i_A,i_B,v_A,v_B,G_A,G_B,T_A,T_B,T_total"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        cols = (self.time, self.theta, self.i_a, self.i_b, self.v_a, self.v_b,
                self.g_a, self.g_b, self.t_a, self.t_b, self.t_total)
        for row in zip(*cols):
            t, th, ia, ib, va, vb, ga, gb, ta, tb, tt = (float(x) for x in row)
            lines.append(
                f"{t!r},{th!r},{ia!r},{ib!r},{va!r},{vb!r},"
                f"{int(ga)},{int(gb)},{ta!r},{tb!r},{tt!r}"
            )
        return "\n".join(lines) + "\n"

    def slice(self, lo: int, hi: int) -> "SimulationTrace":
        return SimulationTrace(
            time=self.time[lo:hi], theta=self.theta[lo:hi],
            i_a=self.i_a[lo:hi], i_b=self.i_b[lo:hi],
            v_a=self.v_a[lo:hi], v_b=self.v_b[lo:hi],
            g_a=self.g_a[lo:hi], g_b=self.g_b[lo:hi],
            c_a=self.c_a[lo:hi], c_b=self.c_b[lo:hi],
            t_a=self.t_a[lo:hi], t_b=self.t_b[lo:hi],
            t_total=self.t_total[lo:hi],
            speed_rpm=self.speed_rpm, dt=self.dt,
            metadata=dict(self.metadata, sliced=(lo, hi)),
        )


def simulate(
    spec: MotorSpec,
    maps: MagneticMaps,
    drive: DriveConfig,
    speed_rpm: float,
    t_end: float,
    dt: float = 1e-6,
    theta0: float = 0.0,
    slew_cap: float | None = None,
) -> SimulationTrace:
    """Run both phases at constant speed under the hysteresis drive.

    The off-state diode path cannot carry negative current, so currents are
    clamped at zero. A conducting phase that leaves the hysteresis band by
    more than slew_cap (default twice the band) after having entered it
    aborts the run: the step size cannot contain the band.
    """
    if dt > 5e-6:
        raise SimulationError(f"dt = {dt} s too coarse; keep it at or below 5e-6 s")
    if speed_rpm <= 0:
        raise SimulationError("speed must be positive")
    if slew_cap is None:
        slew_cap = 2.0 * drive.delta

    omega_deg = speed_rpm * 6.0            # [mech deg / s]
    omega_rad = speed_rpm * math.pi / 30.0  # [rad/s]
    r_phase = spec.R_phase
    half_pitch = 0.5 * maps.pitch
    i_grid_max = maps.i_max

    n_steps = round(t_end / dt)
    n = n_steps + 1
    time = np.empty(n)
    theta_arr = np.empty(n)
    i_arr = [np.empty(n), np.empty(n)]
    v_arr = [np.empty(n), np.empty(n)]
    g_arr = [np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.int8)]
    c_arr = [np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.int8)]
    t_arr = [np.empty(n), np.empty(n)]

    partials = maps.partials_at
    torque_at = maps.torque_at
    floor_hits = 0
    clamp_hits = 0
    range_hits = 0

    def didt(theta_phase: float, i: float, v: float, g: int) -> float:
        nonlocal floor_hits, range_hits
        if g == 0 and i <= 0.0:
            return 0.0
        if i > i_grid_max:
            range_hits += 1
            i = i_grid_max
        lam_theta, lam_i = partials(theta_phase, i)
        if lam_i < INDUCTANCE_FLOOR:
            lam_i = INDUCTANCE_FLOOR
            floor_hits += 1
        return (v - r_phase * i - omega_rad * lam_theta) / lam_i

    i_ph = [0.0, 0.0]
    s_ph = [0, 0]
    band_in = [False, False]
    shifts = (0.0, half_pitch)
    lo_band = drive.i_ref - drive.delta
    hi_band = drive.i_ref + drive.delta

    for k in range(n):
        t = k * dt
        theta = theta0 + omega_deg * t
        c_ab = commutation_signals(theta, drive)
        time[k] = t
        theta_arr[k] = theta

        for p in range(2):
            c = c_ab[p]
            i_now = i_ph[p]
            s = hysteresis_step(i_now, drive, s_ph[p])
            s_ph[p] = s
            g = 1 if (s and c) else 0
            v = inverter_voltage(g, i_now, drive)

            if not c:
                band_in[p] = False
            elif lo_band <= i_now <= hi_band:
                band_in[p] = True
            if c and band_in[p]:
                if i_now > hi_band + slew_cap or i_now < lo_band - slew_cap:
                    raise SimulationError(
                        f"phase {'AB'[p]} current {i_now:.3f} A left the hysteresis "
                        f"band by more than {slew_cap:.3f} A at t = {t:.6e} s; "
                        f"use a smaller dt"
                    )

            th_p = theta - shifts[p]
            i_arr[p][k] = i_now
            v_arr[p][k] = v
            g_arr[p][k] = g
            c_arr[p][k] = c
            t_arr[p][k] = torque_at(th_p, i_now)

            if k == n_steps:
                continue

            k1 = didt(th_p, i_now, v, g)
            half = 0.5 * dt
            th_mid = th_p + omega_deg * half
            k2 = didt(th_mid, i_now + half * k1, v, g)
            k3 = didt(th_mid, i_now + half * k2, v, g)
            k4 = didt(th_p + omega_deg * dt, i_now + dt * k3, v, g)
            i_next = i_now + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if i_next < 0.0:
                i_next = 0.0
                clamp_hits += 1
            i_ph[p] = i_next

    t_total = t_arr[0] + t_arr[1]
    return SimulationTrace(
        time=time, theta=theta_arr,
        i_a=i_arr[0], i_b=i_arr[1],
        v_a=v_arr[0], v_b=v_arr[1],
        g_a=g_arr[0], g_b=g_arr[1],
        c_a=c_arr[0], c_b=c_arr[1],
        t_a=t_arr[0], t_b=t_arr[1],
        t_total=t_total,
        speed_rpm=speed_rpm, dt=dt,
        metadata={
            "theta0": theta0,
            "pitch": maps.pitch,
            "spec_hash": maps.spec_hash,
            "mode": maps.mode,
            "topology": maps.topology,
            "drive": {
                "i_ref": drive.i_ref, "delta": drive.delta, "v_dc": drive.v_dc,
                "theta_on": drive.commutation.theta_on,
                "theta_off": drive.commutation.theta_off,
                "alpha": drive.commutation.alpha, "beta": drive.commutation.beta,
                "unaligned_angle": drive.commutation.unaligned_angle,
                "chopping": drive.chopping,
            },
            "inductance_floor_hits": floor_hits,
            "zero_clamp_hits": clamp_hits,
            "map_range_hits": range_hits,
            "settling_policy": "discard 3 electrical cycles",
        },
    )


def cycle_boundaries(trace: SimulationTrace) -> list[int]:
    """Sample indices nearest to rotor positions theta = 0 (mod pitch)."""
    pitch = trace.metadata["pitch"]
    omega_deg = trace.speed_rpm * 6.0
    theta0 = trace.theta[0]
    t0 = trace.time[0]
    first = math.ceil((theta0 - 1e-9) / pitch)  # next multiple of pitch at/after start
    boundaries = []
    k = first
    t_end = trace.time[-1]
    while True:
        t_b = t0 + (k * pitch - theta0) / omega_deg
        if t_b > t_end + 1e-12:
            break
        idx = round((t_b - t0) / trace.dt)
        if 0 <= idx < len(trace):
            boundaries.append(idx)
        k += 1
    return boundaries


def steady_state_window(
    trace: SimulationTrace,
    n_cycles: int,
    settle_cycles: int = 3,
) -> SimulationTrace:
    """Trailing n_cycles slice aligned to electrical-cycle boundaries.

    The first settle_cycles cycles are treated as transient and may not
    overlap the returned window.
    """
    if n_cycles < 1:
        raise ValueError("need at least one cycle")
    bounds = cycle_boundaries(trace)
    if len(bounds) < n_cycles + 1:
        raise SimulationError(
            f"trace too short: {len(bounds)} cycle boundaries, "
            f"need {n_cycles + 1} plus {settle_cycles} settling cycles"
        )
    lo = bounds[-(n_cycles + 1)]
    hi = bounds[-1]
    omega_deg = trace.speed_rpm * 6.0
    settle_time = settle_cycles * trace.metadata["pitch"] / omega_deg
    if trace.time[lo] + 0.5 * trace.dt < trace.time[0] + settle_time:
        raise SimulationError(
            f"trace too short: steady window would start at t = {trace.time[lo]:.6f} s, "
            f"inside the {settle_cycles}-cycle settling interval"
        )
    return trace.slice(lo, hi + 1)
