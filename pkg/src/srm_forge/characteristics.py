"""Static torque-angle characteristics and commutation-angle extraction.

Torque is computed by virtual work: the co-energy at fixed rotor angle is
the current integral of the flux linkage, and torque is its central-
difference derivative over angle. A flux-linkage table over one electrical
period supports curve generation and is reused by the dynamic simulator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import MU0, MotorSpec, bore_diameter
from .mec import _loop_fixed_point, flux_linkage, loop_elements

DEFAULT_DELTA_DEG = 0.05     # central-difference half step [mech deg]
DEFAULT_QUAD_STEPS = 60      # trapezoid steps for the co-energy integral
ZERO_CROSSING_NOISE = 0.01   # crossing threshold as a fraction of curve peak


class CurveError(ValueError):
    """Raised when a torque curve cannot support the requested extraction."""


# -- flux linkage table -------------------------------------------------------


@dataclass
class FluxLinkageTable:
    """lambda(theta, i) samples over one electrical period.

    theta_grid covers [0, pitch) uniformly (wrapping); i_grid covers
    [0, i_max]. w holds the cumulative trapezoid of lambda along i, i.e.
    the co-energy at each node.
    """

    theta_grid: np.ndarray
    i_grid: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    pitch: float
    mode: str
    topology: str
    spec_hash: str

    @property
    def theta_step(self) -> float:
        return self.pitch / len(self.theta_grid)

    def _theta_index(self, theta: float) -> tuple[int, int, float]:
        x = (theta % self.pitch) / self.theta_step
        k = int(math.floor(x))
        frac = x - k
        k0 = k % len(self.theta_grid)
        k1 = (k + 1) % len(self.theta_grid)
        if frac < 1e-9:
            return k0, k0, 0.0
        if frac > 1.0 - 1e-9:
            return k1, k1, 0.0
        return k0, k1, frac

    def co_energy(self, theta: float, i: float) -> float:
        """Co-energy [J] at (theta, i); linear between theta columns."""
        if i < self.i_grid[0] - 1e-12 or i > self.i_grid[-1] + 1e-9:
            raise ValueError(f"current {i} outside table range [0, {self.i_grid[-1]}]")
        k0, k1, fr = self._theta_index(theta)
        w = self._column_co_energy(k0, i)
        if k1 != k0:
            w = (1.0 - fr) * w + fr * self._column_co_energy(k1, i)
        return w

    def _column_co_energy(self, k: int, i: float) -> float:
        ig = self.i_grid
        j = int(np.searchsorted(ig, i, side="right")) - 1
        j = min(max(j, 0), len(ig) - 1)
        w = self.w[k, j]
        di = i - ig[j]
        if di > 1e-12:
            lam_i = np.interp(i, ig, self.lam[k])
            w += 0.5 * (self.lam[k, j] + lam_i) * di
        return w

    def lam_at(self, theta: float, i: float) -> float:
        k0, k1, fr = self._theta_index(theta)
        v0 = float(np.interp(i, self.i_grid, self.lam[k0]))
        if k1 == k0:
            return v0
        v1 = float(np.interp(i, self.i_grid, self.lam[k1]))
        return (1.0 - fr) * v0 + fr * v1


def build_flux_table(
    spec: MotorSpec,
    mode: str = "saturable",
    topology: str | None = None,
    theta_step: float = 0.05,
    i_max: float = 6.0,
    i_step: float = 0.1,
    phase: str = "A",
) -> FluxLinkageTable:
    """Solve the loop on a (theta, i) grid and tabulate flux linkage."""
    pitch = spec.rotor_pitch
    n_theta = round(pitch / theta_step)
    if abs(n_theta * theta_step - pitch) > 1e-9:
        raise ValueError(f"theta_step {theta_step} must divide the pitch {pitch}")
    n_i = round(i_max / i_step)
    if abs(n_i * i_step - i_max) > 1e-9:
        raise ValueError(f"i_step {i_step} must divide i_max {i_max}")

    theta_grid = np.arange(n_theta) * theta_step
    i_grid = np.arange(n_i + 1) * i_step
    lam = np.empty((n_theta, n_i + 1))
    turns = spec.ccores_per_phase * 2.0 * spec.N_pole
    for k, theta in enumerate(theta_grid):
        elems = loop_elements(spec, float(theta), 0.0, phase, topology)
        for j, cur in enumerate(i_grid):
            # identical arithmetic to flux_linkage at the same operating point
            e = replace(elems, f_loop=2.0 * spec.N_pole * float(cur))
            phi_sy = _loop_fixed_point(spec, e, mode)[0]
            lam[k, j] = turns * phi_sy

    w = np.zeros_like(lam)
    w[:, 1:] = np.cumsum(0.5 * (lam[:, 1:] + lam[:, :-1]) * np.diff(i_grid), axis=1)
    return FluxLinkageTable(
        theta_grid=theta_grid, i_grid=i_grid, lam=lam, w=w, pitch=pitch,
        mode=mode, topology=spec.topology_id if topology is None else topology,
        spec_hash=spec.spec_hash(),
    )


# -- static torque -------------------------------------------------------------


def co_energy(
    spec: MotorSpec,
    theta: float,
    i: float,
    topology: str | None = None,
    mode: str = "saturable",
    quad_steps: int = DEFAULT_QUAD_STEPS,
) -> float:
    """Co-energy [J]: trapezoidal current integral of the flux linkage."""
    if i < 0:
        raise ValueError("current must be non-negative")
    if i == 0.0:
        return 0.0
    currents = np.linspace(0.0, i, quad_steps + 1)
    lam = [flux_linkage(spec, theta, float(c), "A", mode, topology) for c in currents]
    return float(np.trapezoid(lam, currents))


def static_torque(
    spec: MotorSpec,
    theta: float,
    i: float,
    topology: str | None = None,
    mode: str = "saturable",
    delta_deg: float = DEFAULT_DELTA_DEG,
    quad_steps: int = DEFAULT_QUAD_STEPS,
    table: FluxLinkageTable | None = None,
) -> float:
    """Static torque [N.m] from the angular derivative of co-energy.

    With a flux table the co-energy comes from its columns; otherwise each
    evaluation integrates fresh loop solves.
    """
    if i < 0:
        raise ValueError("current must be non-negative")
    if table is not None:
        w_hi = table.co_energy(theta + delta_deg, i)
        w_lo = table.co_energy(theta - delta_deg, i)
    else:
        w_hi = co_energy(spec, theta + delta_deg, i, topology, mode, quad_steps)
        w_lo = co_energy(spec, theta - delta_deg, i, topology, mode, quad_steps)
    return (w_hi - w_lo) / (2.0 * math.radians(delta_deg))


def analytic_torque_linear(spec: MotorSpec, i: float) -> float:
    """Idealised torque in the rising-overlap, gap-dominated region [N.m].

    Treats every tooth of the excited phase as a linearly growing overlap
    behind a negligible iron path; quadratic in current because the
    co-energy integrand is linear in it. Serves as an independent check on
    the virtual-work path.
    """
    d_bore = bore_diameter(spec) * 1e-3
    stack = spec.L_stack * 1e-3
    gap = spec.l_g * 1e-3
    n_loop = 2.0 * spec.N_pole  # both coils of a C-core loop in series
    per_loop = spec.m_teeth * n_loop**2 * MU0 * d_bore * stack * i**2 / (8.0 * gap)
    return spec.ccores_per_phase * per_loop


# -- torque-angle curves --------------------------------------------------------


@dataclass
class TorqueAngleCurve:
    """Static torque over one electrical period at a fixed current."""

    angles: np.ndarray   # [mech deg], uniform, endpoint included
    torque: np.ndarray   # [N.m]
    current: float
    topology: str
    mode: str
    metadata: dict = field(default_factory=dict)

    @property
    def period(self) -> float:
        return float(self.angles[-1] - self.angles[0])

    @property
    def grid_step(self) -> float:
        return float(self.angles[1] - self.angles[0])

    def net_work(self) -> float:
        """Loop integral of torque over the period [J]; ~0 for a valid curve."""
        return float(np.trapezoid(self.torque, np.radians(self.angles)))

    def to_csv(self) -> str:
        lines = ["angle_mech_deg,torque_Nm"]
        for a, t in zip(self.angles, self.torque):
            lines.append(f"{float(a)!r},{float(t)!r}")
        return "\n".join(lines) + "\n"


def torque_angle_curve(
    spec: MotorSpec,
    currents: list[float],
    topology: str | None = None,
    mode: str = "saturable",
    grid_step: float = 0.1,
    table: FluxLinkageTable | None = None,
    delta_deg: float = DEFAULT_DELTA_DEG,
) -> list[TorqueAngleCurve]:
    """One torque curve per current level over a full electrical period."""
    if not currents:
        raise ValueError("at least one current level is required")
    pitch = spec.rotor_pitch
    n = round(pitch / grid_step)
    if abs(n * grid_step - pitch) > 1e-9:
        raise ValueError(f"grid_step {grid_step} must divide the period {pitch}")
    if table is None:
        i_max = max(currents)
        table = build_flux_table(
            spec, mode, topology,
            theta_step=grid_step / 2.0,
            i_max=i_max,
            i_step=i_max / DEFAULT_QUAD_STEPS,
        )
    angles = np.arange(n + 1) * grid_step
    curves = []
    topo = spec.topology_id if topology is None else topology
    for cur in currents:
        torque = np.array([
            static_torque(spec, float(a), cur, topology, mode,
                          delta_deg=delta_deg, table=table)
            for a in angles
        ])
        curves.append(TorqueAngleCurve(
            angles=angles.copy(), torque=torque, current=cur,
            topology=topo, mode=mode,
            metadata={
                "grid_step": grid_step, "delta_deg": delta_deg,
                "spec_hash": spec.spec_hash(), "mode": mode,
            },
        ))
    return curves


# -- commutation angles ----------------------------------------------------------


@dataclass(frozen=True)
class CommutationAngles:
    """Self-starting drive angles extracted from a torque curve [mech deg].

    theta_on is the conduction window width: half a pitch widened by the
    both-phases-positive overlap (alpha) and shortened by the negative tail
    before nominal alignment (beta). theta_off is the idle remainder of the
    pitch.
    """

    alpha: float
    beta: float
    theta_on: float
    theta_off: float
    aligned_angle: float
    unaligned_angle: float

    @classmethod
    def from_alpha_beta(cls, alpha: float, beta: float, pitch: float,
                        aligned_angle: float = 0.0) -> "CommutationAngles":
        half = 0.5 * pitch
        theta_on = half + alpha - beta
        return cls(
            alpha=alpha, beta=beta, theta_on=theta_on,
            theta_off=pitch - theta_on,
            aligned_angle=aligned_angle % pitch,
            unaligned_angle=(aligned_angle - (half + alpha)) % pitch,
        )


def _threshold_crossings(angles: np.ndarray, torque: np.ndarray, eps: float):
    """(angle, direction) zero crossings; direction +1 for -..+ and -1 for +..-.

    Samples inside the +-eps noise band are treated as zero; the crossing is
    placed by linear interpolation between the bracketing out-of-band
    samples.
    """
    sign = np.zeros(len(torque), dtype=int)
    sign[torque > eps] = 1
    sign[torque < -eps] = -1
    nz = np.nonzero(sign)[0]
    crossings = []
    for a_idx, b_idx in zip(nz, nz[1:]):
        sa, sb = sign[a_idx], sign[b_idx]
        if sa == sb:
            continue
        ta, tb = torque[a_idx], torque[b_idx]
        x = angles[a_idx] + (angles[b_idx] - angles[a_idx]) * ta / (ta - tb)
        crossings.append((float(x), int(sb)))
    return crossings


def _wrap_half(x: float, pitch: float) -> float:
    """Reduce into (-pitch/2, pitch/2]."""
    y = x % pitch
    return y - pitch if y > 0.5 * pitch else y


def extract_commutation_angles(
    curve: TorqueAngleCurve,
    phase_shift: float,
    nominal_aligned: float | None = None,
) -> CommutationAngles:
    """Locate the effective aligned/unaligned positions and derive the drive angles.

    The effective aligned position is the down-crossing ending the largest
    positive torque lobe; the phase's own unaligned position starts it.
    alpha is how far the next phase's unaligned position (the same curve
    shifted by phase_shift) precedes the aligned position; beta is how far
    the aligned position precedes nominal alignment (pass the symmetric-
    tooth extraction result as nominal_aligned; defaults to this curve's
    own, giving beta = 0).
    """
    pitch = curve.period
    peak = float(np.max(np.abs(curve.torque)))
    if peak <= 0.0:
        raise CurveError("curve has no zero crossing: torque is identically zero")
    eps = ZERO_CROSSING_NOISE * peak

    # work on a doubled domain so lobes crossing the wrap stay contiguous
    ang = curve.angles[:-1]
    tq = curve.torque[:-1]
    ang2 = np.concatenate([ang, ang + pitch, ang + 2.0 * pitch])
    tq2 = np.concatenate([tq, tq, tq])
    crossings = _threshold_crossings(ang2, tq2, eps)
    if not crossings:
        raise CurveError("curve has no zero crossing within the noise threshold")

    radians = np.radians(ang2)
    best = None
    for (x_up, d_up), (x_dn, d_dn) in zip(crossings, crossings[1:]):
        if d_up != 1 or d_dn != -1:
            continue
        if not (pitch <= x_dn < 2.0 * pitch):
            continue
        mask = (ang2 >= x_up) & (ang2 <= x_dn)
        lobe_work = float(np.trapezoid(np.maximum(tq2[mask], 0.0), radians[mask]))
        if best is None or lobe_work > best[0]:
            best = (lobe_work, x_up, x_dn)
    if best is None:
        raise CurveError("curve has no positive torque lobe")

    _, theta_up_own, theta_down = best
    alpha = _wrap_half(theta_down - (theta_up_own + phase_shift), pitch)
    if nominal_aligned is None:
        beta = 0.0
    else:
        beta = _wrap_half(nominal_aligned - theta_down, pitch)
    if alpha <= 0.0:
        warnings.warn(
            f"not self-starting: alpha = {alpha:.4f} mech deg", stacklevel=2
        )
    half = 0.5 * pitch
    theta_on = half + alpha - beta
    return CommutationAngles(
        alpha=alpha,
        beta=beta,
        theta_on=theta_on,
        theta_off=pitch - theta_on,
        aligned_angle=theta_down % pitch,
        unaligned_angle=theta_up_own % pitch,
    )


def conventional_commutation(nominal_aligned: float, pitch: float) -> CommutationAngles:
    """Plain half-pitch window ending at nominal alignment (alpha = beta = 0)."""
    return CommutationAngles.from_alpha_beta(0.0, 0.0, pitch, nominal_aligned)


def extract_for_drive(
    spec: MotorSpec,
    current: float,
    topology: str | None = None,
    mode: str = "saturable",
    grid_step: float = 0.1,
    table: FluxLinkageTable | None = None,
    sym_grid_step: float = 0.5,
) -> CommutationAngles:
    """Full extraction pipeline at one current level.

    Runs the same extraction on the symmetric-tooth variant first to anchor
    the nominal aligned position (a coarse grid suffices: the symmetric
    crossing interpolates to the alignment point regardless of step), then
    on the real geometry.
    """
    sym = spec.symmetric_variant()
    sym_curve = torque_angle_curve(sym, [current], topology, mode, sym_grid_step)[0]
    with warnings.catch_warnings():
        # the symmetric variant is not self-starting by construction
        warnings.simplefilter("ignore")
        nominal = extract_commutation_angles(
            sym_curve, 0.5 * spec.rotor_pitch
        ).aligned_angle
    curve = torque_angle_curve(spec, [current], topology, mode, grid_step, table=table)[0]
    return extract_commutation_angles(
        curve, 0.5 * spec.rotor_pitch, nominal_aligned=nominal
    )
