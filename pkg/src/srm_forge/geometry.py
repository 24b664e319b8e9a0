"""Motor geometry, material data, and air-gap permeance primitives.

All spec fields use millimetres and mechanical degrees (matching the
nameplate-style data they are loaded from); conversions to SI happen at the
point of use. Angle convention: rotor position 0 deg puts the narrow tooth
of phase A exactly aligned with a rotor tooth; electrical degrees are
mechanical degrees times the rotor tooth count.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

MU0 = 4.0e-7 * math.pi  # vacuum permeability [H/m]

TOPOLOGIES = ("motor1", "motor2", "motor3", "motor4")

# PM sets present per topology: set 1 sits between the two teeth of a C-core
# pole, set 2 between the side teeth of adjacent C-cores.
PM_SETS = {
    "motor1": (),
    "motor2": ("pm1",),
    "motor3": ("pm2",),
    "motor4": ("pm1", "pm2"),
}


class SpecError(ValueError):
    """Raised when a motor specification violates an invariant."""


@dataclass(frozen=True)
class BHCurve:
    """Piecewise-linear DC magnetisation curve.

    points: ordered (H [A/m], B [T]) pairs starting at (0, 0). Beyond the
    last point the curve continues with slope mu0 (fully saturated iron).
    """

    name: str
    points: tuple[tuple[float, float], ...]
    knee_b: float

    def __post_init__(self):
        if len(self.points) < 2:
            raise SpecError("bh curve needs at least two points")
        if self.points[0] != (0.0, 0.0):
            raise SpecError("bh curve must start at (0, 0)")
        for (h0, b0), (h1, b1) in zip(self.points, self.points[1:]):
            if not (h1 > h0 and b1 > b0):
                raise SpecError("bh curve must be strictly increasing in H and B")
        if self.knee_b <= 0:
            raise SpecError("bh knee flux density must be positive")

    @property
    def mu_init(self) -> float:
        """Initial (unsaturated) permeability, slope of the first segment."""
        h1, b1 = self.points[1]
        return b1 / h1

    def h_at_b(self, b: float) -> float:
        """Field strength for a flux density, mu0-slope beyond the last point."""
        b = abs(b)
        pts = self.points
        if b >= pts[-1][1]:
            return pts[-1][0] + (b - pts[-1][1]) / MU0
        lo, hi = 0, len(pts) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pts[mid][1] <= b:
                lo = mid
            else:
                hi = mid
        h0, b0 = pts[lo]
        h1, b1 = pts[hi]
        return h0 + (h1 - h0) * (b - b0) / (b1 - b0)

    def secant_mu(self, b: float) -> float:
        """Secant permeability B/H(B); initial slope at and below zero flux."""
        b = abs(b)
        if b <= 0.0:
            return self.mu_init
        h = self.h_at_b(b)
        if h <= 0.0:
            return self.mu_init
        return b / h


@dataclass(frozen=True)
class PMSpec:
    """Permanent-magnet material: remanence, coercivity, recoil permeability."""

    name: str
    b_r: float
    h_c: float
    mu_rec: float

    def __post_init__(self):
        if min(self.b_r, self.h_c, self.mu_rec) <= 0:
            raise SpecError("pm material constants must be positive")
        recoil_br = MU0 * self.mu_rec * self.h_c
        if abs(recoil_br - self.b_r) > 0.10 * self.b_r:
            raise SpecError(
                f"pm material inconsistent: mu0*mu_rec*H_c = {recoil_br:.3f} T "
                f"deviates more than 10% from B_r = {self.b_r:.3f} T"
            )


# 12-point default curve for the M19-24G lamination, knee at 1.9 T.
_M19_POINTS = (
    (0.0, 0.0),
    (40.0, 0.20),
    (70.0, 0.50),
    (100.0, 0.80),
    (150.0, 1.10),
    (250.0, 1.30),
    (500.0, 1.45),
    (1200.0, 1.60),
    (3500.0, 1.72),
    (10000.0, 1.83),
    (25000.0, 1.95),
    (60000.0, 2.10),
)

BH_CURVES = {
    "M19-24G": BHCurve(name="M19-24G", points=_M19_POINTS, knee_b=1.9),
}

# Representative N35 datasheet values; configuration defaults, overridable.
PM_MATERIALS = {
    "NdFeB-N35": PMSpec(name="NdFeB-N35", b_r=1.20, h_c=900e3, mu_rec=1.05),
}


@dataclass(frozen=True)
class MotorSpec:
    """Full geometric and material description of one motor topology.

    Lengths in mm, arcs in mechanical degrees, resistance in ohm, loss in W,
    volume in litres.
    """

    topology_id: str
    D_o: float            # stator outer diameter
    b_sy: float           # stator yoke thickness
    h_s: float            # stator pole height
    b_ty: float           # tooth yoke thickness
    h_t: float            # tooth length
    l_g: float            # air-gap length
    h_r: float            # rotor pole length
    lambda_pole: float    # stator pole arc
    beta_s: float         # narrow stator tooth arc
    beta_s_wide: float    # widened tooth arc (beta_s + a_ext)
    a_ext: float          # tooth extension
    beta_r: float         # rotor pole arc
    L_stack: float        # stack length
    W_PM: float           # PM width (0 when no magnets)
    l_PM1: float          # set-1 PM length (0 when absent)
    l_PM2: float          # set-2 PM length (0 when absent)
    N_pole: int           # turns per pole of a C-core
    N_r: int              # rotor tooth count
    n_ccores: int         # C-core count
    m_teeth: int          # teeth per C-core pole
    lamination: BHCurve
    pm_material: PMSpec
    R_phase: float = 0.218       # phase winding resistance [ohm]
    P_core_const: float = 0.9    # configured total core loss [W]
    active_volume: float = 0.320  # motor volume [L]
    widened_tooth: str = "outer"  # which tooth of a pole carries the extension
    pm2_coupling: float = 0.25    # set-2 coupling: half-split between adjacent modules times the gap-path share
    unaligned_gap_len: float | None = None  # fringing-floor path length override [mm]

    def __post_init__(self):
        if self.topology_id not in TOPOLOGIES:
            raise SpecError(f"unknown topology_id {self.topology_id!r}")
        positive = {
            "D_o": self.D_o, "b_sy": self.b_sy, "h_s": self.h_s,
            "b_ty": self.b_ty, "h_t": self.h_t, "l_g": self.l_g,
            "h_r": self.h_r, "lambda_pole": self.lambda_pole,
            "beta_s": self.beta_s, "beta_s_wide": self.beta_s_wide,
            "beta_r": self.beta_r, "L_stack": self.L_stack,
            "R_phase": self.R_phase, "active_volume": self.active_volume,
        }
        for name, value in positive.items():
            if not value > 0:
                if name == "l_g":
                    raise SpecError("air-gap length must be positive")
                raise SpecError(f"{name} must be positive, got {value}")
        if self.a_ext < 0:
            raise SpecError(f"a_ext must be non-negative, got {self.a_ext}")
        if abs(self.beta_s_wide - (self.beta_s + self.a_ext)) > 1e-9:
            raise SpecError(
                f"beta_s_wide must equal beta_s + a_ext: "
                f"{self.beta_s_wide} != {self.beta_s} + {self.a_ext}"
            )
        pitch = 360.0 / self.N_r
        if self.beta_r >= pitch:
            raise SpecError(f"beta_r = {self.beta_r} must be below rotor pitch {pitch}")
        if self.beta_s_wide >= pitch:
            raise SpecError(
                f"beta_s_wide = {self.beta_s_wide} must be below rotor pitch {pitch}"
            )
        if min(self.N_pole, self.N_r, self.n_ccores, self.m_teeth) <= 0:
            raise SpecError("winding/tooth counts must be positive")
        if self.n_ccores % 2:
            raise SpecError("two-phase layout needs an even C-core count")
        for pm_set in PM_SETS[self.topology_id]:
            l_pm = self.l_PM1 if pm_set == "pm1" else self.l_PM2
            if l_pm <= 0 or self.W_PM <= 0:
                raise SpecError(
                    f"topology {self.topology_id} requires {pm_set} magnets: "
                    f"l_{pm_set.upper()} and W_PM must be positive"
                )
        if not 0.0 <= self.pm2_coupling <= 1.0:
            raise SpecError("pm2_coupling must be within [0, 1]")
        if self.widened_tooth not in ("outer", "inner"):
            raise SpecError("widened_tooth must be 'outer' or 'inner'")
        if self.P_core_const < 0:
            raise SpecError("P_core_const must be non-negative")

    # -- derived angles ---------------------------------------------------

    @property
    def rotor_pitch(self) -> float:
        """Rotor tooth pitch [mech deg]; one electrical period."""
        return 360.0 / self.N_r

    @property
    def wide_tooth_offset(self) -> float:
        """Centre offset of the widened tooth from the rotor-pitch grid [mech deg].

        The extension is added to one edge of the tooth, so the face centre
        shifts by half the extension. 'outer' puts the extension on the edge
        the rotor approaches first, which extends the positive-torque span.
        """
        shift = 0.5 * self.a_ext
        return -shift if self.widened_tooth == "outer" else shift

    @property
    def ccores_per_phase(self) -> int:
        return self.n_ccores // 2

    def pm_sets(self) -> tuple[str, ...]:
        return PM_SETS[self.topology_id]

    def pm_volume_ml(self) -> float:
        """Total embedded magnet volume [mL]; one magnet per C-core per set."""
        total_mm3 = 0.0
        for pm_set in self.pm_sets():
            l_pm = self.l_PM1 if pm_set == "pm1" else self.l_PM2
            total_mm3 += self.n_ccores * self.W_PM * l_pm * self.L_stack
        return total_mm3 / 1000.0

    def symmetric_variant(self) -> "MotorSpec":
        """Same motor with both teeth narrow (no self-starting asymmetry)."""
        return replace(self, beta_s_wide=self.beta_s, a_ext=0.0)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "topology_id": self.topology_id,
            "D_o": self.D_o, "b_sy": self.b_sy, "h_s": self.h_s,
            "b_ty": self.b_ty, "h_t": self.h_t, "l_g": self.l_g,
            "h_r": self.h_r, "lambda_pole": self.lambda_pole,
            "beta_s": self.beta_s, "beta_s_wide": self.beta_s_wide,
            "a_ext": self.a_ext, "beta_r": self.beta_r,
            "L_stack": self.L_stack, "W_PM": self.W_PM,
            "l_PM1": self.l_PM1, "l_PM2": self.l_PM2,
            "N_pole": self.N_pole, "N_r": self.N_r,
            "n_ccores": self.n_ccores, "m_teeth": self.m_teeth,
            "R_phase": self.R_phase, "P_core_const": self.P_core_const,
            "active_volume": self.active_volume,
            "widened_tooth": self.widened_tooth,
            "pm2_coupling": self.pm2_coupling,
            "unaligned_gap_len": self.unaligned_gap_len,
        }
        if self.lamination.name in BH_CURVES and self.lamination == BH_CURVES[self.lamination.name]:
            d["lamination"] = self.lamination.name
        else:
            d["lamination"] = {
                "name": self.lamination.name,
                "points": [list(p) for p in self.lamination.points],
                "knee_b": self.lamination.knee_b,
            }
        if self.pm_material.name in PM_MATERIALS and self.pm_material == PM_MATERIALS[self.pm_material.name]:
            d["pm_material"] = self.pm_material.name
        else:
            d["pm_material"] = {
                "name": self.pm_material.name,
                "b_r": self.pm_material.b_r,
                "h_c": self.pm_material.h_c,
                "mu_rec": self.pm_material.mu_rec,
            }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def spec_hash(self) -> str:
        """Stable content hash used to tag derived artefacts."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_lamination(value) -> BHCurve:
    if isinstance(value, str):
        try:
            return BH_CURVES[value]
        except KeyError:
            raise SpecError(f"unknown lamination {value!r}") from None
    return BHCurve(
        name=value.get("name", "custom"),
        points=tuple((float(h), float(b)) for h, b in value["points"]),
        knee_b=float(value["knee_b"]),
    )


def _parse_pm_material(value) -> PMSpec:
    if isinstance(value, str):
        try:
            return PM_MATERIALS[value]
        except KeyError:
            raise SpecError(f"unknown pm material {value!r}") from None
    return PMSpec(
        name=value.get("name", "custom"),
        b_r=float(value["b_r"]),
        h_c=float(value["h_c"]),
        mu_rec=float(value["mu_rec"]),
    )


def _preset_dict(topology: str) -> dict:
    """Built-in reference presets (one per topology, shared lamination/PM)."""
    base = {
        "topology_id": topology,
        "D_o": 94.0, "b_sy": 4.6, "h_s": 10.8, "b_ty": 3.2, "h_t": 2.8,
        "l_g": 0.3, "h_r": 4.64, "lambda_pole": 10.0,
        "beta_s": 8.4, "beta_s_wide": 11.9, "a_ext": 3.5, "beta_r": 8.8,
        "L_stack": 20.0,
        "W_PM": 5.0, "l_PM1": 5.0, "l_PM2": 10.0,
        "N_pole": 90, "N_r": 18, "n_ccores": 4, "m_teeth": 2,
        "lamination": "M19-24G", "pm_material": "NdFeB-N35",
        "R_phase": 0.218, "P_core_const": 0.9, "active_volume": 0.320,
    }
    if topology == "motor1":
        base.update(W_PM=0.0, l_PM1=0.0, l_PM2=0.0)
    elif topology == "motor2":
        base.update(l_PM2=0.0)
    elif topology == "motor3":
        base.update(l_PM1=0.0)
    return base


PRESETS = {f"table1-{topo}": topo for topo in TOPOLOGIES}

_INT_FIELDS = {"N_pole", "N_r", "n_ccores", "m_teeth"}
_STR_FIELDS = {"topology_id", "widened_tooth"}
_OPTIONAL_FIELDS = {
    "R_phase", "P_core_const", "active_volume", "widened_tooth",
    "pm2_coupling", "unaligned_gap_len",
}


def motor_spec_from_dict(data: dict) -> MotorSpec:
    """Build and validate a MotorSpec from a plain dict (spec-file schema)."""
    data = dict(data)
    preset_name = data.pop("preset", None)
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise SpecError(
                f"unknown preset {preset_name!r}; available: {sorted(PRESETS)}"
            )
        merged = _preset_dict(PRESETS[preset_name])
        merged.update(data)  # explicit keys override preset values
        data = merged

    kwargs = {}
    for key, value in data.items():
        if key == "lamination":
            kwargs[key] = _parse_lamination(value)
        elif key == "pm_material":
            kwargs[key] = _parse_pm_material(value)
        elif key in _INT_FIELDS:
            kwargs[key] = int(value)
        elif key in _STR_FIELDS:
            kwargs[key] = str(value).lower()
        elif key == "unaligned_gap_len":
            kwargs[key] = None if value is None else float(value)
        else:
            kwargs[key] = float(value)

    try:
        return MotorSpec(**kwargs)
    except TypeError as exc:
        raise SpecError(f"bad or missing spec field: {exc}") from None


def load_motor_spec(text: str) -> MotorSpec:
    """Parse a JSON motor spec document (or a {"preset": name} request)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError("spec document must be a JSON object")
    return motor_spec_from_dict(data)


def preset_spec(name: str) -> MotorSpec:
    """Resolve a preset by name ('table1-motor1' ... 'table1-motor4')."""
    short = name if name in PRESETS else f"table1-{name}"
    if short not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return motor_spec_from_dict({"preset": short})


# -- geometric primitives --------------------------------------------------

def bore_diameter(spec: MotorSpec) -> float:
    """Stator bore diameter [mm]: outer diameter minus the radial stack-up.

    The yoke, pole, tooth yoke and tooth thicknesses sum to the stator
    annulus on each side; the preset geometry gives 51.2 mm.
    """
    d = spec.D_o - 2.0 * (spec.b_sy + spec.h_s + spec.b_ty + spec.h_t)
    if d <= 0:
        raise SpecError(
            f"inconsistent radial dimensions: bore diameter {d:.3f} mm"
        )
    return d


def wrap_displacement(displacement: float, pitch: float) -> float:
    """Reduce a tooth-to-rotor-pole displacement into [-pitch/2, pitch/2)."""
    return (displacement + 0.5 * pitch) % pitch - 0.5 * pitch


def overlap_arc(displacement: float, tooth_arc: float, spec: MotorSpec) -> float:
    """Overlap angle between a stator tooth and the nearest rotor pole [mech deg].

    displacement is the tooth-centre-to-rotor-pole-centre angle; the result
    is periodic with the rotor pitch, even in displacement, and bounded by
    the smaller of the two arcs.
    """
    d = abs(wrap_displacement(displacement, spec.rotor_pitch))
    ov = 0.5 * (tooth_arc + spec.beta_r) - d
    return max(0.0, min(ov, tooth_arc, spec.beta_r))


def airgap_reluctance(theta_ov: float, spec: MotorSpec, tooth_arc: float | None = None) -> float:
    """Air-gap reluctance for one tooth at a given overlap angle [A/Wb].

    Above the fringing floor this is l_g over the overlapped face area. At
    and near zero overlap the permeance is floored at that of an air path of
    length (l_g + h_r) over the full tooth face, so the unaligned reluctance
    stays finite.
    """
    if theta_ov < 0:
        raise ValueError(f"overlap angle must be non-negative, got {theta_ov}")
    if tooth_arc is None:
        tooth_arc = spec.beta_s
    r_bore = 0.5 * bore_diameter(spec) * 1e-3          # [m]
    stack = spec.L_stack * 1e-3                        # [m]
    gap = spec.l_g * 1e-3                              # [m]
    unal_len = spec.unaligned_gap_len
    unal_len = (spec.l_g + spec.h_r) * 1e-3 if unal_len is None else unal_len * 1e-3

    face_area = r_bore * math.radians(tooth_arc) * stack
    r_floor = unal_len / (MU0 * face_area)
    if theta_ov <= 0.0:
        return r_floor
    ov_area = r_bore * math.radians(theta_ov) * stack
    return min(gap / (MU0 * ov_area), r_floor)


def mech_to_elec(mech_deg: float, n_r: int) -> float:
    """Mechanical to electrical degrees for an n_r-tooth rotor."""
    return mech_deg * n_r
