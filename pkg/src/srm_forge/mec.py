"""Magnetic equivalent circuit: network builder, nodal solver, closed forms.

One excited phase is modelled as a single C-core loop: the winding MMF
(2 * N_pole * i, both coils of the C-core) drives flux around stator iron,
two air-gap crossings and the rotor. Each pole face carries two parallel
air-gap branches, one per tooth (narrow and widened). Embedded magnets act
as fixed flux injections F_PM / R_PM across the iron chain: their own
reluctance is so much larger than the iron and gap reluctances that loading
by the rest of the circuit is negligible, which is also what makes the
closed-form linear solutions exact for this network. A Thevenin variant
(magnet MMF behind its recoil reluctance) is kept for difference reporting.

Iron path bookkeeping (lumped, recorded in network metadata):
  stator yoke   arc between pole centres at mean yoke radius, area b_sy * L
  pole body     radial height h_s, area = pole-arc width * L
  tooth yoke    half the inter-tooth span per pole, area b_ty * L
  rotor         two pole depths plus a yoke arc, area = rotor pole face
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    MU0,
    BHCurve,
    MotorSpec,
    airgap_reluctance,
    bore_diameter,
    overlap_arc,
)

PHASES = ("A", "B")


class SolverError(RuntimeError):
    """Nodal solve failed (singular system or non-convergence)."""

    def __init__(self, message: str, residual: float | None = None, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class LinearReluctance:
    reluctance: float  # [A/Wb]


@dataclass(frozen=True)
class SaturableReluctance:
    path_length: float  # [m]
    area: float         # [m^2]
    bh: BHCurve

    def reluctance(self, mu: float) -> float:
        return self.path_length / (mu * self.area)


@dataclass
class Branch:
    """One network branch; positive flux flows n_from -> n_to.

    Reluctance branches may carry a series MMF source (oriented with the
    positive flux direction). Flux-injection branches pin their branch flux
    and keep the originating magnet's (F, R) for ratio reporting.
    """

    name: str
    n_from: int
    n_to: int
    element: LinearReluctance | SaturableReluctance | None
    mmf: float = 0.0
    flux_injection: float | None = None
    group: str = ""
    source_reluctance: float | None = None

    def __post_init__(self):
        if self.flux_injection is None:
            if self.element is None:
                raise ValueError(f"branch {self.name} needs an element or an injection")
            if isinstance(self.element, LinearReluctance) and self.element.reluctance <= 0:
                raise ValueError(f"branch {self.name} must have positive reluctance")


@dataclass
class MecNetwork:
    n_nodes: int
    branches: list[Branch]
    operating_point: dict
    metadata: dict = field(default_factory=dict)

    def branch(self, name: str) -> Branch:
        for b in self.branches:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass
class FluxSolution:
    """Solved branch fluxes with the loop quantities and their decomposition.

    The stator-side flux equals the yoke flux and the gap flux equals the
    rotor flux by construction of the loop. decomposition maps location
    ('sy', 'sp', 'g') to (winding, pm set 1, pm set 2) contributions and is
    only available for linear solves.
    """

    phi_sy: float | None
    phi_sp: float | None
    phi_ry: float | None
    phi_g: float | None
    phi_pm1: float
    phi_pm2: float
    r_star: float | None
    iterations: int
    residual: float
    branch_fluxes: dict[str, float]
    decomposition: dict[str, tuple[float, float, float]] | None = None
    pm_flux_reversed: bool = False


# -- element sizing ---------------------------------------------------------


@dataclass(frozen=True)
class IronSection:
    name: str
    path_length: float  # [m]
    area: float         # [m^2]


@dataclass(frozen=True)
class LoopElements:
    """All element values for one excited-phase loop at one operating point.

    The stator iron chain carries the yoke, both pole bodies and the two
    inter-teeth bridges; each tooth contributes its own saturable neck in
    series with its air-gap branch.
    """

    f_loop: float                       # winding MMF per C-core loop [A]
    core_sections: tuple[IronSection, ...]     # yoke and both pole bodies
    bridge_sections: tuple[IronSection, ...]   # inter-teeth bridge per pole
    rotor_sections: tuple[IronSection, ...]
    tooth_narrow: IronSection
    tooth_wide: IronSection
    r_gap_narrow: float
    r_gap_wide: float
    overlaps: dict
    injections: dict                    # set name -> (J [Wb], F [A], R_pm [A/Wb])


def _resolve_topology(spec: MotorSpec, topology: str | None) -> str:
    topo = spec.topology_id if topology is None else topology.lower()
    if topo not in ("motor1", "motor2", "motor3", "motor4"):
        raise ValueError(f"unknown topology {topology!r}")
    return topo


def pm_source(spec: MotorSpec, pm_set: str) -> tuple[float, float, float]:
    """(injection flux J, effective MMF F, internal reluctance R) for one set.

    Set 2 bridges adjacent C-cores, so only part of its flux closes through
    the excited loop; spec.pm2_coupling scales its effective source.
    """
    pm = spec.pm_material
    l_pm = (spec.l_PM1 if pm_set == "pm1" else spec.l_PM2) * 1e-3
    w_pm = spec.W_PM * 1e-3
    stack = spec.L_stack * 1e-3
    f_pm = pm.h_c * l_pm
    if pm_set == "pm2":
        f_pm *= spec.pm2_coupling
    r_pm = l_pm / (MU0 * pm.mu_rec * w_pm * stack)
    return f_pm / r_pm, f_pm, r_pm


def loop_elements(
    spec: MotorSpec,
    theta: float,
    i: float,
    phase: str = "A",
    topology: str | None = None,
) -> LoopElements:
    """Size every loop element at one (rotor angle, current) operating point."""
    if phase not in PHASES:
        raise ValueError(f"invalid phase {phase!r}; expected one of {PHASES}")
    topo = _resolve_topology(spec, topology)

    pitch = spec.rotor_pitch
    disp = theta if phase == "A" else theta - 0.5 * pitch
    ov_narrow = overlap_arc(disp, spec.beta_s, spec)
    ov_wide = overlap_arc(disp - spec.wide_tooth_offset, spec.beta_s_wide, spec)
    r_narrow = airgap_reluctance(ov_narrow, spec, spec.beta_s)
    r_wide = airgap_reluctance(ov_wide, spec, spec.beta_s_wide)

    r_bore = 0.5 * bore_diameter(spec) * 1e-3
    stack = spec.L_stack * 1e-3
    pole_pitch = 2.0 * math.pi / (2 * spec.n_ccores)  # stator pole pitch [rad]

    r_yoke_mean = (0.5 * spec.D_o - 0.5 * spec.b_sy) * 1e-3
    yoke = IronSection("yoke", r_yoke_mean * pole_pitch, spec.b_sy * 1e-3 * stack)

    w_pole = (r_bore + (spec.h_t + spec.b_ty + 0.5 * spec.h_s) * 1e-3) * math.radians(spec.lambda_pole)
    pole = IronSection("pole", spec.h_s * 1e-3, w_pole * stack)

    # the bridge between the two teeth of a pole; magnet circulation passes
    # its full cross-section, so no lateral split is credited here
    r_ty = r_bore + (spec.h_t + 0.5 * spec.b_ty) * 1e-3
    tooth_yoke = IronSection("tooth_yoke", 0.5 * r_ty * pitch * math.pi / 180.0,
                             spec.b_ty * 1e-3 * stack)

    # both teeth of a pole engage different rotor poles, so the rotor pole
    # constriction is m_teeth pole faces wide; the rotor yoke arc runs at
    # its own cross-section (depth taken as twice the pole length)
    b_ry = 2.5 * spec.h_r
    rotor_pole_area = (
        spec.m_teeth * (r_bore - spec.l_g * 1e-3) * math.radians(spec.beta_r) * stack
    )
    rotor_pole = IronSection("rotor_pole", 2.0 * spec.h_r * 1e-3, rotor_pole_area)
    r_ry_mean = r_bore - (spec.l_g + spec.h_r + 0.5 * b_ry) * 1e-3
    rotor_yoke = IronSection("rotor_yoke", r_ry_mean * pole_pitch,
                             b_ry * 1e-3 * stack)

    injections = {}
    for pm_set in ("pm1", "pm2"):
        if pm_set in spec.pm_sets() and topo in _TOPO_SETS and pm_set in _TOPO_SETS[topo]:
            injections[pm_set] = pm_source(spec, pm_set)
        elif pm_set in _TOPO_SETS.get(topo, ()) and pm_set not in spec.pm_sets():
            raise ValueError(
                f"topology override {topo!r} needs {pm_set} magnets the spec lacks"
            )

    tooth_narrow = IronSection(
        "tooth_narrow", spec.h_t * 1e-3,
        r_bore * math.radians(spec.beta_s) * stack,
    )
    tooth_wide = IronSection(
        "tooth_wide", spec.h_t * 1e-3,
        r_bore * math.radians(spec.beta_s_wide) * stack,
    )

    return LoopElements(
        f_loop=2.0 * spec.N_pole * i,
        core_sections=(yoke, pole, pole),
        bridge_sections=(tooth_yoke, tooth_yoke),
        rotor_sections=(rotor_pole, rotor_yoke),
        tooth_narrow=tooth_narrow,
        tooth_wide=tooth_wide,
        r_gap_narrow=r_narrow,
        r_gap_wide=r_wide,
        overlaps={"narrow": ov_narrow, "wide": ov_wide, "displacement": disp},
        injections=injections,
    )


_TOPO_SETS = {
    "motor1": (),
    "motor2": ("pm1",),
    "motor3": ("pm2",),
    "motor4": ("pm1", "pm2"),
}


# -- network construction ----------------------------------------------------


def build_network(
    spec: MotorSpec,
    theta: float,
    i: float,
    excited_phase: str = "A",
    mode: str = "linear",
    topology: str | None = None,
    pm_model: str | None = None,
) -> MecNetwork:
    """Assemble the excited-phase loop network at one operating point.

    mode 'linear' freezes iron at the magnetisation curve's initial slope;
    'saturable' emits saturable iron branches for the fixed-point solver.
    pm_model 'injection' represents magnets as fixed flux sources, the
    no-loading idealisation the closed forms assume (default in linear
    mode); 'thevenin' keeps their MMF behind the recoil reluctance so the
    magnets back off under load (default in saturable mode).
    """
    if mode not in ("linear", "saturable"):
        raise ValueError(f"mode must be 'linear' or 'saturable', got {mode!r}")
    if pm_model is None:
        pm_model = "injection" if mode == "linear" else "thevenin"
    if pm_model not in ("injection", "thevenin"):
        raise ValueError(f"pm_model must be 'injection' or 'thevenin', got {pm_model!r}")

    elems = loop_elements(spec, theta, i, excited_phase, topology)
    bh = spec.lamination
    mu0_iron = bh.mu_init

    def iron(section: IronSection):
        if mode == "saturable":
            return SaturableReluctance(section.path_length, section.area, bh)
        return LinearReluctance(section.path_length / (mu0_iron * section.area))

    # node map: 0 far tooth root (reference), 1 near tooth root,
    # 2/3 rotor under near/far pole, 4..7 stator iron chain interior,
    # 8 rotor pole/yoke junction, 9..12 tooth-neck/air-gap junctions
    yoke, pole_a, pole_b = elems.core_sections
    ty_a, ty_b = elems.bridge_sections
    branches = [
        Branch("tooth_yoke_far", 0, 7, iron(ty_b), group="iron"),
        Branch("pole_far", 7, 6, iron(pole_b), group="iron"),
        Branch("yoke", 6, 5, iron(yoke), mmf=elems.f_loop, group="iron"),
        Branch("pole_near", 5, 4, iron(pole_a), group="iron"),
        Branch("tooth_yoke_near", 4, 1, iron(ty_a), group="iron"),
        Branch("tooth_narrow_near", 1, 9, iron(elems.tooth_narrow), group="iron"),
        Branch("gap_narrow_near", 9, 2, LinearReluctance(elems.r_gap_narrow), group="gap"),
        Branch("tooth_wide_near", 1, 10, iron(elems.tooth_wide), group="iron"),
        Branch("gap_wide_near", 10, 2, LinearReluctance(elems.r_gap_wide), group="gap"),
        Branch("rotor_pole", 2, 8, iron(elems.rotor_sections[0]), group="iron"),
        Branch("rotor_yoke", 8, 3, iron(elems.rotor_sections[1]), group="iron"),
        Branch("gap_narrow_far", 3, 11, LinearReluctance(elems.r_gap_narrow), group="gap"),
        Branch("tooth_narrow_far", 11, 0, iron(elems.tooth_narrow), group="iron"),
        Branch("gap_wide_far", 3, 12, LinearReluctance(elems.r_gap_wide), group="gap"),
        Branch("tooth_wide_far", 12, 0, iron(elems.tooth_wide), group="iron"),
    ]
    if mode == "saturable":
        pm_nodes = {"pm1": (11, 9), "pm2": (12, 10)}
    else:
        pm_nodes = {"pm1": (0, 1), "pm2": (0, 1)}
    for pm_set, (inj, f_pm, r_pm) in elems.injections.items():
        n_from, n_to = pm_nodes[pm_set]
        if pm_model == "injection":
            branches.append(Branch(pm_set, n_from, n_to, None, flux_injection=inj,
                                   mmf=f_pm, group=pm_set, source_reluctance=r_pm))
        else:
            branches.append(Branch(pm_set, n_from, n_to, LinearReluctance(r_pm),
                                   mmf=f_pm, group=pm_set, source_reluctance=r_pm))

    def lin_r(sec: IronSection) -> float:
        return sec.path_length / (mu0_iron * sec.area)

    r_branch_narrow = elems.r_gap_narrow + lin_r(elems.tooth_narrow)
    r_branch_wide = elems.r_gap_wide + lin_r(elems.tooth_wide)
    r_gap_pole = 1.0 / (1.0 / r_branch_narrow + 1.0 / r_branch_wide)
    s_core = sum(lin_r(sec) for sec in elems.core_sections)
    s_iron = s_core + sum(lin_r(sec) for sec in elems.bridge_sections)
    r_rotor = sum(lin_r(sec) for sec in elems.rotor_sections)
    g_chain = r_rotor + 2.0 * r_gap_pole
    metadata = {
        "r_gap_narrow": elems.r_gap_narrow,
        "r_gap_wide": elems.r_gap_wide,
        "r_gap_pole": r_gap_pole,
        "r_stator_iron": s_iron,
        "r_stator_core": s_core,
        "r_rotor_chain": r_rotor,
        "r_gap_chain": g_chain,
        "r_star": s_iron + g_chain,
        "overlaps": elems.overlaps,
        "pm": {k: {"F": f, "R": r, "injection": j}
               for k, (j, f, r) in elems.injections.items()},
        "mode": mode,
        "pm_model": pm_model,
    }
    return MecNetwork(
        n_nodes=13,
        branches=branches,
        operating_point={
            "theta": theta, "current": i, "excited_phase": excited_phase,
            "topology": _resolve_topology(spec, topology), "mode": mode,
        },
        metadata=metadata,
    )


# -- general nodal solver ----------------------------------------------------


def _check_connected(net: MecNetwork) -> None:
    seen = {0}
    stack = [0]
    adj = {k: set() for k in range(net.n_nodes)}
    for b in net.branches:
        adj[b.n_from].add(b.n_to)
        adj[b.n_to].add(b.n_from)
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != net.n_nodes:
        raise SolverError("disconnected or degenerate network")


def _nodal_solve_once(net: MecNetwork, reluctances: dict[str, float]) -> tuple[np.ndarray, dict[str, float]]:
    """One linear nodal solve given each reluctance branch's value."""
    n = net.n_nodes - 1  # node 0 is the reference
    lap = np.zeros((n, n))
    rhs = np.zeros(n)

    def idx(node: int) -> int:
        return node - 1

    for b in net.branches:
        if b.flux_injection is not None:
            if b.n_to != 0:
                rhs[idx(b.n_to)] += b.flux_injection
            if b.n_from != 0:
                rhs[idx(b.n_from)] -= b.flux_injection
            continue
        g = 1.0 / reluctances[b.name]
        if b.n_from != 0:
            k = idx(b.n_from)
            lap[k, k] += g
            rhs[k] -= g * b.mmf
        if b.n_to != 0:
            k = idx(b.n_to)
            lap[k, k] += g
            rhs[k] += g * b.mmf
        if b.n_from != 0 and b.n_to != 0:
            lap[idx(b.n_from), idx(b.n_to)] -= g
            lap[idx(b.n_to), idx(b.n_from)] -= g

    try:
        u = np.linalg.solve(lap, rhs)
    except np.linalg.LinAlgError:
        raise SolverError("disconnected or degenerate network") from None
    if not np.all(np.isfinite(u)) or not np.allclose(lap @ u, rhs, rtol=1e-8, atol=1e-12):
        raise SolverError("disconnected or degenerate network")

    pot = np.concatenate(([0.0], u))
    fluxes = {}
    for b in net.branches:
        if b.flux_injection is not None:
            fluxes[b.name] = b.flux_injection
        else:
            fluxes[b.name] = (b.mmf + pot[b.n_from] - pot[b.n_to]) / reluctances[b.name]
    return pot, fluxes


def _node_residual(net: MecNetwork, fluxes: dict[str, float]) -> float:
    """Max node imbalance relative to the largest branch flux."""
    balance = [0.0] * net.n_nodes
    for b in net.branches:
        balance[b.n_from] -= fluxes[b.name]
        balance[b.n_to] += fluxes[b.name]
    scale = max((abs(f) for f in fluxes.values()), default=0.0)
    worst = max(abs(v) for v in balance)
    return worst / scale if scale > 0 else worst


_RELAX_FLOOR = 1.0 / 64.0
_RELAX_GROWTH = 1.25


def _network_fluxes(
    net: MecNetwork, tol: float, relax: float, max_iter: int
) -> tuple[dict[str, float], int]:
    saturable = [b for b in net.branches if isinstance(b.element, SaturableReluctance)]
    reluctances = {}
    for b in net.branches:
        if isinstance(b.element, LinearReluctance):
            reluctances[b.name] = b.element.reluctance
        elif isinstance(b.element, SaturableReluctance):
            reluctances[b.name] = b.element.reluctance(b.element.bh.mu_init)

    if not saturable:
        _, fluxes = _nodal_solve_once(net, reluctances)
        return fluxes, 1

    # fixed point on each branch's working flux density with per-branch
    # under-relaxation; the factor halves whenever the update direction
    # flips (deep saturation makes the bare map oscillate) and recovers
    # towards `relax` otherwise
    b_used = {b.name: 0.0 for b in saturable}
    weight = {b.name: relax for b in saturable}
    last_delta = {b.name: 0.0 for b in saturable}
    prev = None
    for iteration in range(1, max_iter + 1):
        for b in saturable:
            mu = b.element.bh.secant_mu(b_used[b.name])
            reluctances[b.name] = b.element.reluctance(mu)
        _, fluxes = _nodal_solve_once(net, reluctances)
        if prev is not None:
            change = max(
                abs(fluxes[k] - prev[k]) / max(abs(fluxes[k]), 1e-30) for k in fluxes
            )
            if change < tol:
                return fluxes, iteration
        for b in saturable:
            delta = fluxes[b.name] / b.element.area - b_used[b.name]
            w = weight[b.name]
            if delta * last_delta[b.name] < 0.0:
                w = max(0.5 * w, _RELAX_FLOOR)
            else:
                w = min(_RELAX_GROWTH * w, relax)
            weight[b.name] = w
            last_delta[b.name] = delta
            b_used[b.name] += w * delta
        prev = fluxes
    change = max(abs(fluxes[k] - prev[k]) / max(abs(fluxes[k]), 1e-30) for k in fluxes)
    raise SolverError(
        f"saturation fixed point did not converge in {max_iter} iterations "
        f"(last flux change {change:.3e})",
        residual=change,
        iterations=max_iter,
    )


def _motor_solution(
    net: MecNetwork, fluxes: dict[str, float], iterations: int
) -> FluxSolution:
    residual = _node_residual(net, fluxes)
    names = {b.name for b in net.branches}
    is_motor = {"yoke", "rotor_pole", "pole_near"}.issubset(names)
    phi_pm1 = fluxes.get("pm1", 0.0)
    phi_pm2 = fluxes.get("pm2", 0.0)
    reversed_pm = (phi_pm1 < 0.0) or (phi_pm2 < 0.0)
    if not is_motor:
        return FluxSolution(
            phi_sy=None, phi_sp=None, phi_ry=None, phi_g=None,
            phi_pm1=phi_pm1, phi_pm2=phi_pm2, r_star=None,
            iterations=iterations, residual=residual, branch_fluxes=fluxes,
            pm_flux_reversed=reversed_pm,
        )
    phi_sy = fluxes["yoke"]
    phi_g = fluxes["rotor_pole"]
    return FluxSolution(
        phi_sy=phi_sy,
        phi_sp=fluxes["pole_near"],
        phi_ry=phi_g,
        phi_g=phi_g,
        phi_pm1=phi_pm1,
        phi_pm2=phi_pm2,
        r_star=net.metadata.get("r_star"),
        iterations=iterations,
        residual=residual,
        branch_fluxes=fluxes,
        pm_flux_reversed=reversed_pm,
    )


def solve_network(
    net: MecNetwork,
    tol: float = 1e-6,
    relax: float = 0.5,
    max_iter: int = 200,
) -> FluxSolution:
    """Nodal magnetic-scalar-potential solve of an arbitrary branch network.

    Saturable branches are handled by fixed-point iteration on their secant
    permeability with under-relaxation; convergence is measured as relative
    flux change between sweeps.
    """
    _check_connected(net)
    fluxes, iterations = _network_fluxes(net, tol, relax, max_iter)
    sol = _motor_solution(net, fluxes, iterations)

    # linear motor networks get an exact source-by-source decomposition
    saturable = any(isinstance(b.element, SaturableReluctance) for b in net.branches)
    if sol.phi_sy is not None and not saturable:
        sol.decomposition = _network_decomposition(net, tol, relax, max_iter)
    return sol


def _network_decomposition(net, tol, relax, max_iter):
    groups = {"winding": ("yoke",), "pm1": ("pm1",), "pm2": ("pm2",)}
    parts = {}
    for gname, branch_names in groups.items():
        sub = MecNetwork(net.n_nodes, [], net.operating_point, net.metadata)
        active = False
        for b in net.branches:
            keep_mmf = b.name in branch_names
            if b.flux_injection is not None:
                inj = b.flux_injection if keep_mmf else 0.0
                active = active or (keep_mmf and inj != 0.0)
                sub.branches.append(Branch(b.name, b.n_from, b.n_to, None,
                                           flux_injection=inj, group=b.group))
            else:
                mmf = b.mmf if keep_mmf else 0.0
                active = active or (keep_mmf and mmf != 0.0)
                sub.branches.append(Branch(b.name, b.n_from, b.n_to, b.element,
                                           mmf=mmf, group=b.group))
        if active:
            fluxes, _ = _network_fluxes(sub, tol, relax, max_iter)
            parts[gname] = (fluxes["yoke"], fluxes["pole_near"], fluxes["rotor_pole"])
        else:
            parts[gname] = (0.0, 0.0, 0.0)
    return {
        "sy": (parts["winding"][0], parts["pm1"][0], parts["pm2"][0]),
        "sp": (parts["winding"][1], parts["pm1"][1], parts["pm2"][1]),
        "g": (parts["winding"][2], parts["pm1"][2], parts["pm2"][2]),
    }


# -- fast reduced solve (series/parallel loop) -------------------------------


def _loop_fixed_point(
    spec: MotorSpec,
    elems: LoopElements,
    mode: str,
    tol: float = 1e-6,
    relax: float = 0.5,
    max_iter: int = 200,
) -> tuple[float, float, float, float, int]:
    """Solve the loop by series-parallel reduction.

    Returns (phi_sy, phi_g, S, G, iterations, (phi_pm1, phi_pm2)) with S
    the full stator chain reluctance and G the gap+rotor chain reluctance
    at the solution; the whole iron chain carries phi_sy, the gap chain
    phi_g.
    """
    if mode not in ("linear", "saturable"):
        raise ValueError(f"mode must be 'linear' or 'saturable', got {mode!r}")
    bh = spec.lamination
    mu_init = bh.mu_init
    j1 = elems.injections.get("pm1", (0.0,))[0]
    j2 = elems.injections.get("pm2", (0.0,))[0]
    f_loop = elems.f_loop

    core = elems.core_sections
    bridge = elems.bridge_sections
    rotor = elems.rotor_sections
    tooth_n = elems.tooth_narrow
    tooth_w = elems.tooth_wide

    pm_vals = [elems.injections[k] for k in ("pm1", "pm2") if k in elems.injections]

    def lin_r(sec: IronSection) -> float:
        return sec.path_length / (mu_init * sec.area)

    if mode == "linear":
        # ideal injections: the no-loading picture the closed forms assume
        r_n = elems.r_gap_narrow + lin_r(tooth_n)
        r_w = elems.r_gap_wide + lin_r(tooth_w)
        r_gap_pole = 1.0 / (1.0 / r_n + 1.0 / r_w)
        s = sum(lin_r(sec) for sec in core) + sum(lin_r(sec) for sec in bridge)
        g = sum(lin_r(sec) for sec in rotor) + 2.0 * r_gap_pole
        phi_g = (f_loop + s * (j1 + j2)) / (s + g)
        return phi_g - j1 - j2, phi_g, s, g, 1, (j1, j2)

    # saturable: magnets attach at their tooth flanks (set 1 at the inner,
    # narrow teeth; set 2 at the outer, widened teeth) behind their recoil
    # reluctance, so their iron return threads the necks and bridges while
    # their gap path does not. Each iron section's working flux density is
    # under-relaxed adaptively (damping halves on oscillation).
    f1 = elems.injections.get("pm1", (0.0, 0.0, 1.0))[1:]
    f2 = elems.injections.get("pm2", (0.0, 0.0, 1.0))[1:]
    g_pm1 = (1.0 / f1[1]) if "pm1" in elems.injections else 0.0
    g_pm2 = (1.0 / f2[1]) if "pm2" in elems.injections else 0.0
    sections = list(core) + list(bridge) + list(rotor) + [tooth_n, tooth_w]
    n_cb = len(core) + len(bridge)
    n_rot = len(rotor)
    b_used = [0.0] * len(sections)
    weight = [relax] * len(sections)
    last_delta = [0.0] * len(sections)
    phi_sy = phi_g = s = g = 0.0
    prev_sy = prev_g = None
    for iteration in range(1, max_iter + 1):
        r_vals = [
            sec.path_length / (bh.secant_mu(b_used[k]) * sec.area)
            for k, sec in enumerate(sections)
        ]
        s = sum(r_vals[:n_cb])
        r_rot = sum(r_vals[n_cb:n_cb + n_rot])
        r_neck_n, r_neck_w = r_vals[-2], r_vals[-1]

        # antisymmetric half-circuit: u1 tooth root, u9/u10 narrow/wide
        # tooth flank, u2 rotor surface; far side mirrors with opposite sign
        g_ch = 2.0 / s
        g_nn = 1.0 / r_neck_n
        g_nw = 1.0 / r_neck_w
        g_an = 1.0 / elems.r_gap_narrow
        g_aw = 1.0 / elems.r_gap_wide
        g_rt = 2.0 / r_rot
        a = [
            [g_ch + g_nn + g_nw, -g_nn, -g_nw, 0.0],
            [-g_nn, g_nn + g_an + 2.0 * g_pm1, 0.0, -g_an],
            [-g_nw, 0.0, g_nw + g_aw + 2.0 * g_pm2, -g_aw],
            [0.0, -g_an, -g_aw, g_an + g_aw + g_rt],
        ]
        rhs = [0.5 * g_ch * f_loop, f1[0] * g_pm1, f2[0] * g_pm2, 0.0]
        u1, u9, u10, u2 = _solve4(a, rhs)

        phi_sy = (f_loop - 2.0 * u1) / s
        phi_nn = (u1 - u9) * g_nn
        phi_nw = (u1 - u10) * g_nw
        phi_g = u2 * g_rt
        phi_pm = ((f1[0] - 2.0 * u9) * g_pm1, (f2[0] - 2.0 * u10) * g_pm2)
        g = r_rot + 2.0 * (1.0 / (g_an + g_aw))  # reported gap-chain scale
        if prev_g is not None:
            change = max(
                abs(phi_g - prev_g) / max(abs(phi_g), 1e-30),
                abs(phi_sy - prev_sy) / max(abs(phi_sy), 1e-30),
            )
            if change < tol:
                return phi_sy, phi_g, s, g, iteration, phi_pm
        for k, sec in enumerate(sections):
            if k < n_cb:
                phi = phi_sy
            elif k < n_cb + n_rot:
                phi = phi_g
            elif k == len(sections) - 2:
                phi = phi_nn
            else:
                phi = phi_nw
            delta = phi / sec.area - b_used[k]
            w = weight[k]
            if delta * last_delta[k] < 0.0:
                w = max(0.5 * w, _RELAX_FLOOR)
            else:
                w = min(_RELAX_GROWTH * w, relax)
            weight[k] = w
            last_delta[k] = delta
            b_used[k] += w * delta
        prev_sy, prev_g = phi_sy, phi_g
    change = max(
        abs(phi_g - prev_g) / max(abs(phi_g), 1e-30),
        abs(phi_sy - prev_sy) / max(abs(phi_sy), 1e-30),
    )
    raise SolverError(
        f"saturation fixed point did not converge in {max_iter} iterations "
        f"(last flux change {change:.3e})",
        residual=change,
        iterations=max_iter,
    )


def _solve4(a, b):
    """Gaussian elimination with partial pivoting for the 4x4 half-circuit."""
    n = 4
    m = [row[:] + [b[k]] for k, row in enumerate(a)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if abs(m[piv][col]) < 1e-300:
            raise SolverError("disconnected or degenerate network")
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
        inv = 1.0 / m[col][col]
        for r in range(col + 1, n):
            factor = m[r][col] * inv
            if factor != 0.0:
                for c in range(col, n + 1):
                    m[r][c] -= factor * m[col][c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        acc = m[r][n]
        for c in range(r + 1, n):
            acc -= m[r][c] * x[c]
        x[r] = acc / m[r][r]
    return x


def solve_loop(
    spec: MotorSpec,
    theta: float,
    i: float,
    phase: str = "A",
    mode: str = "saturable",
    topology: str | None = None,
) -> FluxSolution:
    """Fast loop solve; agrees with solve_network on the same operating point."""
    elems = loop_elements(spec, theta, i, phase, topology)
    phi_sy, phi_g, s, g, iterations, (phi_pm1, phi_pm2) = _loop_fixed_point(
        spec, elems, mode
    )
    fluxes = {
        "yoke": phi_sy, "pole_near": phi_sy, "rotor_pole": phi_g,
        "pm1": phi_pm1, "pm2": phi_pm2,
    }
    return FluxSolution(
        phi_sy=phi_sy, phi_sp=phi_sy, phi_ry=phi_g, phi_g=phi_g,
        phi_pm1=phi_pm1, phi_pm2=phi_pm2,
        r_star=s + g, iterations=iterations, residual=0.0,
        branch_fluxes=fluxes,
        pm_flux_reversed=(phi_pm1 < 0.0 or phi_pm2 < 0.0),
    )


# -- closed-form linear solutions --------------------------------------------


def solve_closed_form(
    spec: MotorSpec,
    theta: float,
    i: float,
    topology: str | None = None,
    phase: str = "A",
    mode: str = "linear",
) -> FluxSolution:
    """Closed-form linear fluxes for all four topologies.

    The gap flux gains one term per magnet set scaled by that set's stator
    return-path share of the loop (the full iron chain for set 1, the
    yoke+pole core for set 2); the yoke flux loses the complementary share.
    The winding term is the bare loop division. Only valid with fixed
    (unsaturated) iron.
    """
    if mode != "linear":
        raise SolverError("closed-form solution is only defined in linear mode")
    elems = loop_elements(spec, theta, i, phase, topology)
    mu_init = spec.lamination.mu_init

    def lin_r(sec: IronSection) -> float:
        return sec.path_length / (mu_init * sec.area)

    s = sum(lin_r(sec) for sec in elems.core_sections)
    s += sum(lin_r(sec) for sec in elems.bridge_sections)
    r_n = elems.r_gap_narrow + lin_r(elems.tooth_narrow)
    r_w = elems.r_gap_wide + lin_r(elems.tooth_wide)
    r_gap_pole = 1.0 / (1.0 / r_n + 1.0 / r_w)
    g = sum(lin_r(sec) for sec in elems.rotor_sections) + 2.0 * r_gap_pole
    r_star = s + g

    prime = elems.f_loop / r_star  # winding term, same in yoke, pole and gap

    sy_terms = [prime, 0.0, 0.0]
    g_terms = [prime, 0.0, 0.0]
    phi_pm = {"pm1": 0.0, "pm2": 0.0}
    for slot, pm_set in ((1, "pm1"), (2, "pm2")):
        if pm_set not in elems.injections:
            continue
        _, f_pm, r_pm = elems.injections[pm_set]
        sy_terms[slot] = -(g / (r_pm * r_star)) * f_pm
        g_terms[slot] = +(s / (r_pm * r_star)) * f_pm
        phi_pm[pm_set] = f_pm / r_pm

    phi_sy = sy_terms[0] + sy_terms[1] + sy_terms[2]
    phi_g = g_terms[0] + g_terms[1] + g_terms[2]
    fluxes = {
        "yoke": phi_sy, "pole_near": phi_sy, "rotor_pole": phi_g,
        "pm1": phi_pm["pm1"], "pm2": phi_pm["pm2"],
    }
    return FluxSolution(
        phi_sy=phi_sy, phi_sp=phi_sy, phi_ry=phi_g, phi_g=phi_g,
        phi_pm1=phi_pm["pm1"], phi_pm2=phi_pm["pm2"],
        r_star=r_star, iterations=0, residual=0.0,
        branch_fluxes=fluxes,
        decomposition={
            "sy": tuple(sy_terms), "sp": tuple(sy_terms), "g": tuple(g_terms),
        },
    )


# -- dominance ratios ---------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    """Magnet-to-iron reluctance ratios behind the loop simplification."""

    ratios: dict
    threshold: float
    passed: bool


def check_dominance(net: MecNetwork, threshold: float = 10.0) -> DominanceReport:
    """Ratio of each magnet reluctance to stator-iron, gap, and parallel paths."""
    s = net.metadata["r_stator_iron"]
    g = net.metadata["r_gap_chain"]
    parallel = s * g / (s + g)
    ratios = {}
    ok = True
    for pm_set, info in net.metadata.get("pm", {}).items():
        r_pm = info["R"]
        ratios[f"{pm_set}_vs_stator_iron"] = r_pm / s
        ratios[f"{pm_set}_vs_gap_chain"] = r_pm / g
        ratios[f"{pm_set}_vs_parallel"] = r_pm / parallel
    for value in ratios.values():
        ok = ok and value >= threshold
    return DominanceReport(ratios=ratios, threshold=threshold, passed=ok)


# -- flux linkage --------------------------------------------------------------


def flux_linkage(
    spec: MotorSpec,
    theta: float,
    i: float,
    phase: str = "A",
    mode: str = "saturable",
    topology: str | None = None,
) -> float:
    """Phase flux linkage [Wb-turns]: all series coils times the pole flux.

    Each phase owns half the C-cores, each C-core links twice the per-pole
    turns, and the loops of a phase see the same operating point, so the
    linkage is ccores_per_phase * 2 * N_pole times the stator-pole flux.
    """
    sol = solve_loop(spec, theta, i, phase, mode, topology)
    return spec.ccores_per_phase * 2.0 * spec.N_pole * sol.phi_sp


def network_debug_dump(net: MecNetwork, sol: FluxSolution) -> dict:
    """JSON-ready dump of a solved network for the CLI verify command."""
    branches = []
    for b in net.branches:
        if isinstance(b.element, LinearReluctance):
            r_val = b.element.reluctance
        elif isinstance(b.element, SaturableReluctance):
            r_val = None  # flux dependent
        else:
            r_val = b.source_reluctance
        branches.append({
            "name": b.name, "from": b.n_from, "to": b.n_to,
            "reluctance": r_val, "mmf": b.mmf,
            "flux_injection": b.flux_injection,
            "group": b.group,
            "flux": sol.branch_fluxes.get(b.name),
        })
    return {
        "nodes": net.n_nodes,
        "operating_point": net.operating_point,
        "branches": branches,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "r_star": sol.r_star,
    }
