"""Two-phase double-teeth C-core switched reluctance motor simulation toolkit."""

__version__ = "0.1.0"

from .geometry import (
    BHCurve,
    MotorSpec,
    PMSpec,
    SpecError,
    airgap_reluctance,
    bore_diameter,
    load_motor_spec,
    overlap_arc,
    preset_spec,
)
from .mec import (
    FluxSolution,
    MecNetwork,
    SolverError,
    build_network,
    check_dominance,
    flux_linkage,
    solve_closed_form,
    solve_network,
)
from .characteristics import (
    CommutationAngles,
    FluxLinkageTable,
    TorqueAngleCurve,
    analytic_torque_linear,
    build_flux_table,
    conventional_commutation,
    extract_commutation_angles,
    extract_for_drive,
    static_torque,
    torque_angle_curve,
)
from .drive import (
    DriveConfig,
    GateState,
    commutation_signals,
    commutation_table,
    gate,
    hysteresis_step,
    inverter_voltage,
)
from .simulate import (
    MagneticMaps,
    SimulationError,
    SimulationTrace,
    cycle_boundaries,
    precompute_maps,
    simulate,
    steady_state_window,
)
from .metrics import (
    MetricsError,
    PerformanceMetrics,
    compute_metrics,
    comparison_report,
    derive_metrics,
    percent_increase,
    prediction_error,
    reconstruct_reported_row,
    static_summary,
)

__all__ = [name for name in dir() if not name.startswith("_")]
