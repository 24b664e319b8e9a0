"""Performance metrics from traces and curves, plus comparison reporting.

Definitions: torque ripple is (max - min) / mean in percent; copper loss
counts both phases at the per-phase RMS current; core loss enters as the
configured constant; input power is the sum of output power and losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .characteristics import CommutationAngles, TorqueAngleCurve
from .geometry import MotorSpec
from .simulate import SimulationTrace


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PerformanceMetrics:
    """Derived steady-state quantities of one run."""

    t_mean: float          # [N.m]
    t_peak: float          # [N.m]
    ripple_pct: float      # [%]
    i_rms: float           # per-phase RMS [A]
    p_d: float             # output power [W]
    p_cu: float            # copper losses [W]
    p_core: float          # core losses [W]
    p_total_loss: float    # [W]
    p_in: float            # [W]
    efficiency_pct: float  # [%]
    torque_density: float  # [N.m/L]
    torque_per_amp: float  # [N.m/A]
    power_per_amp: float   # [W/A]
    speed_rpm: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def derive_metrics(
    t_mean: float,
    i_rms: float,
    speed_rpm: float,
    volume_l: float,
    p_cu: float,
    p_core: float,
    t_peak: float | None = None,
    t_min: float = 0.0,
) -> PerformanceMetrics:
    """Build the full metric set from primary quantities."""
    if t_mean <= 0:
        raise MetricsError("no net positive torque")
    if i_rms <= 0:
        raise MetricsError("RMS current must be positive")
    t_peak = t_mean if t_peak is None else t_peak
    omega = speed_rpm * math.pi / 30.0
    p_d = t_mean * omega
    p_loss = p_cu + p_core
    p_in = p_d + p_loss
    return PerformanceMetrics(
        t_mean=t_mean,
        t_peak=t_peak,
        ripple_pct=100.0 * (t_peak - t_min) / t_mean,
        i_rms=i_rms,
        p_d=p_d,
        p_cu=p_cu,
        p_core=p_core,
        p_total_loss=p_loss,
        p_in=p_in,
        efficiency_pct=100.0 * p_d / p_in,
        torque_density=t_mean / volume_l,
        torque_per_amp=t_mean / i_rms,
        power_per_amp=p_d / i_rms,
        speed_rpm=speed_rpm,
    )


def compute_metrics(trace: SimulationTrace, spec: MotorSpec) -> PerformanceMetrics:
    """Metrics over a steady-state trace slice.

    The per-phase RMS current pools both phases (they are symmetric over
    whole electrical cycles); copper loss then counts two phases at that
    RMS.
    """
    t_mean = float(np.mean(trace.t_total))
    if t_mean <= 0:
        raise MetricsError("no net positive torque")
    i_rms_sq = 0.5 * (float(np.mean(trace.i_a**2)) + float(np.mean(trace.i_b**2)))
    i_rms = math.sqrt(i_rms_sq)
    return derive_metrics(
        t_mean=t_mean,
        i_rms=i_rms,
        speed_rpm=trace.speed_rpm,
        volume_l=spec.active_volume,
        p_cu=2.0 * i_rms_sq * spec.R_phase,
        p_core=spec.P_core_const,
        t_peak=float(np.max(trace.t_total)),
        t_min=float(np.min(trace.t_total)),
    )


def reconstruct_reported_row(
    t_mean: float,
    i_rms: float,
    total_losses: float,
    volume_l: float,
    speed_rpm: float,
) -> dict:
    """Derived cells as they appear in a printed performance table.

    Power quantities are exact; the power-per-ampere cell quotes the output
    power at its two-decimal reporting precision (truncated, the way such
    tables are assembled from already-printed columns).
    """
    omega = speed_rpm * math.pi / 30.0
    p_d = t_mean * omega
    p_in = p_d + total_losses
    p_d_printed = math.floor(p_d * 100.0) / 100.0
    return {
        "p_d": p_d,
        "p_in": p_in,
        "torque_density": t_mean / volume_l,
        "torque_per_amp": t_mean / i_rms,
        "power_per_amp": p_d_printed / i_rms,
        "efficiency_pct": 100.0 * p_d / p_in,
    }


def static_summary(
    curve: TorqueAngleCurve, window: CommutationAngles
) -> tuple[float, float]:
    """(mean, peak) torque over the conduction window of a static curve.

    The window runs from the effective unaligned position forward to the
    effective aligned position, wrapping around the period.
    """
    period = curve.period
    start = window.unaligned_angle % period
    width = (window.aligned_angle - window.unaligned_angle) % period
    if width <= 0.0:
        raise MetricsError("empty conduction window")
    angles = curve.angles[:-1]
    torque = curve.torque[:-1]
    rel = (angles - start) % period
    mask = rel <= width + 1e-9
    if not np.any(mask):
        raise MetricsError("empty conduction window")
    return float(np.mean(torque[mask])), float(np.max(torque[mask]))


def percent_increase(base: float, other: float) -> float:
    """Relative increase of other over base, percent."""
    if base <= 0:
        raise MetricsError(f"baseline must be positive, got {base}")
    return 100.0 * (other - base) / base


def prediction_error(predicted: float, measured: float) -> float:
    """Absolute relative deviation of a measurement from its prediction, percent."""
    if predicted <= 0:
        raise MetricsError(f"predicted value must be positive, got {predicted}")
    return 100.0 * abs(predicted - measured) / predicted


# -- comparison report ----------------------------------------------------------

_REPORT_COLUMNS = [
    "label", "speed_rpm", "i_rms", "t_mean", "t_peak", "ripple_pct",
    "p_d", "p_cu", "p_core", "p_total_loss", "p_in",
    "torque_density", "torque_per_amp", "power_per_amp", "efficiency_pct",
    "torque_per_pm_volume", "t_mean_increase_pct", "speed_mismatch",
]


@dataclass
class ComparisonReport:
    rows: list[dict]
    baseline_label: str
    warnings: list[str]

    def to_csv(self) -> str:
        lines = [",".join(_REPORT_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in _REPORT_COLUMNS:
                value = row.get(col)
                if value is None:
                    cells.append("")
                elif isinstance(value, str):
                    cells.append(value)
                elif isinstance(value, bool):
                    cells.append("yes" if value else "no")
                else:
                    cells.append(f"{value:.6g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        headers = [c for c in _REPORT_COLUMNS if any(r.get(c) is not None for r in self.rows)]
        table = [headers]
        for row in self.rows:
            out = []
            for col in headers:
                value = row.get(col)
                if value is None:
                    out.append("-")
                elif isinstance(value, str):
                    out.append(value)
                elif isinstance(value, bool):
                    out.append("yes" if value else "no")
                else:
                    out.append(f"{value:.4g}")
            table.append(out)
        widths = [max(len(r[k]) for r in table) for k in range(len(headers))]
        lines = []
        for r_idx, row in enumerate(table):
            lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
            if r_idx == 0:
                lines.append("  ".join("-" * w for w in widths))
        if self.warnings:
            lines.append("")
            lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


def comparison_report(
    metrics: list[PerformanceMetrics],
    labels: list[str],
    baseline: int = 0,
    pm_volumes_ml: list[float] | None = None,
) -> ComparisonReport:
    """Side-by-side metric table with percent increases against a baseline.

    Magnet-equipped entries additionally report torque per magnet volume
    when their volume is supplied.
    """
    if len(metrics) < 2:
        raise MetricsError("comparison needs at least two entries")
    if len(labels) != len(metrics):
        raise MetricsError("labels and metrics must align")
    if pm_volumes_ml is not None and len(pm_volumes_ml) != len(metrics):
        raise MetricsError("pm volumes and metrics must align")
    if not 0 <= baseline < len(metrics):
        raise MetricsError(f"baseline index {baseline} out of range")

    base = metrics[baseline]
    warnings = []
    rows = []
    for k, (m, label) in enumerate(zip(metrics, labels)):
        mismatch = abs(m.speed_rpm - base.speed_rpm) > 1e-9
        if mismatch:
            warnings.append(
                f"{label}: speed {m.speed_rpm} rpm differs from baseline "
                f"{base.speed_rpm} rpm"
            )
        row = dict(m.as_dict(), label=label, speed_mismatch=mismatch)
        row["t_mean_increase_pct"] = percent_increase(base.t_mean, m.t_mean)
        pm_ml = pm_volumes_ml[k] if pm_volumes_ml is not None else 0.0
        row["torque_per_pm_volume"] = (
            m.t_mean / (pm_ml / 1000.0) if pm_ml and pm_ml > 0 else None
        )
        rows.append(row)
    return ComparisonReport(rows=rows, baseline_label=labels[baseline], warnings=warnings)


def percent_matrix(
    means: dict[str, float], baseline: str
) -> dict[str, float]:
    """Mean-torque percent increase of every entry against one baseline."""
    base = means[baseline]
    return {label: percent_increase(base, value) for label, value in means.items()}
