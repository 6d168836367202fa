"""
Distortion indices: THD, total power factor and the phasor harmonic index.
"""
import math
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from harmonic_flow.engine_service import MeasurementPoint, ResultStore, spectrum_at
from harmonic_flow.exceptions import IndexUndefinedError, UnknownPhaseError
from harmonic_flow.phasor import HarmonicSpectrum
from harmonic_flow.schemas import BoxStats, IndexReport, PhaseIndices


def thd(s: HarmonicSpectrum, phase: str) -> float:
    """
    Total harmonic distortion in percent.
    Serves both current (THDI) and voltage (THDV); only magnitudes matter.
    """
    series = s.series(phase)
    fundamental = next((p for order, p in series if order == 1), None)
    if fundamental is None or fundamental.magnitude <= 0:
        raise IndexUndefinedError(f"THD undefined on phase {phase}: no fundamental component")
    harmonics = np.array([p.magnitude for order, p in series if order >= 2], dtype=float)
    return float(100.0 * np.sqrt(np.sum(harmonics ** 2)) / fundamental.magnitude)


def total_power_factor(delta1: float, thdi: float) -> float:
    """cos(delta1) / sqrt(1 + thdi^2), thdi as a per-unit fraction"""
    if thdi < 0:
        raise ValueError(f"THDI must be non-negative, got {thdi}")
    return math.cos(delta1) / math.sqrt(1.0 + thdi * thdi)


def phi(s: HarmonicSpectrum, phase: str, include_fundamental: bool = True) -> float:
    """
    Phasor harmonic index: sum of |M_h cos(theta_h)| over sum of M_h.
    Both sides use rms magnitudes so the result stays within [0, 1].
    """
    first_order = 1 if include_fundamental else 2
    series = [(order, p) for order, p in s.series(phase) if order >= first_order]
    magnitudes = np.array([p.magnitude for _, p in series], dtype=float)
    total = float(np.sum(magnitudes))
    if not series or total <= 0:
        raise IndexUndefinedError(f"PHI undefined on phase {phase}: spectrum has no content")
    in_phase = np.array([abs(p.magnitude * math.cos(p.angle)) for _, p in series], dtype=float)
    return float(np.sum(in_phase)) / total


def box_stats(series: Sequence[float]) -> BoxStats:
    values = np.asarray(list(series), dtype=float)
    if values.size == 0:
        raise ValueError("Cannot summarize an empty series")
    low = float(np.min(values))
    high = float(np.max(values))
    # Rounding in the mean must not escape [min, max]
    mean = min(max(float(np.mean(values)), low), high)
    return BoxStats(min=low, max=high, mean=mean, median=float(np.median(values)))


def phase_indices(
    voltage: Optional[HarmonicSpectrum],
    current: Optional[HarmonicSpectrum],
    phase: str,
    include_fundamental: bool = True,
) -> PhaseIndices:
    """All four indices for one phase; current-based ones need a current spectrum"""
    values = {}
    if voltage is not None:
        values["thdv"] = thd(voltage, phase)
        values["phi_v"] = phi(voltage, phase, include_fundamental)
    if current is not None:
        values["thdi"] = thd(current, phase)
        values["phi_i"] = phi(current, phase, include_fundamental)
    if voltage is not None and current is not None:
        delta1 = voltage.component(1, phase).angle - current.component(1, phase).angle
        # Direction-agnostic: reverse flow reports the same factor
        values["tpf"] = abs(total_power_factor(delta1, values["thdi"] / 100.0))
    return PhaseIndices(**values)


def index_report(
    point_id: str,
    voltage: Optional[HarmonicSpectrum],
    current: Optional[HarmonicSpectrum],
    phases: Iterable[str],
    include_fundamental: bool = True,
) -> IndexReport:
    per_phase = {
        phase: phase_indices(voltage, current, phase, include_fundamental)
        for phase in phases
    }
    return IndexReport(point_id=point_id, per_phase=per_phase)


def point_report(
    store: ResultStore,
    point: str,
    phases: Optional[Sequence[str]] = None,
) -> IndexReport:
    """Indices at a measurement point; a bus point only yields voltage-based values"""
    resolved = store.catalog.resolve(point)
    available = store.catalog.phases(resolved)
    selected = list(phases) if phases else list(available)
    missing = [phase for phase in selected if phase not in available]
    if missing:
        raise UnknownPhaseError(f"Point {point} has no phase {missing[0]}; available {list(available)}")

    voltage = spectrum_at(store, resolved, "voltage")
    current = spectrum_at(store, resolved, "current") if resolved.is_branch else None
    return index_report(point, voltage, current, selected, store.config.phi_include_fundamental)


def metric_value(
    store: ResultStore,
    point: Union[str, MeasurementPoint],
    phase: str,
    metric: str,
) -> float:
    """One of thdv, thdi, phi_v, phi_i at one phase of a point"""
    kind = "voltage" if metric in ("thdv", "phi_v") else "current"
    spectrum = spectrum_at(store, point, kind)
    if metric.startswith("thd"):
        return thd(spectrum, phase)
    if metric.startswith("phi"):
        return phi(spectrum, phase, store.config.phi_include_fundamental)
    raise ValueError(f"Unknown metric {metric}")
