"""
Network data model: buses, coupled branches, loads, harmonic sources and the
substation equivalent. Values are immutable once loaded and stay in file units
(volts, ohms, siemens, VA, amps); per-unit bases are derived on demand.
"""
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from harmonic_flow.phasor import PHASES, Phasor


def phase_position(phase: str) -> int:
    """Index used by the sequence rule: A=0, B=1, C=2"""
    return PHASES.index(phase)


@dataclass(frozen=True)
class Bus:
    id: str
    phases: Tuple[str, ...]
    nominal_voltage: float  # volts line-to-neutral


@dataclass(frozen=True, eq=False)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    phases: Tuple[str, ...]
    series_impedance: np.ndarray  # ohms, referred to the to-bus, off-diagonals are mutual terms
    shunt_admittance: np.ndarray  # siemens, total; half is placed at each end
    tap: float = 1.0
    kind: str = "line"


@dataclass(frozen=True, eq=False)
class SubstationEquivalent:
    bus: str
    source_voltage: Tuple[Phasor, ...]  # volts, one per substation bus phase
    source_impedance: np.ndarray  # ohms


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    phases: Tuple[str, ...]
    power: Tuple[complex, ...]  # VA per phase at the fundamental
    model: str = "power"
    connection: str = "wye"


@dataclass(frozen=True)
class SpectrumComponent:
    magnitude_pct: float  # percent of the fundamental injection base
    base_angle: float  # degrees


@dataclass(frozen=True)
class HarmonicSource:
    id: str
    bus: str
    phases: Tuple[str, ...]
    fundamental_base: float  # amps rms per phase
    spectrum_pct: Mapping[int, SpectrumComponent]
    sequence: Optional[Mapping[int, Tuple[float, ...]]] = None  # None selects the automatic rule

    def injection_angle_deg(self, order: int, phase: str) -> float:
        """
        Injection angle of one phase at one order.
        The automatic rule shifts phase p by -order * (0, 120, 240)[p] degrees, giving
        zero-sequence 3rd/9th, negative 5th/11th and positive 7th on balanced sources.
        """
        component = self.spectrum_pct[order]
        if self.sequence is not None and order in self.sequence:
            return component.base_angle + self.sequence[order][self.phases.index(phase)]
        return component.base_angle - order * 120.0 * phase_position(phase)

    def rotated(self, angle_deg: float, order_multipliers: Optional[Mapping[int, float]] = None) -> "HarmonicSource":
        """Same magnitudes, base angles advanced by angle_deg (scaled per order if asked)"""
        multipliers = order_multipliers or {}
        spectrum = {
            order: SpectrumComponent(
                component.magnitude_pct,
                component.base_angle + angle_deg * multipliers.get(order, 1.0),
            )
            for order, component in self.spectrum_pct.items()
        }
        return replace(self, spectrum_pct=spectrum)

    def on_phase(self, phase: str) -> "HarmonicSource":
        """Single-phase copy of this source injecting on `phase` only"""
        sequence = None
        if self.sequence is not None and phase in self.phases:
            position = self.phases.index(phase)
            sequence = {order: (offsets[position],) for order, offsets in self.sequence.items()}
        return replace(self, phases=(phase,), sequence=sequence)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    loads: Tuple[Load, ...]
    sources: Tuple[HarmonicSource, ...]
    substation: SubstationEquivalent
    base_frequency: float = 60.0
    base_power: float = 1e6  # VA, three-phase
    name: str = field(default="", compare=False)

    @cached_property
    def bus_index(self) -> Dict[str, Bus]:
        return {bus.id: bus for bus in self.buses}

    @cached_property
    def branch_index(self) -> Dict[str, Branch]:
        return {branch.id: branch for branch in self.branches}

    @cached_property
    def source_index(self) -> Dict[str, HarmonicSource]:
        return {source.id: source for source in self.sources}

    @property
    def phase_power_base(self) -> float:
        return self.base_power / 3.0

    def voltage_base(self, bus_id: str) -> float:
        return self.bus_index[bus_id].nominal_voltage

    def current_base(self, bus_id: str) -> float:
        return self.phase_power_base / self.voltage_base(bus_id)

    def impedance_base(self, bus_id: str) -> float:
        return self.voltage_base(bus_id) ** 2 / self.phase_power_base

    def with_sources(self, sources: Tuple[HarmonicSource, ...]) -> "NetworkModel":
        return replace(self, sources=tuple(sources))

    def with_branches(self, branches: Tuple[Branch, ...]) -> "NetworkModel":
        return replace(self, branches=tuple(branches))
