"""
Phasor arithmetic and harmonic spectra.

Magnitudes are rms everywhere; angles are radians in (-pi, pi] and
sin-referenced: a component M/theta at order h is the waveform
sqrt(2) * M * sin(h * w0 * t + theta).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np

from harmonic_flow.exceptions import UnknownPhaseError

SQRT2 = math.sqrt(2.0)
PHASES: Tuple[str, ...] = ("A", "B", "C")

# Sums smaller than this many ulps of the operands are rounding noise
_CANCELLATION_ULPS = 4.0 * np.finfo(float).eps


def normalize_angle(angle: float) -> float:
    """Wrap an angle in radians to (-pi, pi]"""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


@dataclass(frozen=True)
class Phasor:
    """An rms magnitude and a phase angle in radians"""

    magnitude: float
    angle: float = 0.0

    def __post_init__(self):
        magnitude = float(self.magnitude)
        angle = float(self.angle)
        if not (math.isfinite(magnitude) and math.isfinite(angle)):
            raise ValueError(f"Phasor components must be finite, got {magnitude}, {angle}")
        if magnitude < 0:
            raise ValueError(f"Phasor magnitude must be non-negative, got {magnitude}")
        # Zero has one representation
        angle = normalize_angle(angle) if magnitude > 0 else 0.0
        object.__setattr__(self, "magnitude", magnitude)
        object.__setattr__(self, "angle", angle)

    @classmethod
    def from_complex(cls, value: complex) -> "Phasor":
        magnitude, angle = cmath.polar(complex(value))
        return cls(magnitude, angle)

    @classmethod
    def from_degrees(cls, magnitude: float, angle_deg: float) -> "Phasor":
        return cls(magnitude, math.radians(angle_deg))

    @property
    def angle_deg(self) -> float:
        return math.degrees(self.angle)

    def to_complex(self) -> complex:
        return cmath.rect(self.magnitude, self.angle)

    def rotate(self, radians: float) -> "Phasor":
        return Phasor(self.magnitude, self.angle + radians)

    def __add__(self, other: "Phasor") -> "Phasor":
        return phasor_add(self, other)


ZERO = Phasor(0.0, 0.0)


def phasor_add(a: Phasor, b: Phasor) -> Phasor:
    """Complex sum of two phasors, returned in polar form"""
    total = a.to_complex() + b.to_complex()
    if abs(total) <= _CANCELLATION_ULPS * (a.magnitude + b.magnitude):
        return ZERO
    return Phasor.from_complex(total)


def phasor_sum(phasors: Iterable[Phasor]) -> Phasor:
    result = ZERO
    for phasor in phasors:
        result = phasor_add(result, phasor)
    return result


def in_phase_component(p: Phasor) -> float:
    """Peak projection onto the sin(h w0 t) reference"""
    return SQRT2 * p.magnitude * math.cos(p.angle)


def in_quadrature_component(p: Phasor) -> float:
    """Peak projection onto the cos(h w0 t) reference"""
    return SQRT2 * p.magnitude * math.sin(p.angle)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Per-order, per-phase phasors describing one voltage or current"""

    entries: Mapping[int, Mapping[str, Phasor]] = field(default_factory=dict)
    base_frequency: float = 60.0

    def __post_init__(self):
        entries: Dict[int, Dict[str, Phasor]] = {}
        phase_set = None
        for order, per_phase in self.entries.items():
            order = int(order)
            if order < 1:
                raise ValueError(f"Harmonic order must be >= 1, got {order}")
            if order in entries:
                raise ValueError(f"Duplicate harmonic order {order}")
            if phase_set is None:
                phase_set = set(per_phase)
            elif set(per_phase) != phase_set:
                raise ValueError(f"Order {order} phases {sorted(per_phase)} differ from {sorted(phase_set)}")
            entries[order] = dict(per_phase)
        if self.base_frequency <= 0:
            raise ValueError("Base frequency must be positive")
        object.__setattr__(self, "entries", dict(sorted(entries.items())))

    @property
    def orders(self) -> List[int]:
        return list(self.entries)

    @property
    def phases(self) -> Tuple[str, ...]:
        if not self.entries:
            return ()
        first = next(iter(self.entries.values()))
        return tuple(sorted(first, key=_phase_sort_key))

    def series(self, phase: str) -> List[Tuple[int, Phasor]]:
        """(order, phasor) pairs for one phase, ascending order"""
        if self.entries and phase not in self.phases:
            raise UnknownPhaseError(f"Phase {phase} not in spectrum phases {list(self.phases)}")
        return [(order, per_phase[phase]) for order, per_phase in self.entries.items()]

    def component(self, order: int, phase: str) -> Phasor:
        self.series(phase)
        per_phase = self.entries.get(order)
        if per_phase is None:
            return ZERO
        return per_phase[phase]


def _phase_sort_key(phase: str) -> Tuple[int, str]:
    return (PHASES.index(phase), phase) if phase in PHASES else (len(PHASES), phase)


def synthesize_waveform(
    s: HarmonicSpectrum,
    phase: str,
    t: Union[float, np.ndarray],
) -> Union[float, np.ndarray]:
    """Instantaneous value at time(s) t in seconds"""
    series = s.series(phase)
    t_array = np.asarray(t, dtype=float)
    if not series:
        return 0.0 if t_array.ndim == 0 else np.zeros_like(t_array)

    orders = np.array([order for order, _ in series], dtype=float)
    in_phase = np.array([in_phase_component(p) for _, p in series])
    in_quadrature = np.array([in_quadrature_component(p) for _, p in series])
    omega = 2.0 * math.pi * s.base_frequency

    arguments = np.multiply.outer(orders, omega * t_array)
    extra_dims = (1,) * t_array.ndim
    wave = (
        in_phase.reshape(-1, *extra_dims) * np.sin(arguments)
        + in_quadrature.reshape(-1, *extra_dims) * np.cos(arguments)
    ).sum(axis=0)
    if t_array.ndim == 0:
        return float(wave)
    return wave


def spectrum_rms(s: HarmonicSpectrum, phase: str) -> float:
    """Total rms of one phase over all orders"""
    magnitudes = np.array([p.magnitude for _, p in s.series(phase)], dtype=float)
    return float(np.sqrt(np.sum(magnitudes ** 2)))
