from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, List, Dict, Literal, Tuple, Union
import math

from harmonic_flow.config import Settings, settings


# [real, imag] pair as stored in network files
ComplexPair = Tuple[float, float]

DEFAULT_SWEEP_ANGLES = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0]
METRICS = ("thdv", "thdi", "phi_v", "phi_i")


# Network file schemas
class BaseSpec(BaseModel):
    frequency_hz: float = Field(default=60.0, gt=0)
    power_va: float = Field(..., gt=0, description="Three-phase base power")


class BusSpec(BaseModel):
    id: str
    phases: List[str]
    nominal_voltage_v: float = Field(..., description="Line-to-neutral nominal voltage")


class BranchSpec(BaseModel):
    id: str
    from_bus: str = Field(..., alias="from")
    to_bus: str = Field(..., alias="to")
    phases: List[str]
    z: List[List[ComplexPair]] = Field(..., description="Series impedance rows in ohms, referred to the to-bus")
    b_shunt: Optional[List[List[float]]] = Field(default=None, description="Total shunt susceptance rows in siemens")
    tap: float = Field(default=1.0, description="Off-nominal ratio applied on the from side")
    kind: Literal["line", "transformer"] = "line"

    class Config:
        populate_by_name = True


class LoadSpec(BaseModel):
    id: Optional[str] = None
    bus: str
    phases: List[str]
    connection: Literal["wye"] = "wye"
    power_va: List[ComplexPair] = Field(..., description="Per-phase complex power at the fundamental")
    model: Literal["power", "current", "impedance"] = "power"


class SpectrumEntrySpec(BaseModel):
    order: int
    magnitude_pct: float
    angle_deg: float = 0.0


class SequenceOffsetSpec(BaseModel):
    order: int
    offsets_deg: List[float]


class SourceSpec(BaseModel):
    id: Optional[str] = None
    bus: str
    phases: List[str]
    fundamental_base_a: float = Field(..., gt=0)
    spectrum: Union[str, List[SpectrumEntrySpec]]
    sequence: Union[Literal["auto"], List[SequenceOffsetSpec]] = "auto"


class PhasorSpec(BaseModel):
    magnitude_v: float
    angle_deg: float = 0.0


class SubstationSpec(BaseModel):
    bus: str
    voltage: List[PhasorSpec]
    impedance: List[List[ComplexPair]]


class NetworkFile(BaseModel):
    base: BaseSpec
    buses: List[BusSpec]
    branches: List[BranchSpec] = []
    loads: List[LoadSpec] = []
    sources: List[SourceSpec] = []
    substation: SubstationSpec


# Engine configuration
class AssessmentConfig(BaseModel):
    orders: List[int] = Field(default_factory=lambda: list(settings.orders))
    power_flow_tolerance: float = Field(default_factory=lambda: settings.power_flow_tolerance, gt=0)
    max_iterations: int = Field(default_factory=lambda: settings.max_iterations, ge=1)
    skin_effect: bool = Field(default_factory=lambda: settings.skin_effect)
    phi_include_fundamental: bool = Field(default_factory=lambda: settings.phi_include_fundamental)
    order_workers: int = Field(default_factory=lambda: settings.order_workers, ge=1)

    @field_validator("orders")
    @classmethod
    def orders_ascending(cls, orders: List[int]) -> List[int]:
        """Harmonic orders are solved once each, lowest first"""
        bad = [order for order in orders if order < 2]
        if bad:
            raise ValueError(f"Harmonic orders must be >= 2, got {bad}")
        return sorted(set(orders))

    @classmethod
    def from_settings(cls, source: Optional[Settings] = None, **overrides) -> "AssessmentConfig":
        source = source or settings
        values = {
            "orders": list(source.orders),
            "power_flow_tolerance": source.power_flow_tolerance,
            "max_iterations": source.max_iterations,
            "skin_effect": source.skin_effect,
            "phi_include_fundamental": source.phi_include_fundamental,
            "order_workers": source.order_workers,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


# Index schemas
class PhaseIndices(BaseModel):
    """Indices at one phase of a measurement point; current-based values need a branch point"""
    thdv: Optional[float] = Field(default=None, ge=0)  # percent
    thdi: Optional[float] = Field(default=None, ge=0)  # percent
    tpf: Optional[float] = Field(default=None, ge=0, le=1)
    phi_v: Optional[float] = Field(default=None, ge=0, le=1)
    phi_i: Optional[float] = Field(default=None, ge=0, le=1)


class IndexReport(BaseModel):
    point_id: str
    per_phase: Dict[str, PhaseIndices]


class BoxStats(BaseModel):
    min: float
    max: float
    mean: float
    median: float

    @model_validator(mode="after")
    def ordered(self) -> "BoxStats":
        if not (self.min <= self.median <= self.max and self.min <= self.mean <= self.max):
            raise ValueError("Box statistics out of order")
        return self


# Study schemas
class SweepSpec(BaseModel):
    source_ids: Tuple[str, str]
    angles: List[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP_ANGLES))
    metric: Literal["thdv", "thdi", "phi_v", "phi_i"] = "thdi"
    point: str = "substation"
    phase: str = "B"
    # Offset applied at order h is alpha * order_multipliers.get(h, 1)
    order_multipliers: Dict[int, float] = {}

    @field_validator("angles")
    @classmethod
    def angles_present(cls, angles: List[float]) -> List[float]:
        if not angles:
            raise ValueError("Sweep needs at least one angle")
        return angles

    @staticmethod
    def angle_range(start: float, stop: float, step: float) -> List[float]:
        """Inclusive angle list, e.g. 0..90 step 15 gives seven angles"""
        if step <= 0:
            raise ValueError("Angle step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + index * step for index in range(max(count, 0))]


class SweepCell(BaseModel):
    alpha: float
    beta: float
    value: float

    @property
    def label(self) -> str:
        return f"({self.alpha:g}, {self.beta:g})"


class SweepGrid(BaseModel):
    source_ids: Tuple[str, str]
    angles: List[float]
    metric: str
    point: str
    phase: str
    values: List[List[float]]  # values[i][j]: source 1 at angles[i], source 2 at angles[j]

    @model_validator(mode="after")
    def matches_angles(self) -> "SweepGrid":
        size = len(self.angles)
        if len(self.values) != size or any(len(row) != size for row in self.values):
            raise ValueError("Grid values do not match the angle list")
        if not all(math.isfinite(value) for row in self.values for value in row):
            raise ValueError("Grid values must be finite")
        return self

    def cells(self) -> List[SweepCell]:
        """Row-major: alpha outer, beta inner"""
        return [
            SweepCell(alpha=alpha, beta=beta, value=value)
            for alpha, row in zip(self.angles, self.values)
            for beta, value in zip(self.angles, row)
        ]

    def minimum(self) -> SweepCell:
        """Lowest cell; the first in row-major order on ties"""
        return min(self.cells(), key=lambda cell: cell.value)

    def maximum(self) -> SweepCell:
        return max(self.cells(), key=lambda cell: cell.value)

    def near_zero(self, tolerance: float) -> List[SweepCell]:
        """Cells where the sources cancel down to `tolerance`"""
        if tolerance < 0:
            raise ValueError("Tolerance must be non-negative")
        return [cell for cell in self.cells() if abs(cell.value) <= tolerance]


class ComparisonReport(BaseModel):
    points: Tuple[str, str]
    point_a: IndexReport
    point_b: IndexReport

    @model_validator(mode="after")
    def same_metric_set(self) -> "ComparisonReport":
        if list(self.point_a.per_phase) != list(self.point_b.per_phase):
            raise ValueError("Compared points must report the same phases")
        for phase, values_a in self.point_a.per_phase.items():
            values_b = self.point_b.per_phase[phase]
            if values_a.model_dump(exclude_none=True).keys() != values_b.model_dump(exclude_none=True).keys():
                raise ValueError(f"Compared points report different indices on phase {phase}")
        return self
