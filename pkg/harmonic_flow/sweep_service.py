"""
Multi-source studies: angle sweeps, coupled-phase statistics and point comparison.

Each sweep cell is a full assessment of a rotated copy of the network. Source
rotations never touch the fundamental, so one power flow is shared by every cell.
"""
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Mapping, Optional, Sequence, TypeVar

from harmonic_flow.config import settings
from harmonic_flow.engine_service import PerOrderSolution, ResultStore, run_assessment, solve_fundamental
from harmonic_flow.exceptions import (
    HarmonicFlowError,
    StudyError,
    UnknownPhaseError,
    UnknownPointError,
    UnknownSourceError,
)
from harmonic_flow.indices_service import box_stats, metric_value, point_report
from harmonic_flow.logger import logger
from harmonic_flow.models import NetworkModel
from harmonic_flow.schemas import (
    DEFAULT_SWEEP_ANGLES,
    METRICS,
    AssessmentConfig,
    BoxStats,
    ComparisonReport,
    SweepGrid,
    SweepSpec,
)

T = TypeVar("T")

# source id -> rotation in degrees
Rotation = Mapping[str, float]


def rotate_sources(
    m: NetworkModel,
    rotation: Rotation,
    order_multipliers: Optional[Mapping[int, float]] = None,
) -> NetworkModel:
    """Copy of the network with the named sources' base angles advanced"""
    return m.with_sources(tuple(
        source.rotated(rotation[source.id], order_multipliers) if source.id in rotation else source
        for source in m.sources
    ))


def _require_sources(m: NetworkModel, source_ids: Sequence[str]):
    for source_id in source_ids:
        if source_id not in m.source_index:
            raise UnknownSourceError(f"Unknown source {source_id}")
    if len(set(source_ids)) != len(source_ids):
        raise UnknownSourceError(f"Sources must be distinct, got {list(source_ids)}")


def _cell_label(rotation: Rotation) -> str:
    return "cell (" + ", ".join(f"{source_id}={angle:g} deg" for source_id, angle in rotation.items()) + ")"


def _evaluate_cells(
    m: NetworkModel,
    cfg: AssessmentConfig,
    rotations: List[Rotation],
    reader: Callable[[ResultStore], T],
    order_multipliers: Optional[Mapping[int, float]] = None,
    fundamental: Optional[PerOrderSolution] = None,
    max_workers: Optional[int] = None,
    study: str = "sweep",
) -> List[T]:
    """Assess every rotation on a thread pool; results keep the input order"""
    run_id = str(uuid.uuid4())
    fundamental = fundamental or solve_fundamental(m, cfg, run_id)
    logger.log_study(event=study, status="start", study=study, network=m.name, cells=len(rotations), run_id=run_id)

    def evaluate(rotation: Rotation) -> T:
        try:
            store = run_assessment(rotate_sources(m, rotation, order_multipliers), cfg, fundamental, run_id)
            return reader(store)
        except HarmonicFlowError as e:
            label = _cell_label(rotation)
            logger.log_study(
                event=study, status="error", study=study, network=m.name, cell=label, run_id=run_id, error=e.detail
            )
            raise StudyError(label, e) from e

    with ThreadPoolExecutor(max_workers=max_workers or settings.sweep_workers) as pool:
        results = list(pool.map(evaluate, rotations))

    logger.log_study(event=study, status="end", study=study, network=m.name, cells=len(rotations), run_id=run_id)
    return results


def evaluate_cell(
    m: NetworkModel,
    cfg: AssessmentConfig,
    spec: SweepSpec,
    alpha: float,
    beta: float,
) -> float:
    """Metric for a single (alpha, beta) cell, computed from scratch"""
    _require_sources(m, spec.source_ids)
    first, second = spec.source_ids
    rotated = rotate_sources(m, {first: alpha, second: beta}, spec.order_multipliers)
    return metric_value(run_assessment(rotated, cfg), spec.point, spec.phase, spec.metric)


def angle_sweep(
    m: NetworkModel,
    cfg: AssessmentConfig,
    spec: SweepSpec,
    max_workers: Optional[int] = None,
) -> SweepGrid:
    """
    Grid of one metric over two source rotations: values[i][j] has the first
    source rotated by angles[i] and the second by angles[j].
    """
    _require_sources(m, spec.source_ids)
    first, second = spec.source_ids
    rotations = [{first: alpha, second: beta} for alpha in spec.angles for beta in spec.angles]
    flat = _evaluate_cells(
        m, cfg, rotations,
        reader=lambda store: metric_value(store, spec.point, spec.phase, spec.metric),
        order_multipliers=spec.order_multipliers,
        max_workers=max_workers,
        study="angle_sweep",
    )
    size = len(spec.angles)
    return SweepGrid(
        source_ids=spec.source_ids,
        angles=list(spec.angles),
        metric=spec.metric,
        point=spec.point,
        phase=spec.phase,
        values=[flat[row * size:(row + 1) * size] for row in range(size)],
    )


def coupled_phase_study(
    m: NetworkModel,
    cfg: AssessmentConfig,
    injected_phase: str,
    angles: Optional[Sequence[float]] = None,
    point: str = "substation",
    metric: str = "phi_i",
    source_ids: Optional[Sequence[str]] = None,
    max_workers: Optional[int] = None,
) -> Dict[str, BoxStats]:
    """
    Restrict the sources to one phase, rotate them over the angle grid and
    summarize the metric on every phase of the point.
    Uninjected phases only see what the coupled impedances transfer.
    """
    if metric not in METRICS:
        raise ValueError(f"Unknown metric {metric}")
    angles = list(angles if angles is not None else DEFAULT_SWEEP_ANGLES)
    source_ids = list(source_ids or [source.id for source in m.sources[:2]])
    if not source_ids:
        raise UnknownSourceError("Coupled-phase study needs at least one source")
    _require_sources(m, source_ids)

    for source_id in source_ids:
        bus = m.bus_index[m.source_index[source_id].bus]
        if injected_phase not in bus.phases:
            raise UnknownPhaseError(f"Source {source_id} bus {bus.id} has no phase {injected_phase}")
    single_phase = m.with_sources(tuple(
        source.on_phase(injected_phase) if source.id in source_ids else source
        for source in m.sources
    ))

    if len(source_ids) == 1:
        rotations = [{source_ids[0]: alpha} for alpha in angles]
    else:
        first, second = source_ids[:2]
        rotations = [{first: alpha, second: beta} for alpha in angles for beta in angles]

    def reader(store: ResultStore) -> Dict[str, float]:
        resolved = store.catalog.resolve(point)
        return {
            phase: metric_value(store, resolved, phase, metric)
            for phase in store.catalog.phases(resolved)
        }

    cells = _evaluate_cells(single_phase, cfg, rotations, reader, max_workers=max_workers, study="coupled_phase")
    return {phase: box_stats([cell[phase] for cell in cells]) for phase in cells[0]}


def compare_points(
    m: NetworkModel,
    cfg: AssessmentConfig,
    point_a: str,
    point_b: str,
    phases: Optional[Sequence[str]] = None,
) -> ComparisonReport:
    """Same indices at two points from one assessment; both points must be buses or both branches"""
    store = run_assessment(m, cfg)
    resolved_a = store.catalog.resolve(point_a)
    resolved_b = store.catalog.resolve(point_b)
    if resolved_a.is_branch != resolved_b.is_branch:
        raise UnknownPointError(
            f"Cannot compare bus and branch points ({point_a}, {point_b}): current indices exist only at branches"
        )
    if not phases:
        phases_a = store.catalog.phases(resolved_a)
        phases_b = set(store.catalog.phases(resolved_b))
        phases = [phase for phase in phases_a if phase in phases_b]
        if not phases:
            raise UnknownPhaseError(f"Points {point_a} and {point_b} share no phase")
    return ComparisonReport(
        points=(point_a, point_b),
        point_a=point_report(store, point_a, phases),
        point_b=point_report(store, point_b, phases),
    )
