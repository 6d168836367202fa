"""
Fundamental power flow (backward/forward sweep) and per-order harmonic solves.

Internally everything is per-unit on node vectors ordered like node_list();
solutions handed out are in volts and amps.
"""
import cmath
import math
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from threading import Lock
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import splu

from harmonic_flow.exceptions import (
    HarmonicFlowError,
    NonConvergenceError,
    ResidualError,
    SingularBranchError,
    SingularSystemError,
    UnknownPointError,
)
from harmonic_flow.logger import logger
from harmonic_flow.models import Branch, Bus, NetworkModel, phase_position
from harmonic_flow.network_service import (
    BranchBlocks,
    Node,
    admittance_at_order,
    branch_blocks,
    node_list,
    substation_impedance,
    traversal_order,
)
from harmonic_flow.phasor import PHASES, HarmonicSpectrum, Phasor, phasor_sum
from harmonic_flow.schemas import AssessmentConfig

# Solve residual bound, relative to max(1, |I|inf)
RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PerOrderSolution:
    order: int
    node_voltages: Mapping[Node, Phasor]  # volts
    branch_currents: Mapping[Tuple[str, str], Phasor]  # amps at the sending end, from-bus side
    receiving_currents: Mapping[Tuple[str, str], Phasor]  # amps arriving at the to-bus
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True)
class MeasurementPoint:
    element: str
    end: Optional[str] = None  # None for a bus, "from" or "to" for a branch

    @property
    def is_branch(self) -> bool:
        return self.end is not None

    @property
    def label(self) -> str:
        return f"{self.element}@to" if self.end == "to" else self.element


@dataclass(frozen=True)
class PointCatalog:
    """What a measurement point name can refer to in one network"""

    bus_phases: Mapping[str, Tuple[str, ...]]
    branch_phases: Mapping[str, Tuple[str, ...]]
    branch_ends: Mapping[str, Tuple[str, str]]
    head_branch: Optional[str] = None

    @classmethod
    def from_model(cls, m: NetworkModel) -> "PointCatalog":
        head = next(
            (branch.id for branch in traversal_order(m) if branch.from_bus == m.substation.bus),
            None,
        )
        return cls(
            bus_phases={bus.id: _canonical(bus.phases) for bus in m.buses},
            branch_phases={branch.id: tuple(branch.phases) for branch in m.branches},
            branch_ends={branch.id: (branch.from_bus, branch.to_bus) for branch in m.branches},
            head_branch=head,
        )

    def resolve(self, text: str) -> MeasurementPoint:
        """
        `<bus>`, `<branch>` or `<branch>@from` (sending end), `<branch>@to` (receiving end).
        `substation` names the sending end of the first branch leaving the substation bus.
        """
        element, _, end = text.strip().partition("@")
        if end and end not in ("from", "to"):
            raise UnknownPointError(f"Unknown branch end '{end}' in point {text}")
        if element in self.bus_phases:
            if end:
                raise UnknownPointError(f"Bus point {element} takes no end suffix")
            return MeasurementPoint(element)
        if element in self.branch_phases:
            return MeasurementPoint(element, end or "from")
        if element == "substation" and not end:
            if self.head_branch is None:
                raise UnknownPointError("No branch leaves the substation bus")
            return MeasurementPoint(self.head_branch, "from")
        raise UnknownPointError(f"Unknown measurement point {text}")

    def phases(self, point: MeasurementPoint) -> Tuple[str, ...]:
        if point.is_branch:
            return self.branch_phases[point.element]
        return self.bus_phases[point.element]

    def voltage_bus(self, point: MeasurementPoint) -> str:
        if not point.is_branch:
            return point.element
        from_bus, to_bus = self.branch_ends[point.element]
        return to_bus if point.end == "to" else from_bus


@dataclass(frozen=True, eq=False)
class ResultStore:
    fundamental: PerOrderSolution
    harmonics: Mapping[int, PerOrderSolution]
    config: AssessmentConfig
    catalog: PointCatalog
    base_frequency: float = 60.0
    network: str = ""
    run_id: str = field(default="", compare=False)

    @property
    def orders(self) -> List[int]:
        return list(self.harmonics)

    def solutions(self) -> List[PerOrderSolution]:
        return [self.fundamental, *self.harmonics.values()]

    @property
    def max_residual(self) -> float:
        return max((solution.residual for solution in self.harmonics.values()), default=0.0)


def _canonical(phases) -> Tuple[str, ...]:
    return tuple(sorted(phases, key=lambda p: PHASES.index(p) if p in PHASES else len(PHASES)))


# Fundamental power flow
@dataclass
class _BranchFlow:
    sending: np.ndarray
    series: np.ndarray
    receiving: np.ndarray


class _LoadModel:
    """Per-node load current drawn at a given voltage vector"""

    def __init__(self, m: NetworkModel, position: Dict[Node, int], flat: np.ndarray):
        power_index, power, current_index, current, impedance_index, admittance = [], [], [], [], [], []
        for load in m.loads:
            for phase, load_power in zip(load.phases, load.power):
                index = position[(load.bus, phase)]
                s = load_power / m.phase_power_base
                if load.model == "power":
                    power_index.append(index)
                    power.append(s)
                elif load.model == "current":
                    # Fixed at the flat-start voltage
                    current_index.append(index)
                    current.append(np.conj(s / flat[index]))
                else:
                    # conj(S) / |V_nominal|^2 with V_nominal = 1 pu
                    impedance_index.append(index)
                    admittance.append(np.conj(s))
        self.power_index = np.array(power_index, dtype=int)
        self.power = np.array(power, dtype=complex)
        self.current_index = np.array(current_index, dtype=int)
        self.current = np.array(current, dtype=complex)
        self.impedance_index = np.array(impedance_index, dtype=int)
        self.admittance = np.array(admittance, dtype=complex)

    def currents(self, voltages: np.ndarray) -> np.ndarray:
        total = np.zeros_like(voltages)
        with np.errstate(divide="ignore", invalid="ignore"):
            np.add.at(total, self.power_index, np.conj(self.power / voltages[self.power_index]))
        np.add.at(total, self.current_index, self.current)
        np.add.at(total, self.impedance_index, self.admittance * voltages[self.impedance_index])
        return total


def _flat_start(nodes: List[Node], substation_bus: Bus, source_voltage: np.ndarray) -> np.ndarray:
    by_phase = dict(zip(substation_bus.phases, source_voltage))
    return np.array(
        [
            by_phase.get(phase, cmath.rect(1.0, -2.0 * math.pi / 3.0 * phase_position(phase)))
            for _, phase in nodes
        ],
        dtype=complex,
    )


def _backward_sweep(
    order: List[Branch],
    blocks: Dict[str, BranchBlocks],
    voltages: np.ndarray,
    load_current: np.ndarray,
) -> Tuple[Dict[str, _BranchFlow], np.ndarray]:
    """Branch currents leaf-to-root; also returns the total current leaving each node"""
    outgoing = np.zeros_like(voltages)
    flows: Dict[str, _BranchFlow] = {}
    for branch in reversed(order):
        block = blocks[branch.id]
        receiving = load_current[block.to_index] + outgoing[block.to_index]
        series = receiving + block.shunt_half @ voltages[block.to_index]
        sending = (series + block.shunt_half @ voltages[block.from_index] / block.tap) / block.tap
        outgoing[block.from_index] += sending
        flows[branch.id] = _BranchFlow(sending=sending, series=series, receiving=receiving)
    return flows, load_current + outgoing


def _forward_sweep(
    order: List[Branch],
    blocks: Dict[str, BranchBlocks],
    flows: Dict[str, _BranchFlow],
    node_current: np.ndarray,
    source_index: np.ndarray,
    source_voltage: np.ndarray,
    source_impedance: np.ndarray,
) -> np.ndarray:
    voltages = np.zeros_like(node_current)
    voltages[source_index] = source_voltage - source_impedance @ node_current[source_index]
    for branch in order:
        block = blocks[branch.id]
        voltages[block.to_index] = (
            voltages[block.from_index] / block.tap - block.impedance @ flows[branch.id].series
        )
    return voltages


def solve_fundamental(
    m: NetworkModel,
    cfg: Optional[AssessmentConfig] = None,
    run_id: Optional[str] = None,
) -> PerOrderSolution:
    """Backward/forward sweep from a flat start until max |dV| < tolerance (pu)"""
    cfg = cfg or AssessmentConfig.from_settings()
    order = traversal_order(m)
    nodes = node_list(m)
    position = {node: index for index, node in enumerate(nodes)}
    blocks = {branch.id: branch_blocks(m, branch, 1, position) for branch in m.branches}

    substation_bus = m.bus_index[m.substation.bus]
    source_index = np.array([position[(substation_bus.id, phase)] for phase in substation_bus.phases], dtype=int)
    source_voltage = np.array(
        [voltage.to_complex() for voltage in m.substation.source_voltage], dtype=complex
    ) / m.voltage_base(substation_bus.id)
    source_impedance = substation_impedance(m, 1)

    flat = _flat_start(nodes, substation_bus, source_voltage)
    loads = _LoadModel(m, position, flat)
    voltages = flat.copy()
    mismatch = math.inf
    iterations = 0
    while iterations < cfg.max_iterations:
        iterations += 1
        flows, node_current = _backward_sweep(order, blocks, voltages, loads.currents(voltages))
        updated = _forward_sweep(order, blocks, flows, node_current, source_index, source_voltage, source_impedance)
        if not np.all(np.isfinite(updated)):
            mismatch = math.inf
            break
        mismatch = float(np.max(np.abs(updated - voltages))) if len(nodes) else 0.0
        voltages = updated
        if mismatch < cfg.power_flow_tolerance:
            break

    if not mismatch < cfg.power_flow_tolerance:
        logger.log_solve(
            event="power_flow",
            status="error",
            network=m.name,
            order=1,
            iterations=iterations,
            mismatch=mismatch,
            run_id=run_id,
            error="no convergence"
        )
        raise NonConvergenceError(iterations, mismatch)

    # Currents consistent with the converged voltages
    flows, _ = _backward_sweep(order, blocks, voltages, loads.currents(voltages))
    logger.log_solve(
        event="power_flow",
        status="ok",
        network=m.name,
        order=1,
        iterations=iterations,
        mismatch=mismatch,
        run_id=run_id
    )
    return _solution(m, 1, nodes, voltages, flows, iterations, mismatch)


def _solution(
    m: NetworkModel,
    order: int,
    nodes: List[Node],
    voltages: np.ndarray,
    flows: Dict[str, _BranchFlow],
    iterations: int,
    residual: float,
) -> PerOrderSolution:
    node_voltages = {
        node: Phasor.from_complex(voltages[index] * m.voltage_base(node[0]))
        for index, node in enumerate(nodes)
    }
    sending: Dict[Tuple[str, str], Phasor] = {}
    receiving: Dict[Tuple[str, str], Phasor] = {}
    for branch in m.branches:
        flow = flows[branch.id]
        from_base = m.current_base(branch.from_bus)
        to_base = m.current_base(branch.to_bus)
        for k, phase in enumerate(branch.phases):
            sending[(branch.id, phase)] = Phasor.from_complex(flow.sending[k] * from_base)
            receiving[(branch.id, phase)] = Phasor.from_complex(flow.receiving[k] * to_base)
    return PerOrderSolution(
        order=order,
        node_voltages=node_voltages,
        branch_currents=sending,
        receiving_currents=receiving,
        iterations=iterations,
        residual=residual,
    )


# Harmonic orders
def injection_currents(m: NetworkModel, h: int) -> Dict[Node, Phasor]:
    """
    Source currents (amps) per bus-phase at order h.
    Magnitude is pct/100 of the source's fundamental base; sources at one node add as phasors.
    """
    contributions: Dict[Node, List[Phasor]] = {}
    for source in m.sources:
        component = source.spectrum_pct.get(h)
        if component is None:
            continue
        magnitude = component.magnitude_pct / 100.0 * source.fundamental_base
        for phase in source.phases:
            phasor = Phasor.from_degrees(magnitude, source.injection_angle_deg(h, phase))
            contributions.setdefault((source.bus, phase), []).append(phasor)
    return {node: phasor_sum(phasors) for node, phasors in contributions.items()}


def solve_harmonic_order(
    m: NetworkModel,
    fundamental: PerOrderSolution,
    h: int,
    cfg: Optional[AssessmentConfig] = None,
    run_id: Optional[str] = None,
) -> PerOrderSolution:
    """Y(h) V(h) = I(h) by sparse LU; substation voltage source is shorted at harmonics"""
    cfg = cfg or AssessmentConfig.from_settings()
    try:
        admittance = admittance_at_order(m, h, fundamental, cfg.skin_effect)
    except SingularBranchError as e:
        logger.log_solve(event="harmonic_solve", status="error", network=m.name, order=h, run_id=run_id, error=e.detail)
        raise SingularBranchError(e.branch_id, h) from e
    position = admittance.position

    injections = np.zeros(len(admittance.nodes), dtype=complex)
    for (bus_id, phase), current in injection_currents(m, h).items():
        injections[position[(bus_id, phase)]] += current.to_complex() / m.current_base(bus_id)

    try:
        factor = splu(admittance.matrix)
        voltages = factor.solve(injections)
    except RuntimeError as e:
        logger.log_solve(event="harmonic_solve", status="error", network=m.name, order=h, run_id=run_id, error=str(e))
        raise SingularSystemError(h, str(e)) from e
    if not np.all(np.isfinite(voltages)):
        raise SingularSystemError(h, "solution is not finite")

    residual = float(np.max(np.abs(admittance.matrix @ voltages - injections), initial=0.0))
    bound = RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(injections), initial=0.0)))
    if residual > bound:
        logger.log_solve(
            event="harmonic_solve", status="error", network=m.name, order=h, residual=residual, run_id=run_id
        )
        raise ResidualError(h, residual, bound)

    flows = {}
    for branch_id, block in admittance.branches.items():
        from_voltage = voltages[block.from_index] / block.tap
        to_voltage = voltages[block.to_index]
        series = block.admittance @ (from_voltage - to_voltage)
        flows[branch_id] = _BranchFlow(
            sending=(series + block.shunt_half @ from_voltage) / block.tap,
            series=series,
            receiving=series - block.shunt_half @ to_voltage,
        )

    logger.log_solve(event="harmonic_solve", status="ok", network=m.name, order=h, residual=residual, run_id=run_id)
    return _solution(m, h, list(admittance.nodes), voltages, flows, 0, residual)


def run_assessment(
    m: NetworkModel,
    cfg: Optional[AssessmentConfig] = None,
    fundamental: Optional[PerOrderSolution] = None,
    run_id: Optional[str] = None,
) -> ResultStore:
    """
    Fundamental flow (unless one is supplied) followed by every configured order.
    Orders are independent; with order_workers > 1 they run on a thread pool.
    """
    cfg = cfg or AssessmentConfig.from_settings()
    run_id = run_id or str(uuid.uuid4())
    catalog = PointCatalog.from_model(m)
    if fundamental is None:
        fundamental = solve_fundamental(m, cfg, run_id)

    results: Dict[int, PerOrderSolution] = {}
    lock = Lock()

    def solve_one(h: int):
        solution = solve_harmonic_order(m, fundamental, h, cfg, run_id)
        with lock:
            results[h] = solution

    if cfg.order_workers > 1 and len(cfg.orders) > 1:
        with ThreadPoolExecutor(max_workers=cfg.order_workers) as pool:
            for future in [pool.submit(solve_one, h) for h in cfg.orders]:
                future.result()
    else:
        for h in cfg.orders:
            solve_one(h)

    return ResultStore(
        fundamental=fundamental,
        harmonics={h: results[h] for h in cfg.orders},
        config=cfg,
        catalog=catalog,
        base_frequency=m.base_frequency,
        network=m.name,
        run_id=run_id,
    )


def spectrum_at(
    store: ResultStore,
    point: Union[str, MeasurementPoint],
    kind: str,
) -> HarmonicSpectrum:
    """Voltage or current spectrum (fundamental plus solved orders) at one point"""
    if isinstance(point, str):
        point = store.catalog.resolve(point)
    phases = store.catalog.phases(point)

    if kind == "voltage":
        bus_id = store.catalog.voltage_bus(point)
        entries = {
            solution.order: {phase: solution.node_voltages[(bus_id, phase)] for phase in phases}
            for solution in store.solutions()
        }
    elif kind == "current":
        if not point.is_branch:
            raise UnknownPointError(f"Bus point {point.element} has no current; use a branch point")
        entries = {
            solution.order: {
                phase: (solution.branch_currents if point.end == "from" else solution.receiving_currents)[
                    (point.element, phase)
                ]
                for phase in phases
            }
            for solution in store.solutions()
        }
    else:
        raise ValueError(f"Spectrum kind must be 'voltage' or 'current', got {kind}")
    return HarmonicSpectrum(entries, base_frequency=store.base_frequency)
