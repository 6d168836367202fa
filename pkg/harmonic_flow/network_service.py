"""
Network file loading, topology checks and per-order nodal admittance assembly.

Files carry ohms, siemens, volts and VA; the admittance matrix is built in
per-unit on the model's per-phase power base and each bus's nominal voltage.
"""
import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from networkx.utils import UnionFind
from pydantic import ValidationError
from scipy import sparse

from harmonic_flow.exceptions import (
    NetworkIOError,
    NetworkParseError,
    NetworkValidationError,
    SingularBranchError,
    SingularSystemError,
)
from harmonic_flow.logger import logger
from harmonic_flow.models import (
    Branch,
    Bus,
    HarmonicSource,
    Load,
    NetworkModel,
    SpectrumComponent,
    SubstationEquivalent,
)
from harmonic_flow.phasor import PHASES, Phasor
from harmonic_flow.schemas import NetworkFile, SourceSpec, SpectrumEntrySpec

SYMMETRY_RTOL = 1e-9
VOLTAGE_RTOL = 1e-6
TOPOLOGY_CODES = ("non-radial", "disconnected", "orientation", "unknown-bus")

Node = Tuple[str, str]  # (bus id, phase)


@dataclass(frozen=True)
class Finding:
    code: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


# Loading
def load_network(path: Union[str, Path], validate: bool = True) -> NetworkModel:
    """Read, parse and (by default) validate a network file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.log_internal(level="ERROR", event="network_read", network=str(path), error=str(e))
        raise NetworkIOError(f"Cannot read network file {path}: {e.strerror or e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkParseError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e

    model = parse_network_data(data, name=path.stem)
    if validate:
        findings = validate_topology(model)
        if findings:
            logger.log_internal(
                level="WARN",
                event="network_invalid",
                network=model.name,
                error=str(findings[0]),
                findings=len(findings)
            )
            raise NetworkValidationError(findings)

    logger.log_internal(
        level="INFO",
        event="network_loaded",
        network=model.name,
        buses=len(model.buses),
        branches=len(model.branches)
    )
    return model


def parse_network_data(data: dict, name: str = "") -> NetworkModel:
    """Build a model from decoded file content; semantic checks are left to validate_topology"""
    try:
        spec = NetworkFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise NetworkParseError(f"{name or 'network'}: {location}: {first['msg']}") from e

    try:
        substation = SubstationEquivalent(
            bus=spec.substation.bus,
            source_voltage=tuple(
                Phasor.from_degrees(voltage.magnitude_v, voltage.angle_deg)
                for voltage in spec.substation.voltage
            ),
            source_impedance=_complex_matrix(spec.substation.impedance, "substation impedance"),
        )
    except ValueError as e:
        raise NetworkParseError(f"{name or 'network'}: substation: {e}") from e

    return NetworkModel(
        buses=tuple(Bus(bus.id, tuple(bus.phases), bus.nominal_voltage_v) for bus in spec.buses),
        branches=tuple(_branch(branch) for branch in spec.branches),
        loads=tuple(
            Load(
                id=load.id or f"load{index + 1}",
                bus=load.bus,
                phases=tuple(load.phases),
                power=tuple(complex(p, q) for p, q in load.power_va),
                model=load.model,
                connection=load.connection,
            )
            for index, load in enumerate(spec.loads)
        ),
        sources=tuple(_source(source, index) for index, source in enumerate(spec.sources)),
        substation=substation,
        base_frequency=spec.base.frequency_hz,
        base_power=spec.base.power_va,
        name=name,
    )


def named_spectrum(name: str) -> List[SpectrumEntrySpec]:
    """Spectrum shipped under harmonic_flow/spectra"""
    resource = resources.files("harmonic_flow.spectra").joinpath(f"{name}.json")
    if not resource.is_file():
        raise NetworkParseError(f"Unknown spectrum '{name}'")
    payload = json.loads(resource.read_text(encoding="utf-8"))
    return [SpectrumEntrySpec.model_validate(entry) for entry in payload["spectrum"]]


def _complex_matrix(rows: Sequence[Sequence[Tuple[float, float]]], element: str) -> np.ndarray:
    widths = {len(row) for row in rows}
    if len(widths) > 1:
        raise NetworkParseError(f"{element}: rows have different lengths {sorted(widths)}")
    width = widths.pop() if widths else 0
    values = [complex(real, imag) for row in rows for real, imag in row]
    return np.array(values, dtype=complex).reshape(len(rows), width)


def _branch(spec) -> Branch:
    size = len(spec.phases)
    if spec.b_shunt is None:
        shunt = np.zeros((size, size), dtype=complex)
    else:
        widths = {len(row) for row in spec.b_shunt}
        if len(widths) > 1:
            raise NetworkParseError(f"branch {spec.id} b_shunt: rows have different lengths {sorted(widths)}")
        width = widths.pop() if widths else 0
        shunt = 1j * np.array(spec.b_shunt, dtype=float).reshape(len(spec.b_shunt), width)
    return Branch(
        id=spec.id,
        from_bus=spec.from_bus,
        to_bus=spec.to_bus,
        phases=tuple(spec.phases),
        series_impedance=_complex_matrix(spec.z, f"branch {spec.id} z"),
        shunt_admittance=shunt,
        tap=spec.tap,
        kind=spec.kind,
    )


def _source(spec: SourceSpec, index: int) -> HarmonicSource:
    source_id = spec.id or f"source{index + 1}"
    entries = named_spectrum(spec.spectrum) if isinstance(spec.spectrum, str) else spec.spectrum
    spectrum: Dict[int, SpectrumComponent] = {}
    for entry in entries:
        if entry.order in spectrum:
            raise NetworkParseError(f"source {source_id}: duplicate spectrum order {entry.order}")
        spectrum[entry.order] = SpectrumComponent(entry.magnitude_pct, entry.angle_deg)

    sequence = None
    if spec.sequence != "auto":
        sequence = {offset.order: tuple(offset.offsets_deg) for offset in spec.sequence}

    return HarmonicSource(
        id=source_id,
        bus=spec.bus,
        phases=tuple(spec.phases),
        fundamental_base=spec.fundamental_base_a,
        spectrum_pct=dict(sorted(spectrum.items())),
        sequence=sequence,
    )


# Validation
def validate_topology(m: NetworkModel) -> List[Finding]:
    """Every violated model invariant as one finding; empty means the model is usable"""
    findings: List[Finding] = []
    findings.extend(_id_findings(m))
    findings.extend(_bus_findings(m))
    findings.extend(_branch_findings(m))
    findings.extend(_load_findings(m))
    findings.extend(_source_findings(m))
    findings.extend(_substation_findings(m))
    topology, _ = _topology(m)
    findings.extend(topology)
    return findings


def _id_findings(m: NetworkModel) -> List[Finding]:
    findings = []
    for kind, ids in (
        ("bus", [bus.id for bus in m.buses]),
        ("branch", [branch.id for branch in m.branches]),
        ("load", [load.id for load in m.loads]),
        ("source", [source.id for source in m.sources]),
    ):
        seen = set()
        for element_id in ids:
            if element_id in seen:
                findings.append(Finding("duplicate-id", element_id, f"{kind} id {element_id} is used more than once"))
            seen.add(element_id)

    # Measurement points name buses and branches from one namespace
    for branch in m.branches:
        if branch.id in m.bus_index:
            findings.append(Finding("duplicate-id", branch.id, f"branch id {branch.id} is also a bus id"))
    return findings


def _phase_findings(kind: str, element_id: str, phases: Sequence[str]) -> List[Finding]:
    if not phases:
        return [Finding("invalid-phase", element_id, f"{kind} {element_id} has no phases")]
    findings = []
    unknown = [phase for phase in phases if phase not in PHASES]
    if unknown:
        findings.append(Finding("invalid-phase", element_id, f"{kind} {element_id} has unknown phases {unknown}"))
    if len(set(phases)) != len(phases):
        findings.append(Finding("invalid-phase", element_id, f"{kind} {element_id} repeats a phase"))
    return findings


def _subset_finding(kind: str, element_id: str, phases: Sequence[str], bus: Optional[Bus]) -> List[Finding]:
    if bus is None:
        return []
    missing = [phase for phase in phases if phase not in bus.phases]
    if missing:
        return [Finding("phase-mismatch", element_id, f"{kind} {element_id} uses phases {missing} absent at bus {bus.id}")]
    return []


def _unknown_bus(kind: str, element_id: str, bus_id: str, m: NetworkModel) -> List[Finding]:
    if bus_id in m.bus_index:
        return []
    return [Finding("unknown-bus", element_id, f"{kind} {element_id} references unknown bus {bus_id}")]


def _is_singular(matrix: np.ndarray) -> bool:
    return matrix.size > 0 and np.linalg.matrix_rank(matrix) < matrix.shape[0]


def _bus_findings(m: NetworkModel) -> List[Finding]:
    findings = []
    for bus in m.buses:
        findings.extend(_phase_findings("bus", bus.id, bus.phases))
        if not bus.nominal_voltage > 0:
            findings.append(Finding("invalid-value", bus.id, f"bus {bus.id} nominal voltage must be positive"))
    return findings


def _branch_findings(m: NetworkModel) -> List[Finding]:
    findings = []
    for branch in m.branches:
        findings.extend(_unknown_bus("branch", branch.id, branch.from_bus, m))
        findings.extend(_unknown_bus("branch", branch.id, branch.to_bus, m))
        findings.extend(_phase_findings("branch", branch.id, branch.phases))
        findings.extend(_subset_finding("branch", branch.id, branch.phases, m.bus_index.get(branch.from_bus)))
        findings.extend(_subset_finding("branch", branch.id, branch.phases, m.bus_index.get(branch.to_bus)))
        if not branch.tap > 0:
            findings.append(Finding("invalid-value", branch.id, f"branch {branch.id} tap must be positive"))
        findings.extend(_voltage_finding(branch, m))

        size = len(branch.phases)
        z = branch.series_impedance
        if z.shape != (size, size):
            findings.append(Finding(
                "dimension-mismatch", branch.id,
                f"branch {branch.id} impedance is {z.shape[0]}x{z.shape[1]} for {size} phases"
            ))
            continue
        if branch.shunt_admittance.shape != (size, size):
            findings.append(Finding(
                "dimension-mismatch", branch.id,
                f"branch {branch.id} shunt admittance shape {branch.shunt_admittance.shape} for {size} phases"
            ))
        if not np.allclose(z, z.T, rtol=SYMMETRY_RTOL, atol=0.0):
            findings.append(Finding("asymmetric-impedance", branch.id, f"branch {branch.id} impedance is not symmetric"))
        if _is_singular(z):
            findings.append(Finding("singular-impedance", branch.id, f"branch {branch.id} impedance is singular"))
    return findings


def _voltage_finding(branch: Branch, m: NetworkModel) -> List[Finding]:
    """Only transformers may join buses of different nominal voltage"""
    from_bus, to_bus = m.bus_index.get(branch.from_bus), m.bus_index.get(branch.to_bus)
    if branch.kind != "line" or from_bus is None or to_bus is None:
        return []
    if math.isclose(from_bus.nominal_voltage, to_bus.nominal_voltage, rel_tol=VOLTAGE_RTOL):
        return []
    return [Finding(
        "voltage-mismatch", branch.id,
        f"line {branch.id} joins {from_bus.id} ({from_bus.nominal_voltage:g} V) and {to_bus.id} ({to_bus.nominal_voltage:g} V)"
    )]


def _load_findings(m: NetworkModel) -> List[Finding]:
    findings = []
    for load in m.loads:
        findings.extend(_unknown_bus("load", load.id, load.bus, m))
        findings.extend(_phase_findings("load", load.id, load.phases))
        findings.extend(_subset_finding("load", load.id, load.phases, m.bus_index.get(load.bus)))
        if len(load.power) != len(load.phases):
            findings.append(Finding(
                "dimension-mismatch", load.id,
                f"load {load.id} has {len(load.power)} power values for {len(load.phases)} phases"
            ))
        if any(power.real < 0 for power in load.power):
            findings.append(Finding("invalid-value", load.id, f"load {load.id} has negative real power"))
    return findings


def _source_findings(m: NetworkModel) -> List[Finding]:
    findings = []
    for source in m.sources:
        findings.extend(_unknown_bus("source", source.id, source.bus, m))
        findings.extend(_phase_findings("source", source.id, source.phases))
        findings.extend(_subset_finding("source", source.id, source.phases, m.bus_index.get(source.bus)))
        if len(source.phases) not in (1, 3):
            findings.append(Finding("invalid-phase", source.id, f"source {source.id} must be single or three phase"))
        low_orders = [order for order in source.spectrum_pct if order < 2]
        if low_orders:
            findings.append(Finding("invalid-order", source.id, f"source {source.id} injects at orders {low_orders} below 2"))
        if any(component.magnitude_pct < 0 for component in source.spectrum_pct.values()):
            findings.append(Finding("invalid-value", source.id, f"source {source.id} has a negative magnitude"))
        for order, offsets in (source.sequence or {}).items():
            if len(offsets) != len(source.phases):
                findings.append(Finding(
                    "dimension-mismatch", source.id,
                    f"source {source.id} order {order} has {len(offsets)} offsets for {len(source.phases)} phases"
                ))
    return findings


def _substation_findings(m: NetworkModel) -> List[Finding]:
    substation = m.substation
    bus = m.bus_index.get(substation.bus)
    if bus is None:
        return [Finding("unknown-bus", "substation", f"substation references unknown bus {substation.bus}")]
    findings = []
    size = len(bus.phases)
    if len(substation.source_voltage) != size:
        findings.append(Finding(
            "dimension-mismatch", "substation",
            f"substation has {len(substation.source_voltage)} voltages for {size} phases at bus {bus.id}"
        ))
    if any(voltage.magnitude <= 0 for voltage in substation.source_voltage):
        findings.append(Finding("invalid-value", "substation", "substation voltage magnitudes must be positive"))
    zs = substation.source_impedance
    if zs.shape != (size, size):
        findings.append(Finding(
            "dimension-mismatch", "substation",
            f"substation impedance is {zs.shape[0]}x{zs.shape[1]} for {size} phases"
        ))
    elif _is_singular(zs):
        findings.append(Finding("singular-impedance", "substation", "substation impedance is singular"))
    return findings


def _topology(m: NetworkModel) -> Tuple[List[Finding], nx.Graph]:
    """Spanning tree from the substation plus any findings that break radiality"""
    findings: List[Finding] = []
    graph = nx.Graph()
    graph.add_nodes_from(bus.id for bus in m.buses)
    components = UnionFind(graph.nodes)

    for branch in m.branches:
        if branch.from_bus not in m.bus_index or branch.to_bus not in m.bus_index:
            continue
        if branch.from_bus == branch.to_bus:
            findings.append(Finding(
                "non-radial", branch.id,
                f"non-radial: branch {branch.id} connects bus {branch.from_bus} to itself"
            ))
            continue
        if components[branch.from_bus] == components[branch.to_bus]:
            findings.append(Finding(
                "non-radial", branch.id,
                f"non-radial: cycle through branch {branch.id} ({branch.from_bus} - {branch.to_bus})"
            ))
            continue
        components.union(branch.from_bus, branch.to_bus)
        graph.add_edge(branch.from_bus, branch.to_bus, branch=branch.id)

    root = m.substation.bus
    if root not in m.bus_index:
        return findings, graph

    depth = nx.single_source_shortest_path_length(graph, root)
    for bus in m.buses:
        if bus.id not in depth:
            findings.append(Finding("disconnected", bus.id, f"bus {bus.id} is not connected to substation bus {root}"))

    for branch in m.branches:
        if not graph.has_edge(branch.from_bus, branch.to_bus):
            continue
        if graph[branch.from_bus][branch.to_bus]["branch"] != branch.id:
            continue
        if branch.from_bus not in depth:
            continue
        if depth[branch.to_bus] < depth[branch.from_bus]:
            findings.append(Finding(
                "orientation", branch.id,
                f"branch {branch.id} points toward the substation ({branch.from_bus} -> {branch.to_bus})"
            ))
            continue
        to_bus = m.bus_index[branch.to_bus]
        unfed = [phase for phase in to_bus.phases if phase not in branch.phases]
        if unfed:
            findings.append(Finding(
                "unfed-phase", to_bus.id,
                f"bus {to_bus.id} phases {unfed} are not fed by branch {branch.id}"
            ))
    return findings, graph


def traversal_order(m: NetworkModel) -> List[Branch]:
    """Branches root-to-leaf: every branch follows the branch feeding its from-bus"""
    findings, graph = _topology(m)
    findings.extend(
        finding for finding in _branch_findings(m) + _substation_findings(m)
        if finding.code == "unknown-bus"
    )
    blocking = [finding for finding in findings if finding.code in TOPOLOGY_CODES]
    if blocking:
        raise NetworkValidationError(blocking)
    return [
        m.branch_index[graph[parent][child]["branch"]]
        for parent, child in nx.bfs_edges(graph, m.substation.bus)
    ]


# Admittance assembly
def node_list(m: NetworkModel) -> List[Node]:
    """Bus-phase nodes in bus order, phases A-B-C within a bus"""
    return [
        (bus.id, phase)
        for bus in m.buses
        for phase in sorted(bus.phases, key=lambda p: PHASES.index(p) if p in PHASES else len(PHASES))
    ]


def scaled_impedance(z: np.ndarray, h: int, skin_effect: bool = False) -> np.ndarray:
    """Z(h) = R + j*h*X, with R scaled by sqrt(h) when skin effect is on"""
    resistance_scale = np.sqrt(h) if skin_effect else 1.0
    return z.real * resistance_scale + 1j * h * z.imag


def scaled_shunt(y: np.ndarray, h: int) -> np.ndarray:
    """Capacitive susceptance grows with h; conductance stays"""
    return y.real + 1j * h * y.imag


@dataclass(frozen=True, eq=False)
class BranchBlocks:
    """Per-unit pi-section of one branch at one order"""
    impedance: np.ndarray
    admittance: np.ndarray
    shunt_half: np.ndarray
    tap: float
    from_index: np.ndarray
    to_index: np.ndarray


def branch_blocks(
    m: NetworkModel,
    branch: Branch,
    h: int,
    position: Dict[Node, int],
    skin_effect: bool = False,
) -> BranchBlocks:
    z_base = m.impedance_base(branch.to_bus)
    impedance = scaled_impedance(branch.series_impedance, h, skin_effect) / z_base
    try:
        admittance = np.linalg.inv(impedance)
    except np.linalg.LinAlgError as e:
        raise SingularBranchError(branch.id) from e
    return BranchBlocks(
        impedance=impedance,
        admittance=admittance,
        shunt_half=scaled_shunt(branch.shunt_admittance, h) * z_base / 2.0,
        tap=branch.tap,
        from_index=np.array([position[(branch.from_bus, phase)] for phase in branch.phases], dtype=int),
        to_index=np.array([position[(branch.to_bus, phase)] for phase in branch.phases], dtype=int),
    )


def substation_impedance(m: NetworkModel, h: int) -> np.ndarray:
    """Per-unit source impedance at order h"""
    return scaled_impedance(m.substation.source_impedance, h) / m.impedance_base(m.substation.bus)


@dataclass(frozen=True, eq=False)
class NodalAdmittance:
    order: int
    matrix: sparse.csc_matrix  # per-unit
    nodes: Tuple[Node, ...]
    branches: Dict[str, BranchBlocks]

    @cached_property
    def position(self) -> Dict[Node, int]:
        return {node: index for index, node in enumerate(self.nodes)}


def admittance_at_order(
    m: NetworkModel,
    h: int,
    fundamental=None,
    skin_effect: bool = False,
    include_loads: bool = True,
) -> NodalAdmittance:
    """
    Nodal admittance Y(h) indexed by bus-phase.
    Loads enter as conj(S)/|V1|^2 using the fundamental solution's bus voltages.
    """
    if h < 1:
        raise ValueError(f"Harmonic order must be >= 1, got {h}")
    if include_loads and m.loads and fundamental is None:
        raise ValueError("Load admittances need the fundamental solution")

    nodes = node_list(m)
    position = {node: index for index, node in enumerate(nodes)}
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    data: List[np.ndarray] = []

    def stamp(row_index: np.ndarray, col_index: np.ndarray, block: np.ndarray):
        grid_rows, grid_cols = np.meshgrid(row_index, col_index, indexing="ij")
        rows.append(grid_rows.ravel())
        cols.append(grid_cols.ravel())
        data.append(np.asarray(block, dtype=complex).ravel())

    blocks: Dict[str, BranchBlocks] = {}
    for branch in m.branches:
        block = branch_blocks(m, branch, h, position, skin_effect)
        blocks[branch.id] = block
        tap = block.tap
        stamp(block.from_index, block.from_index, (block.admittance + block.shunt_half) / tap ** 2)
        stamp(block.from_index, block.to_index, -block.admittance / tap)
        stamp(block.to_index, block.from_index, -block.admittance / tap)
        stamp(block.to_index, block.to_index, block.admittance + block.shunt_half)

    substation_bus = m.bus_index[m.substation.bus]
    source_index = np.array([position[(substation_bus.id, phase)] for phase in substation_bus.phases], dtype=int)
    try:
        stamp(source_index, source_index, np.linalg.inv(substation_impedance(m, h)))
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(h, "substation impedance is singular") from e

    if include_loads:
        for load in m.loads:
            v_base = m.voltage_base(load.bus)
            for phase, power in zip(load.phases, load.power):
                voltage = fundamental.node_voltages[(load.bus, phase)].magnitude / v_base
                if voltage <= 0:
                    raise SingularSystemError(h, f"load {load.id} bus {load.bus} has zero fundamental voltage")
                index = np.array([position[(load.bus, phase)]])
                admittance = np.conj(power / m.phase_power_base) / voltage ** 2
                stamp(index, index, np.array([[admittance]]))

    size = len(nodes)
    if data:
        matrix = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        ).tocsc()
    else:
        matrix = sparse.csc_matrix((size, size), dtype=complex)
    return NodalAdmittance(order=h, matrix=matrix, nodes=tuple(nodes), branches=blocks)
