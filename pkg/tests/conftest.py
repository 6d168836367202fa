"""
Test configuration and fixtures for harmonic-flow tests.
"""
import copy
import json
from pathlib import Path
from typing import Dict

import numpy as np
import pytest

from harmonic_flow.models import NetworkModel
from harmonic_flow.network_service import admittance_at_order, load_network, node_list, parse_network_data
from harmonic_flow.schemas import AssessmentConfig


FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"
FIELD_INVERTER_PCT = {3: 2.83, 5: 0.52, 7: 0.84, 9: 0.21, 11: 0.03}


def fixture_path(name: str) -> Path:
    return FIXTURES_DIR / f"{name}.json"


def fixture_data(name: str) -> dict:
    """Fresh decoded copy of a bundled feeder, safe to mutate"""
    return copy.deepcopy(json.loads(fixture_path(name).read_text(encoding="utf-8")))


def network_from(data: dict, name: str = "test") -> NetworkModel:
    return parse_network_data(data, name=name)


def single_bus_data(impedance=(0.0, 0.1), magnitude_pct: float = 1.0) -> dict:
    """One phase-A substation bus (1000 V, Zbase 1 ohm) with a 3rd-harmonic source on it"""
    return {
        "base": {"frequency_hz": 60.0, "power_va": 3000000.0},
        "buses": [{"id": "sub", "phases": ["A"], "nominal_voltage_v": 1000.0}],
        "branches": [],
        "loads": [],
        "sources": [{
            "id": "HS1", "bus": "sub", "phases": ["A"], "fundamental_base_a": 100.0,
            "spectrum": [{"order": 3, "magnitude_pct": magnitude_pct, "angle_deg": 0.0}],
        }],
        "substation": {
            "bus": "sub",
            "voltage": [{"magnitude_v": 1000.0, "angle_deg": 0.0}],
            "impedance": [[list(impedance)]],
        },
    }


def dense_fundamental(m: NetworkModel, tolerance: float = 1e-13, max_iterations: int = 200) -> Dict:
    """
    Independent fundamental solution: fixed-point iteration on the dense nodal
    equations Y V = Ys E - I_load(V). Returns per-unit voltages by node.
    """
    nodes = node_list(m)
    position = {node: index for index, node in enumerate(nodes)}
    y = admittance_at_order(m, 1, include_loads=False).matrix.toarray()

    substation_bus = m.bus_index[m.substation.bus]
    source_index = [position[(substation_bus.id, phase)] for phase in substation_bus.phases]
    e = np.array([v.to_complex() for v in m.substation.source_voltage]) / m.voltage_base(substation_bus.id)
    zs = m.substation.source_impedance / m.impedance_base(substation_bus.id)
    norton = np.zeros(len(nodes), dtype=complex)
    norton[source_index] = np.linalg.solve(zs, e)

    flat = np.ones(len(nodes), dtype=complex)
    by_phase = dict(zip(substation_bus.phases, e))
    for index, (_, phase) in enumerate(nodes):
        flat[index] = by_phase[phase]

    voltages = flat.copy()
    for _ in range(max_iterations):
        draw = np.zeros(len(nodes), dtype=complex)
        for load in m.loads:
            for phase, power in zip(load.phases, load.power):
                index = position[(load.bus, phase)]
                s = power / m.phase_power_base
                if load.model == "power":
                    draw[index] += np.conj(s / voltages[index])
                elif load.model == "current":
                    draw[index] += np.conj(s / flat[index])
                else:
                    draw[index] += np.conj(s) * voltages[index]
        updated = np.linalg.solve(y, norton - draw)
        change = np.max(np.abs(updated - voltages))
        voltages = updated
        if change < tolerance:
            break
    return {node: voltages[index] for index, node in enumerate(nodes)}


@pytest.fixture
def config():
    """Assessment settings independent of the environment"""
    return AssessmentConfig(
        orders=[3, 5, 7, 9, 11],
        power_flow_tolerance=1e-10,
        max_iterations=100,
        skin_effect=False,
        phi_include_fundamental=True,
        order_workers=1,
    )


@pytest.fixture
def feeder_2bus():
    return load_network(fixture_path("feeder_2bus"))


@pytest.fixture
def feeder_y13():
    return load_network(fixture_path("feeder_y13"))


@pytest.fixture
def feeder_coupled3():
    return load_network(fixture_path("feeder_coupled3"))


@pytest.fixture
def feeder_stiff():
    return load_network(fixture_path("feeder_stiff"))


@pytest.fixture
def feeder_cancel():
    return load_network(fixture_path("feeder_cancel"))
