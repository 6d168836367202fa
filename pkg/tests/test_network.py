"""
Tests for network loading, validation findings, traversal and admittance assembly.
"""
import numpy as np
import pytest

from harmonic_flow.engine_service import solve_fundamental
from harmonic_flow.exceptions import NetworkIOError, NetworkParseError, NetworkValidationError
from harmonic_flow.network_service import (
    admittance_at_order,
    load_network,
    named_spectrum,
    node_list,
    scaled_impedance,
    traversal_order,
    validate_topology,
)
from tests.conftest import fixture_data, fixture_path, network_from


def codes(findings):
    return [finding.code for finding in findings]


@pytest.mark.unit
def test_y13_loads_clean(feeder_y13):
    """The bundled 13-bus feeder has 13 buses, 12 branches and no findings."""
    assert len(feeder_y13.buses) == 13
    assert len(feeder_y13.branches) == 12
    assert validate_topology(feeder_y13) == []
    assert feeder_y13.name == "feeder_y13"


@pytest.mark.unit
def test_named_spectrum_resolves():
    """Sources can reference the packaged field inverter spectrum."""
    entries = named_spectrum("field_inverter")
    assert [entry.order for entry in entries] == [3, 5, 7, 9, 11]
    assert entries[0].magnitude_pct == pytest.approx(2.83)
    with pytest.raises(NetworkParseError):
        named_spectrum("no_such_spectrum")


@pytest.mark.unit
def test_traversal_is_root_to_leaf(feeder_y13):
    """Each branch starts at the substation or at a bus already reached."""
    order = traversal_order(feeder_y13)
    assert len(order) == 12
    assert order[0].id == "b650_632"
    reached = {feeder_y13.substation.bus}
    for branch in order:
        assert branch.from_bus in reached
        reached.add(branch.to_bus)


@pytest.mark.unit
def test_unknown_bus_is_named():
    """A branch to a missing bus is reported with the missing id."""
    data = fixture_data("feeder_y13")
    data["branches"][3]["to"] = "X9"
    findings = validate_topology(network_from(data))
    unknown = [finding for finding in findings if finding.code == "unknown-bus"]
    assert len(unknown) == 1
    assert "X9" in unknown[0].message


@pytest.mark.unit
def test_cycle_gives_one_non_radial_finding():
    """A triangle of branches is rejected once, and traversal refuses it."""
    model = load_network(fixture_path("feeder_cyclic"), validate=False)
    findings = validate_topology(model)
    assert codes(findings) == ["non-radial"]
    assert "non-radial" in str(findings[0])
    with pytest.raises(NetworkValidationError):
        traversal_order(model)
    with pytest.raises(NetworkValidationError) as excinfo:
        load_network(fixture_path("feeder_cyclic"))
    assert excinfo.value.exit_code == 1


@pytest.mark.unit
def test_dimension_mismatch():
    """A three-phase branch needs a 3x3 impedance."""
    data = fixture_data("feeder_coupled3")
    data["branches"][1]["z"] = [[[0.1, 0.2], [0.0, 0.0]], [[0.0, 0.0], [0.1, 0.2]]]
    assert "dimension-mismatch" in codes(validate_topology(network_from(data)))


@pytest.mark.unit
def test_asymmetric_and_singular_impedance():
    """Coupling matrices must be symmetric and invertible."""
    data = fixture_data("feeder_coupled3")
    data["branches"][0]["z"][0][1] = [0.5, 0.5]
    data["branches"][1]["z"] = [[[0.0, 0.0]] * 3] * 3
    found = codes(validate_topology(network_from(data)))
    assert "asymmetric-impedance" in found
    assert "singular-impedance" in found


@pytest.mark.unit
def test_only_transformers_change_voltage():
    """A line between buses of different nominal voltage is flagged; a transformer is not."""
    data = fixture_data("feeder_stiff")
    svc = next(branch for branch in data["branches"] if branch["id"] == "svc")
    assert "voltage-mismatch" not in codes(validate_topology(network_from(data)))
    svc["kind"] = "line"
    findings = [finding for finding in validate_topology(network_from(data)) if finding.code == "voltage-mismatch"]
    assert len(findings) == 1
    assert findings[0].element == "svc"
    assert "277.13 V" in findings[0].message


@pytest.mark.unit
def test_orientation_and_disconnected():
    """Branches point away from the substation and every bus is reachable."""
    data = fixture_data("feeder_2bus")
    data["branches"][0]["from"], data["branches"][0]["to"] = "n2", "sub"
    data["buses"].append({"id": "n3", "phases": ["A"], "nominal_voltage_v": 1000.0})
    found = codes(validate_topology(network_from(data)))
    assert "orientation" in found
    assert "disconnected" in found


@pytest.mark.unit
def test_phase_findings():
    """Loads stay on their bus phases and every downstream phase is fed."""
    data = fixture_data("feeder_2bus")
    data["loads"][0]["phases"] = ["C"]
    data["buses"][1]["phases"] = ["A", "B"]
    found = codes(validate_topology(network_from(data)))
    assert "phase-mismatch" in found
    assert "unfed-phase" in found


@pytest.mark.unit
def test_duplicate_and_value_findings():
    """Ids are unique across buses and branches; values must be physical."""
    data = fixture_data("feeder_2bus")
    data["branches"][0]["id"] = "n2"
    data["buses"][1]["nominal_voltage_v"] = 0.0
    data["loads"][0]["power_va"] = [[-1000.0, 0.0]]
    data["sources"] = [{
        "id": "HS1", "bus": "n2", "phases": ["A"], "fundamental_base_a": 10.0,
        "spectrum": [{"order": 1, "magnitude_pct": 5.0}],
    }]
    found = codes(validate_topology(network_from(data)))
    assert "duplicate-id" in found
    assert found.count("invalid-value") == 2
    assert "invalid-order" in found


@pytest.mark.unit
def test_file_errors(tmp_path):
    """Missing files are I/O errors (exit 2); bad content is a parse error (exit 1)."""
    with pytest.raises(NetworkIOError) as excinfo:
        load_network(tmp_path / "missing.json")
    assert excinfo.value.exit_code == 2

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(NetworkParseError):
        load_network(broken)

    data = fixture_data("feeder_2bus")
    del data["substation"]
    with pytest.raises(NetworkParseError):
        network_from(data)

    data = fixture_data("feeder_coupled3")
    data["branches"][0]["z"][2] = [[0.1, 0.2]]
    with pytest.raises(NetworkParseError):
        network_from(data)


@pytest.mark.unit
def test_node_list_is_canonical(feeder_y13):
    """Bus order, phases A-B-C within a bus."""
    nodes = node_list(feeder_y13)
    assert nodes[:3] == [("sub", "A"), ("sub", "B"), ("sub", "C")]
    assert ("n611", "C") in nodes
    assert len(nodes) == 3 * 8 + 2 * 3 + 2


@pytest.mark.unit
def test_impedance_scaling():
    """Reactance grows with h; resistance only with skin effect."""
    z = np.array([[0.4 + 1.0j]])
    assert scaled_impedance(z, 5)[0, 0] == pytest.approx(0.4 + 5.0j)
    assert scaled_impedance(z, 4, skin_effect=True)[0, 0] == pytest.approx(0.8 + 4.0j)


@pytest.mark.unit
@pytest.mark.parametrize("h", [1, 3, 5, 11])
def test_two_bus_off_diagonal(feeder_2bus, h):
    """Y(h) off-diagonal is -1/Z(h) in per-unit (Zbase is 1 ohm here)."""
    y = admittance_at_order(feeder_2bus, h, include_loads=False).matrix.toarray()
    expected = -1.0 / (0.01 + 0.02j * h)
    assert y[0, 1] == pytest.approx(expected)
    assert y[1, 0] == pytest.approx(expected)
    assert y[1, 1] == pytest.approx(-expected)


@pytest.mark.unit
def test_tap_and_shunt_stamps():
    """Tap on the from side divides by t^2 and t; half the shunt sits at each end."""
    data = fixture_data("feeder_2bus")
    data["branches"][0]["tap"] = 1.05
    data["branches"][0]["b_shunt"] = [[0.002]]
    y = admittance_at_order(network_from(data), 3, include_loads=False).matrix.toarray()
    series = 1.0 / (0.01 + 0.06j)
    half_shunt = 0.5 * 3 * 0.002j
    zs = 1.0 / (0.0003j)
    assert y[0, 0] == pytest.approx((series + half_shunt) / 1.05 ** 2 + zs)
    assert y[0, 1] == pytest.approx(-series / 1.05)
    assert y[1, 1] == pytest.approx(series + half_shunt)


@pytest.mark.unit
def test_admittance_symmetric_with_loads(feeder_y13, config):
    """Reciprocal elements give a symmetric Y(h)."""
    fundamental = solve_fundamental(feeder_y13, config)
    y = admittance_at_order(feeder_y13, 5, fundamental).matrix.toarray()
    assert np.max(np.abs(y - y.T)) <= 1e-12 * np.max(np.abs(y))


@pytest.mark.unit
def test_series_only_rows_sum_to_zero(feeder_coupled3):
    """Away from the substation, a network of series branches has zero row sums."""
    admittance = admittance_at_order(feeder_coupled3, 7, include_loads=False)
    y = admittance.matrix.toarray()
    for node in [("n1", "A"), ("n1", "B"), ("n2", "C")]:
        row = y[admittance.position[node]]
        assert abs(row.sum()) <= 1e-9 * np.max(np.abs(row))


@pytest.mark.unit
def test_loads_need_fundamental(feeder_y13):
    """Load admittances come from fundamental voltages."""
    with pytest.raises(ValueError):
        admittance_at_order(feeder_y13, 3)
