"""
Tests for CLI argument helpers (network lookup, list parsing).
"""
import pytest

from harmonic_flow.config import settings
from harmonic_flow.dependencies import (
    get_config,
    parse_csv_list,
    parse_orders,
    parse_phases,
    require_count,
    resolve_network_path,
)
from harmonic_flow.exceptions import NetworkIOError, UnknownPhaseError
from tests.conftest import FIXTURES_DIR, fixture_path


@pytest.mark.unit
def test_resolve_network_by_path_and_name(tmp_path, monkeypatch):
    """Existing files win; bare names are looked up in the fixtures directory."""
    assert resolve_network_path(str(fixture_path("feeder_2bus"))) == fixture_path("feeder_2bus")
    monkeypatch.setattr(settings, "fixtures_dir", FIXTURES_DIR)
    assert resolve_network_path("feeder_2bus") == FIXTURES_DIR / "feeder_2bus.json"
    with pytest.raises(NetworkIOError):
        resolve_network_path(str(tmp_path / "nothing.json"))


@pytest.mark.unit
def test_list_parsing():
    """Blank items are dropped, whitespace trimmed."""
    assert parse_csv_list(" a, b ,,c ") == ["a", "b", "c"]
    assert parse_csv_list(None) == []
    assert parse_orders("3, 5") == [3, 5]
    assert parse_orders(None) is None
    assert parse_orders("") == []
    with pytest.raises(ValueError):
        parse_orders("3,x")


@pytest.mark.unit
def test_phase_parsing():
    """ALL means every phase at the point."""
    assert parse_phases("ALL") is None
    assert parse_phases("all") is None
    assert parse_phases("a,C") == ["A", "C"]
    with pytest.raises(UnknownPhaseError):
        parse_phases("A,N")


@pytest.mark.unit
def test_get_config_overrides_orders():
    """Command-line orders replace the configured ones."""
    assert get_config("9,3").orders == [3, 9]
    assert get_config(None, skin_effect=True).skin_effect is True


@pytest.mark.unit
def test_require_count():
    """Exactly the requested number of items."""
    assert require_count(["a", "b"], 2, "points") == ["a", "b"]
    with pytest.raises(ValueError):
        require_count(["a"], 2, "points")
