from pathlib import Path
from typing import List, Optional, Sequence

from harmonic_flow.config import settings
from harmonic_flow.exceptions import NetworkIOError, UnknownPhaseError
from harmonic_flow.models import NetworkModel
from harmonic_flow.network_service import load_network
from harmonic_flow.phasor import PHASES
from harmonic_flow.schemas import AssessmentConfig


def resolve_network_path(network: str) -> Path:
    """A file path, or the name of a bundled feeder in settings.fixtures_dir"""
    path = Path(network)
    if path.is_file():
        return path
    for candidate in (settings.fixtures_dir / network, settings.fixtures_dir / f"{network}.json"):
        if candidate.is_file():
            return candidate
    raise NetworkIOError(f"Network file not found: {network}")


def get_network(network: str, validate: bool = True) -> NetworkModel:
    return load_network(resolve_network_path(network), validate=validate)


def parse_csv_list(text: Optional[str]) -> List[str]:
    if not text:
        return []
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_orders(text: Optional[str]) -> Optional[List[int]]:
    """None keeps the configured orders; an empty string asks for the fundamental only"""
    if text is None:
        return None
    items = parse_csv_list(text)
    try:
        return [int(item) for item in items]
    except ValueError as e:
        raise ValueError(f"Orders must be integers, got '{text}'") from e


def parse_phases(text: Optional[str]) -> Optional[List[str]]:
    """None for ALL; otherwise validated phase letters"""
    if not text or text.upper() == "ALL":
        return None
    phases = [phase.upper() for phase in parse_csv_list(text)]
    unknown = [phase for phase in phases if phase not in PHASES]
    if unknown:
        raise UnknownPhaseError(f"Unknown phase {unknown[0]}; expected one of {list(PHASES)} or ALL")
    return phases


def get_config(orders: Optional[str] = None, skin_effect: Optional[bool] = None) -> AssessmentConfig:
    return AssessmentConfig.from_settings(orders=parse_orders(orders), skin_effect=skin_effect)


def require_count(items: Sequence[str], count: int, what: str) -> Sequence[str]:
    if len(items) != count:
        raise ValueError(f"Expected {count} {what}, got {len(items)}")
    return items
