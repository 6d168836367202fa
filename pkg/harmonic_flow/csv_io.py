"""
CSV writers for results, indices and study outputs, plus a reader for result files.

Numbers use `significant_digits` general formatting; rows are sorted so equal
inputs give byte-identical files.
"""
import csv
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from harmonic_flow.config import settings
from harmonic_flow.engine_service import ResultStore
from harmonic_flow.exceptions import NetworkIOError, NetworkParseError
from harmonic_flow.phasor import PHASES, HarmonicSpectrum, Phasor
from harmonic_flow.schemas import BoxStats, ComparisonReport, IndexReport, SweepGrid

PathLike = Union[str, Path]

RESULTS_HEADER = ["point_id", "kind", "phase", "order", "magnitude", "angle_deg"]
INDEX_FIELDS = ["thdv", "thdi", "tpf", "phi_v", "phi_i"]


def format_number(value: Optional[float], digits: Optional[int] = None) -> str:
    if value is None:
        return ""
    digits = digits or settings.csv_significant_digits
    text = f"{value:.{digits}g}"
    # -0 and 0.0 both print as 0
    return "0" if float(text) == 0 else text


def _phase_key(phase: str) -> Tuple[int, str]:
    return (PHASES.index(phase), phase) if phase in PHASES else (len(PHASES), phase)


def _write_rows(path: PathLike, header: List[str], rows: Iterable[List[str]]) -> int:
    count = 0
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
                count += 1
    except OSError as e:
        raise NetworkIOError(f"Cannot write {path}: {e.strerror or e}") from e
    return count


def result_rows(store: ResultStore, digits: Optional[int] = None) -> List[List[str]]:
    """Bus voltages and branch sending-end currents for every solved order"""
    records = []
    for solution in store.solutions():
        for (bus_id, phase), voltage in solution.node_voltages.items():
            records.append((bus_id, "voltage", phase, solution.order, voltage))
        for (branch_id, phase), current in solution.branch_currents.items():
            records.append((branch_id, "current", phase, solution.order, current))
    records.sort(key=lambda r: (r[0], r[1], _phase_key(r[2]), r[3]))
    return [
        [point_id, kind, phase, str(order), format_number(p.magnitude, digits), format_number(p.angle_deg, digits)]
        for point_id, kind, phase, order, p in records
    ]


def write_results_csv(store: ResultStore, path: PathLike, digits: Optional[int] = None) -> int:
    return _write_rows(path, RESULTS_HEADER, result_rows(store, digits))


def read_results_csv(path: PathLike, base_frequency: float = 60.0) -> Dict[Tuple[str, str], HarmonicSpectrum]:
    """Spectra keyed by (point_id, kind) from a file written by write_results_csv"""
    collected: Dict[Tuple[str, str], Dict[int, Dict[str, Phasor]]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != RESULTS_HEADER:
                raise NetworkParseError(f"{path}: unexpected header {reader.fieldnames}")
            for row in reader:
                key = (row["point_id"], row["kind"])
                phasor = Phasor.from_degrees(float(row["magnitude"]), float(row["angle_deg"]))
                collected.setdefault(key, {}).setdefault(int(row["order"]), {})[row["phase"]] = phasor
    except OSError as e:
        raise NetworkIOError(f"Cannot read {path}: {e.strerror or e}") from e
    except (KeyError, ValueError) as e:
        raise NetworkParseError(f"{path}: malformed row: {e}") from e
    return {key: HarmonicSpectrum(entries, base_frequency) for key, entries in collected.items()}


def write_index_csv(reports: Iterable[IndexReport], path: PathLike, digits: Optional[int] = None) -> int:
    rows = []
    for report in reports:
        for phase in sorted(report.per_phase, key=_phase_key):
            values = report.per_phase[phase]
            rows.append([report.point_id, phase, *(format_number(getattr(values, name), digits) for name in INDEX_FIELDS)])
    return _write_rows(path, ["point_id", "phase", *INDEX_FIELDS], rows)


def write_surface_csv(grid: SweepGrid, path: PathLike, digits: Optional[int] = None) -> int:
    """Rows are the first source's angle, columns the second's"""
    header = ["alpha_deg\\beta_deg", *(format_number(beta, digits) for beta in grid.angles)]
    rows = [
        [format_number(alpha, digits), *(format_number(value, digits) for value in row)]
        for alpha, row in zip(grid.angles, grid.values)
    ]
    return _write_rows(path, header, rows)


def write_box_stats_csv(stats: Mapping[str, BoxStats], path: PathLike, digits: Optional[int] = None) -> int:
    rows = [
        [phase, *(format_number(getattr(stats[phase], name), digits) for name in ("min", "max", "mean", "median"))]
        for phase in sorted(stats, key=_phase_key)
    ]
    return _write_rows(path, ["phase", "min", "max", "mean", "median"], rows)


def write_comparison_csv(report: ComparisonReport, path: PathLike, digits: Optional[int] = None) -> int:
    point_a, point_b = report.points
    rows = []
    for name in INDEX_FIELDS:
        for phase in sorted(report.point_a.per_phase, key=_phase_key):
            value_a = getattr(report.point_a.per_phase[phase], name)
            other = report.point_b.per_phase.get(phase)
            value_b = getattr(other, name) if other is not None else None
            if value_a is None and value_b is None:
                continue
            rows.append([name, phase, format_number(value_a, digits), format_number(value_b, digits)])
    return _write_rows(path, ["metric", "phase", point_a, point_b], rows)
