"""
Tests for CSV outputs and the result file reader.
"""
import csv

import pytest

from harmonic_flow.csv_io import (
    RESULTS_HEADER,
    format_number,
    read_results_csv,
    write_box_stats_csv,
    write_comparison_csv,
    write_index_csv,
    write_results_csv,
    write_surface_csv,
)
from harmonic_flow.engine_service import run_assessment, spectrum_at
from harmonic_flow.exceptions import NetworkIOError, NetworkParseError
from harmonic_flow.indices_service import box_stats, point_report
from harmonic_flow.schemas import SweepGrid
from harmonic_flow.sweep_service import compare_points


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


@pytest.mark.unit
@pytest.mark.parametrize("value, expected", [
    (0.0, "0"),
    (-0.0, "0"),
    (1e-30, "1e-30"),
    (1.0 / 3.0, "0.333333333"),
    (120.0, "120"),
    (None, ""),
])
def test_format_number(value, expected):
    """Nine significant digits, one spelling of zero."""
    assert format_number(value) == expected


@pytest.mark.unit
def test_results_file_layout(feeder_y13, config, tmp_path):
    """Header, sorted rows and every bus and branch present."""
    store = run_assessment(feeder_y13, config)
    path = tmp_path / "results.csv"
    count = write_results_csv(store, path)
    rows = read_rows(path)
    assert rows[0] == RESULTS_HEADER
    body = rows[1:]
    assert len(body) == count
    keys = [(row[0], row[1], row[2], int(row[3])) for row in body]
    assert keys == sorted(keys)
    points = {row[0] for row in body}
    assert {"sub", "n611", "b650_632", "x633_634"} <= points
    assert {row[1] for row in body if row[0] == "b684_611"} == {"current"}
    assert {int(row[3]) for row in body} == {1, 3, 5, 7, 9, 11}


@pytest.mark.unit
def test_results_are_byte_identical(feeder_y13, config, tmp_path):
    """Two runs write the same bytes."""
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results_csv(run_assessment(feeder_y13, config), first)
    write_results_csv(run_assessment(feeder_y13, config), second)
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.unit
def test_results_read_back(feeder_y13, config, tmp_path):
    """Spectra read from the file match the store to the written precision."""
    store = run_assessment(feeder_y13, config)
    path = tmp_path / "results.csv"
    write_results_csv(store, path)
    spectra = read_results_csv(path)

    expected = spectrum_at(store, "n675", "voltage")
    actual = spectra[("n675", "voltage")]
    assert actual.orders == expected.orders
    for order in expected.orders:
        for phase in expected.phases:
            assert actual.component(order, phase).to_complex() == pytest.approx(
                expected.component(order, phase).to_complex(), rel=1e-7, abs=1e-9
            )
    assert ("b692_675", "current") in spectra


@pytest.mark.unit
def test_read_errors(tmp_path):
    """Wrong headers are parse errors, missing files are I/O errors."""
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(NetworkParseError):
        read_results_csv(bad)
    with pytest.raises(NetworkIOError):
        read_results_csv(tmp_path / "missing.csv")


@pytest.mark.unit
def test_surface_file(tmp_path):
    """First column is alpha, header row is beta."""
    grid = SweepGrid(
        source_ids=("HS1", "HS2"),
        angles=[0.0, 45.0],
        metric="thdi",
        point="substation",
        phase="B",
        values=[[1.0, 2.0], [3.0, 4.5]],
    )
    path = tmp_path / "surface.csv"
    write_surface_csv(grid, path)
    assert read_rows(path) == [
        ["alpha_deg\\beta_deg", "0", "45"],
        ["0", "1", "2"],
        ["45", "3", "4.5"],
    ]


@pytest.mark.unit
def test_box_stats_file(tmp_path):
    """One row per phase in A-B-C order."""
    path = tmp_path / "box.csv"
    write_box_stats_csv({"C": box_stats([1.0]), "A": box_stats([1.0, 3.0])}, path)
    assert read_rows(path) == [
        ["phase", "min", "max", "mean", "median"],
        ["A", "1", "3", "2", "2"],
        ["C", "1", "1", "1", "1"],
    ]


@pytest.mark.unit
def test_index_file_leaves_missing_values_blank(feeder_y13, config, tmp_path):
    """A bus point has no current-based values."""
    store = run_assessment(feeder_y13, config)
    path = tmp_path / "indices.csv"
    write_index_csv([point_report(store, "n632"), point_report(store, "substation", ["B"])], path)
    rows = read_rows(path)
    assert rows[0] == ["point_id", "phase", "thdv", "thdi", "tpf", "phi_v", "phi_i"]
    assert rows[1][:2] == ["n632", "A"]
    assert rows[1][3] == "" and rows[1][4] == ""
    assert rows[-1][:2] == ["substation", "B"]
    assert all(rows[-1][2:])


@pytest.mark.unit
def test_comparison_file(feeder_stiff, config, tmp_path):
    """Metric rows with one column per point."""
    report = compare_points(feeder_stiff, config, "substation", "svc@to")
    path = tmp_path / "compare.csv"
    write_comparison_csv(report, path)
    rows = read_rows(path)
    assert rows[0] == ["metric", "phase", "substation", "svc@to"]
    assert [row[0] for row in rows[1:4]] == ["thdv"] * 3
    assert len(rows) == 1 + 5 * 3
