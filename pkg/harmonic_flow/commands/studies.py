"""sweep, couple and compare: multi-source studies"""
from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from harmonic_flow.commands.network import console, print_reports
from harmonic_flow.csv_io import format_number, write_box_stats_csv, write_comparison_csv, write_surface_csv
from harmonic_flow.dependencies import get_config, get_network, parse_csv_list, parse_phases, require_count
from harmonic_flow.exceptions import UnknownSourceError
from harmonic_flow.schemas import SweepSpec
from harmonic_flow.sweep_service import angle_sweep, compare_points, coupled_phase_study


def _source_pair(model, sources: Optional[str]):
    ids = parse_csv_list(sources) or [source.id for source in model.sources[:2]]
    if len(ids) != 2:
        raise UnknownSourceError(f"Sweep needs two sources, found {len(ids)}")
    return tuple(ids)


def sweep(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
    out: Path = typer.Option(..., "--out", help="Surface CSV path"),
    sources: Optional[str] = typer.Option(None, "--sources", help="Two source ids; defaults to the first two"),
    metric: str = typer.Option("thdi", "--metric", help="thdv, thdi, phi_v or phi_i"),
    point: str = typer.Option("substation", "--point"),
    phase: str = typer.Option("B", "--phase"),
    angle_start: float = typer.Option(0.0, "--angle-start"),
    angle_stop: float = typer.Option(90.0, "--angle-stop"),
    angle_step: float = typer.Option(15.0, "--angle-step"),
    near_zero: float = typer.Option(1e-6, "--near-zero", min=0.0, help="Report cells at or below this value"),
    orders: Optional[str] = typer.Option(None, "--orders"),
):
    """Metric surface over the phase-angle rotations of two sources"""
    model = get_network(network)
    spec = SweepSpec(
        source_ids=_source_pair(model, sources),
        angles=SweepSpec.angle_range(angle_start, angle_stop, angle_step),
        metric=metric,
        point=point,
        phase=phase.upper(),
    )
    grid = angle_sweep(model, get_config(orders), spec)
    write_surface_csv(grid, out)
    lowest, highest = grid.minimum(), grid.maximum()
    typer.echo(f"cells: {len(grid.angles) ** 2}")
    typer.echo(f"{spec.metric} min: {format_number(lowest.value, 6)} at {lowest.label}")
    typer.echo(f"{spec.metric} max: {format_number(highest.value, 6)} at {highest.label}")
    cancelled = grid.near_zero(near_zero)
    typer.echo(f"near zero: {' '.join(cell.label for cell in cancelled) if cancelled else 'none'}")


def couple(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
    out: Path = typer.Option(..., "--out", help="Box statistics CSV path"),
    phase: str = typer.Option("B", "--phase", help="Phase the sources inject on"),
    sources: Optional[str] = typer.Option(None, "--sources", help="One or two source ids"),
    metric: str = typer.Option("phi_i", "--metric"),
    point: str = typer.Option("substation", "--point"),
    angle_start: float = typer.Option(0.0, "--angle-start"),
    angle_stop: float = typer.Option(90.0, "--angle-stop"),
    angle_step: float = typer.Option(15.0, "--angle-step"),
    orders: Optional[str] = typer.Option(None, "--orders"),
):
    """Spread of a metric on every phase when sources inject on one phase"""
    model = get_network(network)
    stats = coupled_phase_study(
        model,
        get_config(orders),
        injected_phase=phase.upper(),
        angles=SweepSpec.angle_range(angle_start, angle_stop, angle_step),
        point=point,
        metric=metric,
        source_ids=parse_csv_list(sources) or None,
    )
    write_box_stats_csv(stats, out)

    table = Table(title=f"{metric} with injection on phase {phase.upper()}")
    for column in ("phase", "min", "max", "mean", "median"):
        table.add_column(column, justify="right")
    for name, box in stats.items():
        table.add_row(name, *(format_number(value, 6) for value in (box.min, box.max, box.mean, box.median)))
    console.print(table)


def compare(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
    points: str = typer.Option(..., "--points", help="Two comma-separated measurement points"),
    phase: str = typer.Option("ALL", "--phase"),
    orders: Optional[str] = typer.Option(None, "--orders"),
    out: Optional[Path] = typer.Option(None, "--out", help="Optional comparison CSV path"),
):
    """Indices at two points side by side"""
    point_a, point_b = require_count(parse_csv_list(points), 2, "points")
    model = get_network(network)
    report = compare_points(model, get_config(orders), point_a, point_b, parse_phases(phase))
    print_reports(report.point_a, report.point_b)
    if out is not None:
        write_comparison_csv(report, out)


COMMANDS = (("sweep", sweep), ("couple", couple), ("compare", compare))
