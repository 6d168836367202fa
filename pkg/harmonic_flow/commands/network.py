"""validate, solve and indices: single-network commands"""
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from harmonic_flow.csv_io import format_number, write_index_csv, write_results_csv
from harmonic_flow.dependencies import get_config, get_network, parse_phases
from harmonic_flow.engine_service import run_assessment
from harmonic_flow.indices_service import point_report
from harmonic_flow.network_service import validate_topology
from harmonic_flow.schemas import IndexReport

console = Console()


def validate(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
):
    """Check a network file; prints one finding per line"""
    model = get_network(network, validate=False)
    findings = validate_topology(model)
    for finding in findings:
        typer.echo(str(finding))
    if findings:
        raise typer.Exit(code=1)


def solve(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
    out: Path = typer.Option(..., "--out", help="Results CSV path"),
    orders: Optional[str] = typer.Option(None, "--orders", help="Comma-separated harmonic orders"),
    skin_effect: Optional[bool] = typer.Option(None, "--skin-effect/--no-skin-effect"),
):
    """Fundamental power flow plus every harmonic order; writes bus voltages and branch currents"""
    model = get_network(network)
    store = run_assessment(model, get_config(orders, skin_effect))
    rows = write_results_csv(store, out)
    typer.echo(f"orders solved: {','.join(str(order) for order in store.orders) or 'none'}")
    typer.echo(f"power flow iterations: {store.fundamental.iterations}")
    typer.echo(f"max residual: {format_number(store.max_residual, 3)}")
    typer.echo(f"rows written: {rows}")


def print_reports(*reports: IndexReport):
    table = Table(title="Harmonic indices")
    for column in ("point", "phase", "THDV %", "THDI %", "TPF", "PHI_V", "PHI_I"):
        table.add_column(column, justify="left" if column in ("point", "phase") else "right")
    for report in reports:
        for phase, values in report.per_phase.items():
            table.add_row(
                report.point_id,
                phase,
                *(
                    format_number(value, 6) or "-"
                    for value in (values.thdv, values.thdi, values.tpf, values.phi_v, values.phi_i)
                ),
            )
    console.print(table)


def indices(
    network: str = typer.Argument(..., help="Network file or bundled feeder name"),
    point: str = typer.Option("substation", "--point", help="Bus, branch, branch@to or 'substation'"),
    phase: str = typer.Option("ALL", "--phase", help="A, B, C, a comma list, or ALL"),
    orders: Optional[str] = typer.Option(None, "--orders", help="Comma-separated harmonic orders"),
    out: Optional[Path] = typer.Option(None, "--out", help="Optional index CSV path"),
):
    """THDV, THDI, TPF and PHI at one measurement point"""
    model = get_network(network)
    store = run_assessment(model, get_config(orders))
    report = point_report(store, point, parse_phases(phase))
    print_reports(report)
    if out is not None:
        write_index_csv([report], out)


COMMANDS = (("validate", validate), ("solve", solve), ("indices", indices))
