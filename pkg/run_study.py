#!/usr/bin/env python3
"""
Width studies from the command line.

Data (CSV or JSON) goes to stdout or --out; progress and summaries go to
stderr, so repeated runs with the same seed give byte-identical output.
"""

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from config import CliConfig, Family, OutputFormat
from errors import InfeasibleGridError, WidthError
from experiments import SweepRunner, emit_report, snapshot_grid
from generate_dag import describe_dag, generate_dag
from geometry import assemble_gram
from greedy import fit_decay, strong_greedy
from manifold import FrozenProfile, WaveSnapshot, random_interior_bump, weak_residual
from nodes.logger_node import logger
from widths import chain_check

app = typer.Typer(help="Kolmogorov width bounds for wave-equation solution manifolds.", add_completion=False)
console = Console(stderr=True)

FamilyOption = typer.Option(Family.WAVE, "--family", help="Snapshot family")
FormatOption = typer.Option(OutputFormat.CSV, "--format", help="Output format")
OutOption = typer.Option(None, "--out", help="Output file (default: stdout)")
LogPathOption = typer.Option(None, "--log-path", help="Directory for the JSONL event log")


@contextmanager
def _exit_on_failure() -> Iterator[None]:
    """Usage problems exit with 2, numerical failures with 1."""
    try:
        yield
    except (InfeasibleGridError, ValidationError) as e:
        raise typer.BadParameter(str(e)) from e
    except WidthError as e:
        console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(code=1) from e


def _start(config: CliConfig) -> None:
    logger.configure(config.log_path)
    logger.log_event("CLI_START", config.model_dump(mode="json"), stage="cli")


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text, nl=False)
    else:
        out.write_text(text)
        console.print(f"[green]Output saved to: {out}[/green]")


def _csv(header: Sequence[str], rows: List[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _number(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".16e")


@app.command("gram")
def cmd_gram(
    family: Family = FamilyOption,
    grid: int = typer.Option(33, "--grid", min=1, help="Number of uniform parameter values"),
    format: OutputFormat = FormatOption,
    out: Optional[Path] = OutOption,
    log_path: Optional[Path] = LogPathOption,
):
    """Emit the exact Gram matrix of a uniform snapshot grid."""
    with _exit_on_failure():
        config = CliConfig(subcommand="gram", family=family, grid=grid, format=format, out=out, log_path=log_path)
        _start(config)
        gram = assemble_gram(snapshot_grid(config.family, config.grid))

    if config.format == OutputFormat.JSON:
        text = json.dumps({
            "family": config.family.value,
            "labels": gram.labels,
            "entries": gram.entries.tolist(),
        }, indent=2) + "\n"
    else:
        text = _csv(["label", *gram.labels], [
            [label, *(_number(v) for v in row)] for label, row in zip(gram.labels, gram.entries)
        ])
    _write(text, config.out)


@app.command("bound-check")
def cmd_bound_check(
    nmax: int = typer.Option(16, "--nmax", min=1, help="Largest N to check"),
    numerical: bool = typer.Option(False, "--numerical", help="Also run the minimax estimates on Phi_2N and Psi_2N"),
    seed: int = typer.Option(42, "--seed", min=0, help="Seed of the minimax restarts"),
    tol: float = typer.Option(1e-8, "--tol", min=0.0, help="Minimax convergence tolerance"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (default: CPU count)"),
    format: OutputFormat = FormatOption,
    out: Optional[Path] = OutOption,
    log_path: Optional[Path] = LogPathOption,
):
    """Reproduce the packing lower bound 1/(4 sqrt(N)) for N = 1..nmax."""
    with _exit_on_failure():
        config = CliConfig(subcommand="bound-check", nmax=nmax, seed=seed, tol=tol, threads=threads,
                           format=format, out=out, log_path=log_path)
        _start(config)
        minimax = config.minimax_config()
        reports = [chain_check(2 * N, N, minimax, numerical=numerical) for N in range(1, config.nmax + 1)]

    if config.format == OutputFormat.JSON:
        text = json.dumps([report.model_dump(mode="json", exclude_none=True) for report in reports], indent=2) + "\n"
    else:
        header = ["N", "packing_bound", "chain_verified"]
        if numerical:
            header += ["phi_upper", "psi_lower_dual", "numerical_ordering_holds"]
        rows = []
        for report in reports:
            row = [report.N, _number(report.chain_value), str(report.chain_verified).lower()]
            if numerical:
                row += [
                    _number(report.phi_estimate.upper),
                    _number(report.psi_estimate.lower_dual),
                    str(report.numerical_ordering_holds).lower(),
                ]
            rows.append(row)
        text = _csv(header, rows)
    _write(text, config.out)

    failed = [report.N for report in reports if not report.chain_verified]
    if failed:
        console.print(f"[red]Packing chain not reproduced for N = {failed}[/red]")
        raise typer.Exit(code=1)
    console.print(f"[green]Packing chain verified for N = 1..{config.nmax}[/green]")


@app.command("sweep")
def cmd_sweep(
    family: Family = FamilyOption,
    grid: int = typer.Option(33, "--grid", min=1, help="Number of uniform parameter values"),
    nmax: int = typer.Option(8, "--nmax", min=1, help="Rows N = 1..nmax"),
    seed: int = typer.Option(42, "--seed", min=0, help="Seed of the minimax restarts"),
    tol: float = typer.Option(1e-8, "--tol", min=0.0, help="Minimax convergence tolerance"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (default: CPU count)"),
    format: OutputFormat = FormatOption,
    out: Optional[Path] = OutOption,
    log_path: Optional[Path] = LogPathOption,
):
    """Width bounds, greedy errors and POD tails for N = 1..nmax."""
    with _exit_on_failure():
        config = CliConfig(subcommand="sweep", family=family, grid=grid, nmax=nmax, seed=seed, tol=tol,
                           threads=threads, format=format, out=out, log_path=log_path)
        _start(config)
        state = SweepRunner(config.sweep_config()).run()

    report = state.report
    emit_report(report, config.format, config.out)
    _display_sweep(report, state.warnings)


def _display_sweep(report, warnings: List[str]) -> None:
    table = Table(title=f"{report.family.value} family, grid {report.grid_size}")
    for column in ("N", "packing", "dual", "upper", "greedy", "pod tail"):
        table.add_column(column, justify="right")
    for row in report.rows:
        table.add_row(
            str(row.N),
            "-" if row.lower_packing is None else f"{row.lower_packing:.4e}",
            f"{row.lower_dual:.4e}",
            f"{row.upper:.4e}",
            "-" if row.greedy_error is None else f"{row.greedy_error:.4e}",
            f"{row.pod_tail:.4e}",
        )
    console.print(table)
    if report.fit is not None:
        console.print(Panel(
            f"algebraic exponent {report.fit.algebraic_exponent:.4f} (r2 {report.fit.algebraic_r2:.4f})\n"
            f"exponential rate {report.fit.exponential_rate:.4f} (r2 {report.fit.exponential_r2:.4f})",
            title=f"[bold]Decay: {report.fit.better_model.value}[/bold]",
            border_style="yellow",
        ))
    for warning in warnings:
        console.print(f"[yellow]Warning: {warning}[/yellow]")


@app.command("greedy")
def cmd_greedy(
    family: Family = FamilyOption,
    grid: int = typer.Option(33, "--grid", min=1, help="Number of uniform parameter values"),
    nmax: int = typer.Option(8, "--nmax", min=1, help="Number of greedy selections"),
    stop_tol: float = typer.Option(0.0, "--stop-tol", min=0.0, help="Stop once the sup residual drops below this"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (the greedy itself is sequential)"),
    format: OutputFormat = FormatOption,
    out: Optional[Path] = OutOption,
    log_path: Optional[Path] = LogPathOption,
):
    """Strong greedy error sequence with its decay fit."""
    with _exit_on_failure():
        config = CliConfig(subcommand="greedy", family=family, grid=grid, nmax=nmax, threads=threads,
                           format=format, out=out, log_path=log_path)
        _start(config)
        gram = assemble_gram(snapshot_grid(config.family, config.grid))
        if config.nmax > gram.size:
            raise InfeasibleGridError(f"--nmax {config.nmax} exceeds the {gram.size} snapshots of the grid")
        trace = strong_greedy(gram, config.nmax, stop_tol)

    fit = None
    try:
        fit = fit_decay(trace.errors)
    except WidthError as e:
        console.print(f"[yellow]Warning: no decay fit: {e}[/yellow]")

    if config.format == OutputFormat.JSON:
        text = json.dumps({
            "family": config.family.value,
            "grid_size": config.grid,
            "trace": trace.model_dump(mode="json"),
            "fit": fit.model_dump(mode="json") if fit else None,
        }, indent=2) + "\n"
    else:
        selected = [None, *trace.selected_indices]
        text = _csv(["N", "selected_index", "sup_residual"], [
            [n, "" if index is None else index, _number(error)]
            for n, (index, error) in enumerate(zip(selected, trace.errors))
        ])
    _write(text, config.out)
    if fit is not None:
        console.print(f"[green]better model: {fit.better_model.value}, "
                      f"algebraic exponent {fit.algebraic_exponent:.4f}[/green]")


@app.command("residual")
def cmd_residual(
    mu: Optional[float] = typer.Option(None, "--mu", min=0.0, max=1.0, help="Wave speed (default: random per bump)"),
    bumps: int = typer.Option(20, "--bumps", min=1, help="Number of random test functions"),
    seed: int = typer.Option(42, "--seed", min=0, help="Seed of the test-function draws"),
    quad_points: int = typer.Option(64, "--quad-points", min=8, help="Gauss points per axis per panel"),
    tolerance: float = typer.Option(1e-6, "--tolerance", min=0.0, help="Largest admissible |residual|"),
    control: bool = typer.Option(False, "--control", help="Test the time-frozen datum, which is not a solution"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (default: CPU count)"),
    format: OutputFormat = FormatOption,
    out: Optional[Path] = OutOption,
    log_path: Optional[Path] = LogPathOption,
):
    """Weak residuals of phi_mu against random interior bump functions."""
    with _exit_on_failure():
        config = CliConfig(subcommand="residual", seed=seed, threads=threads, format=format, out=out,
                           log_path=log_path)
        _start(config)

        def residual_row(i: int) -> dict:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, i])))
            speed = mu if mu is not None else (0.5 if control else float(rng.uniform(0.0, 1.0)))
            bump = random_interior_bump(rng)
            f = FrozenProfile() if control else WaveSnapshot(mu=speed)
            return {
                "index": i,
                "mu": speed,
                "center_t": bump.center.t,
                "center_x": bump.center.x,
                "radius_t": bump.radius_t,
                "radius_x": bump.radius_x,
                "residual": weak_residual(f, bump, speed, quad_points),
            }

        workers = config.threads or os.cpu_count() or 1
        with ThreadPoolExecutor(max_workers=min(workers, bumps)) as pool:
            rows = list(pool.map(residual_row, range(bumps)))

    if config.format == OutputFormat.JSON:
        text = json.dumps(rows, indent=2) + "\n"
    else:
        header = ["index", "mu", "center_t", "center_x", "radius_t", "radius_x", "residual"]
        text = _csv(header, [
            [row["index"], *(_number(row[key]) for key in header[1:])] for row in rows
        ])
    _write(text, config.out)

    largest = max(abs(row["residual"]) for row in rows)
    console.print(f"max |residual| = {largest:.3e}")
    if not control and largest > tolerance:
        console.print(f"[red]Weak residual {largest:.3e} exceeds {tolerance:.1e}[/red]")
        raise typer.Exit(code=1)


@app.command("dag")
def cmd_dag(output: str = typer.Option("dag.png", "--output", help="Output file path")):
    """Draw the sweep pipeline (PNG with the graphviz binary, DOT source otherwise)."""
    path = generate_dag(output)
    console.print(f"[green]DAG diagram saved to: {path}[/green]")
    console.print(describe_dag())


if __name__ == "__main__":
    app()
