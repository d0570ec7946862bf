"""Typer CLI for pcbr."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import NoReturn, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from pcbr.audit import audit_point, default_threshold, sweep as run_sweep
from pcbr.errors import ParameterError, PipelineError
from pcbr.field import require_supported
from pcbr.graph import run_round_trip
from pcbr.models import OUTPUT_FORMATS, AuditReport, CliConfig
from pcbr.params import bounds_report, derive_params
from pcbr.resources import load_defaults, parse_range
from pcbr.scheme import build_canonical_plan, mask_plan
from pcbr.storage import emit
from pcbr.tables import render_audit, render_bounds, render_plan, render_round_trip

app = typer.Typer(
    name="pcbr",
    help="pcbr: private retrieval of a contiguous block of messages from replicated servers.",
    add_completion=False,
)
err_console = Console(stderr=True, soft_wrap=True)

EXIT_FAILURE = 1
EXIT_USAGE = 2

FORMAT_HELP = "Output format: text, json or csv."


def _fail(message: str, code: int) -> NoReturn:
    err_console.print(f"[red]Error:[/red] {escape(message)}")
    raise typer.Exit(code)


def _message(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        msg = exc.errors()[0]["msg"]
        return msg.removeprefix("Value error, ")
    return str(exc)


def _exit_on_failure(report: AuditReport) -> None:
    failure = report.first_failure()
    if failure is not None:
        _fail(f"{failure.name} {failure.params}: {failure.evidence}", EXIT_FAILURE)


def _config(**fields) -> CliConfig:
    """Validate the command's settings or exit with a usage error."""
    try:
        return CliConfig(**fields)
    except (ValidationError, ValueError) as exc:
        _fail(_message(exc), EXIT_USAGE)


@app.callback()
def main(
    verbose: bool = typer.Option(False, "-v", "--verbose", help="Debug logging on stderr."),
) -> None:
    """Exact bounds, query plans, round trips and audits."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


# ── bounds ───────────────────────────────────────────────────────────────────

@app.command()
def bounds(
    N: int = typer.Option(..., "-N", help="Number of servers."),
    K: int = typer.Option(..., "-K", help="Number of messages."),
    D: int = typer.Option(..., "-D", help="Demand size."),
    fmt: str = typer.Option("text", "--format", envvar="PCBR_FORMAT", help=FORMAT_HELP),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Write to a file."),
) -> None:
    """Print the optimal rate, both subpacketization bounds and the per-server count."""
    cfg = _config(command="bounds", N=N, K=K, D=D, fmt=fmt, output=output)
    emit(render_bounds(bounds_report(cfg.N, cfg.K, cfg.D), cfg.fmt), cfg.output)


# ── plan ─────────────────────────────────────────────────────────────────────

@app.command()
def plan(
    N: int = typer.Option(..., "-N", help="Number of servers."),
    K: int = typer.Option(..., "-K", help="Number of messages."),
    D: int = typer.Option(..., "-D", help="Demand size."),
    j: int = typer.Option(1, "-j", help="Demand window W_j = [j : j+D-1]."),
    masked: bool = typer.Option(False, "--masked", help="Apply private index permutations."),
    seed: int = typer.Option(0, "--seed", help="Seed for --masked."),
    fmt: str = typer.Option("text", "--format", envvar="PCBR_FORMAT", help=FORMAT_HELP),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Write to a file."),
) -> None:
    """Emit the per-server query table for one demand window."""
    cfg = _config(command="plan", N=N, K=K, D=D, j=j, seed=seed, fmt=fmt, output=output)
    query_plan = build_canonical_plan(derive_params(cfg.N, cfg.K, cfg.D), cfg.j)
    if masked:
        query_plan, _ = mask_plan(query_plan, cfg.seed)
    emit(render_plan(query_plan, cfg.fmt), cfg.output)


# ── run ──────────────────────────────────────────────────────────────────────

@app.command()
def run(
    N: int = typer.Option(..., "-N", help="Number of servers."),
    K: int = typer.Option(..., "-K", help="Number of messages."),
    D: int = typer.Option(..., "-D", help="Demand size."),
    j: int = typer.Option(1, "-j", help="Demand window W_j = [j : j+D-1]."),
    q: int = typer.Option(2, "-q", help="Field size: 2, 3, 5, 7 or 11."),
    seed: int = typer.Option(0, "--seed", help="Seed for masks and message contents."),
    fmt: str = typer.Option("text", "--format", envvar="PCBR_FORMAT", help=FORMAT_HELP),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Write to a file."),
) -> None:
    """Plan, mask, answer, decode and verify one retrieval."""
    cfg = _config(
        command="run", N=N, K=K, D=D, j=j, q=q, seed=seed, fmt=fmt, output=output
    )
    try:
        report = run_round_trip(cfg.N, cfg.K, cfg.D, cfg.j, cfg.q, cfg.seed)
    except PipelineError as exc:
        _fail(str(exc), EXIT_FAILURE)
    emit(render_round_trip(report, cfg.fmt), cfg.output)
    if not report.ok:
        raise typer.Exit(EXIT_FAILURE)


# ── audit ────────────────────────────────────────────────────────────────────

@app.command()
def audit(
    N: int = typer.Option(..., "-N", help="Number of servers."),
    K: int = typer.Option(..., "-K", help="Number of messages."),
    D: int = typer.Option(..., "-D", help="Demand size."),
    q: int = typer.Option(2, "-q", help="Field size for the round trips: 2, 3, 5, 7 or 11."),
    seed: int = typer.Option(0, "--seed", help="First round-trip seed."),
    seeds: int = typer.Option(1, "--seeds", help="Round trips per window and field."),
    samples: Optional[int] = typer.Option(
        None, "--samples", help="Statistical privacy samples (0 skips the test)."
    ),
    threshold: Optional[float] = typer.Option(None, "--threshold", help="TV threshold."),
    fmt: str = typer.Option("text", "--format", envvar="PCBR_FORMAT", help=FORMAT_HELP),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Write to a file."),
) -> None:
    """Run every audit for one (N, K, D); exit 1 if any check fails."""
    cfg = _config(command="audit", N=N, K=K, D=D, q=q, seed=seed, fmt=fmt, output=output)
    defaults = load_defaults()["audit"]
    if samples is None:
        samples = defaults["samples"]
    if threshold is None and defaults["threshold"] is not None:
        threshold = float(defaults["threshold"])
    if samples and threshold is None:
        threshold = default_threshold(derive_params(cfg.N, cfg.K, cfg.D).L, samples)

    try:
        report = audit_point(
            cfg.N,
            cfg.K,
            cfg.D,
            q_list=(cfg.q,),
            seeds=range(cfg.seed, cfg.seed + seeds),
            samples=samples,
            threshold=threshold,
        )
    except ParameterError as exc:
        _fail(str(exc), EXIT_USAGE)
    emit(render_audit(report, cfg.fmt), cfg.output)
    _exit_on_failure(report)


# ── sweep ────────────────────────────────────────────────────────────────────

@app.command()
def sweep(
    n_range: Optional[str] = typer.Option(None, "--N", help="Server counts, e.g. 2..3."),
    k_range: Optional[str] = typer.Option(None, "--K", help="Message counts, e.g. 3..8."),
    q_list: Optional[str] = typer.Option(None, "--q", help="Field sizes, e.g. 2,3."),
    seeds: Optional[int] = typer.Option(None, "--seeds", help="Round trips per point."),
    fmt: str = typer.Option("text", "--format", envvar="PCBR_FORMAT", help=FORMAT_HELP),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Write to a file."),
) -> None:
    """Audit every (N, K, D) in the grid with D in [2:K-1]."""
    if fmt not in OUTPUT_FORMATS:
        _fail(f"format must be one of {', '.join(OUTPUT_FORMATS)} (got {fmt})", EXIT_USAGE)
    defaults = load_defaults()["sweep"]
    try:
        Ns = parse_range(n_range) if n_range is not None else defaults["N"]
        Ks = parse_range(k_range) if k_range is not None else defaults["K"]
        qs = parse_range(q_list) if q_list is not None else defaults["q"]
        for q in qs:
            require_supported(q)
        report = run_sweep(Ns, Ks, qs, seeds if seeds is not None else defaults["seeds"])
    except ValueError as exc:
        _fail(str(exc), EXIT_USAGE)
    emit(render_audit(report, fmt, summary=True), output)  # type: ignore[arg-type]
    _exit_on_failure(report)


if __name__ == "__main__":
    app()
