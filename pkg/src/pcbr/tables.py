"""Text, JSON and CSV renderings of plans and reports.

Text output goes through a rich Console writing into a buffer with a fixed
width and no colour, so the same input always renders to the same bytes.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from itertools import groupby
from typing import Iterable, Sequence

from rich import box
from rich.console import Console, RenderableType
from rich.table import Table

from pcbr.models import (
    AuditReport,
    BoundsReport,
    OutputFormat,
    QueryPlan,
    RoundTripReport,
    SymbolSpec,
)
from pcbr.storage import dumps

_WIDTH = 400
_SUM_NAMES = {1: "singletons"}


def _render(*renderables: RenderableType) -> str:
    buffer = io.StringIO()
    console = Console(
        file=buffer,
        width=_WIDTH,
        color_system=None,
        force_terminal=False,
        highlight=False,
        emoji=False,
        markup=False,
    )
    for renderable in renderables:
        console.print(renderable)
    return "\n".join(line.rstrip() for line in buffer.getvalue().splitlines()) + "\n"


def _csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _yes(flag: bool) -> str:
    return "yes" if flag else "no"


# ── Plans ────────────────────────────────────────────────────────────────────

def message_name(message: int, K: int) -> str:
    return chr(ord("a") + message - 1) if K <= 26 else f"m{message}"


def format_symbol(symbol: SymbolSpec, K: int) -> str:
    """'a3+c2' style, or 'm1[3]+m27[2]' beyond 26 messages."""
    if K <= 26:
        parts = (f"{message_name(x, K)}{t}" for x, t in sorted(symbol.entries.items()))
    else:
        parts = (f"m{x}[{t}]" for x, t in sorted(symbol.entries.items()))
    return "+".join(parts)


def _sum_name(k: int) -> str:
    return _SUM_NAMES.get(k, f"{k}-sums")


def _plan_table(K: int, per_server: Sequence[Sequence[SymbolSpec]]) -> Table:
    table = Table(box=box.SIMPLE_HEAD)
    table.add_column("", no_wrap=True)
    for n in range(1, len(per_server) + 1):
        table.add_column(f"Server {n}", no_wrap=True)

    by_k: list[dict[int, list[SymbolSpec]]] = []
    for symbols in per_server:
        grouped: dict[int, list[SymbolSpec]] = defaultdict(list)
        for s in symbols:
            grouped[s.k].append(s)
        by_k.append(grouped)

    sizes = sorted({k for grouped in by_k for k in grouped})
    for k in sizes:
        rows = max(len(grouped[k]) for grouped in by_k)
        for r in range(rows):
            cells = [format_symbol(g[k][r], K) if r < len(g[k]) else "" for g in by_k]
            table.add_row(_sum_name(k) if r == 0 else "", *cells, end_section=r == rows - 1)
    return table


def plan_text(plan: QueryPlan) -> str:
    """Per-server query table grouped by sum size; D > K/2 plans get two sections."""
    p = plan.params
    header = f"{p.label} W{plan.demand_index} = [{plan.demand[0]}:{plan.demand[-1]}]"
    if not plan.common:
        return _render(header, _plan_table(p.K, plan.servers))

    phase1, phase2 = plan.phases()
    names = ", ".join(message_name(c, p.K) for c in plan.common)
    reduced_k, reduced_d = 2 * (p.K - p.D), p.K - p.D
    return _render(
        f"{header}, phase 1: direct retrieval of {names}",
        _plan_table(p.K, phase1),
        f"{header}, phase 2: reduced instance K={reduced_k} D={reduced_d}",
        _plan_table(p.K, phase2),
    )


def plan_csv(plan: QueryPlan) -> str:
    rows = []
    for symbols in plan.servers:
        for s in symbols:
            rows.append(
                [
                    s.server,
                    s.k,
                    ";".join(str(x) for x in s.support),
                    ";".join(f"{x}:{t}" for x, t in sorted(s.entries.items())),
                    "" if s.demand_entry is None else s.demand_entry,
                    "" if s.side_info is None else f"{s.side_info.server}:{s.side_info.symbol}",
                ]
            )
    return _csv(["server", "k", "support", "entries", "demand_entry", "side_info"], rows)


def plan_json(plan: QueryPlan) -> str:
    return dumps(plan.model_dump(mode="json"))


def render_plan(plan: QueryPlan, fmt: OutputFormat) -> str:
    return {"text": plan_text, "json": plan_json, "csv": plan_csv}[fmt](plan)


# ── Bounds and round trips ───────────────────────────────────────────────────

def render_bounds(report: BoundsReport, fmt: OutputFormat) -> str:
    if fmt == "json":
        return dumps(report.model_dump(mode="json"))
    rows = [
        ("N", report.N),
        ("K", report.K),
        ("D", report.D),
        ("f", report.f),
        ("g", report.g),
        ("rate", str(report.rate)),
        ("L_lower", report.L_lower),
        ("L_upper", report.L_upper),
        ("tight", _yes(report.tight)),
        ("symbols_per_server", report.symbols_per_server),
    ]
    if fmt == "csv":
        return _csv([name for name, _ in rows], [[value for _, value in rows]])

    table = Table(box=None, show_header=False)
    table.add_column("quantity", no_wrap=True)
    table.add_column("value", no_wrap=True)
    for name, value in rows[3:]:
        table.add_row(name, str(value))
    return _render(f"({report.N},{report.K},{report.D})", table)


def render_round_trip(report: RoundTripReport, fmt: OutputFormat) -> str:
    if fmt == "json":
        return dumps(report.model_dump(mode="json"))
    if fmt == "csv":
        p = report.params
        return _csv(
            ["N", "K", "D", "j", "q", "seed", "rate", "decode", "oracle"],
            [[p.N, p.K, p.D, report.demand_index, report.q, report.seed, str(report.rate),
              _yes(report.ok), _yes(report.oracle)]],
        )
    decode = "OK" if report.ok else "FAIL"
    oracle = "OK" if report.oracle else "FAIL"
    return f"rate {report.rate}, decode {decode}, oracle {oracle}\n"


# ── Audit reports ────────────────────────────────────────────────────────────

def audit_text(report: AuditReport) -> str:
    table = Table(box=box.SIMPLE_HEAD)
    for column in ("check", "params", "verdict", "evidence"):
        table.add_column(column, no_wrap=True)
    for c in report.checks:
        table.add_row(c.name, c.params, "pass" if c.passed else "FAIL", c.evidence)
    return _render(table, f"overall: {report.overall}")


def sweep_text(report: AuditReport) -> str:
    """One row per grid point, then the MPIR comparison lines and any failures."""
    table = Table(box=box.SIMPLE_HEAD)
    for column in ("params", "checks", "failed", "verdict"):
        table.add_column(column, no_wrap=True)

    def point(check) -> str:
        return check.params.split()[0]

    for label, checks in groupby(report.checks, key=point):
        checks = list(checks)
        failed = sum(1 for c in checks if not c.passed)
        table.add_row(label, str(len(checks)), str(failed), "FAIL" if failed else "pass")

    lines: list[RenderableType] = [table]
    lines += [c.evidence for c in report.checks if c.name == "mpir-comparison"]
    lines += [
        f"FAIL {c.name} {c.params}: {c.evidence}" for c in report.checks if not c.passed
    ]
    lines.append(f"overall: {report.overall}")
    return _render(*lines)


def audit_csv(report: AuditReport) -> str:
    return _csv(
        ["check", "params", "passed", "evidence"],
        [[c.name, c.params, _yes(c.passed), c.evidence] for c in report.checks],
    )


def render_audit(report: AuditReport, fmt: OutputFormat, *, summary: bool = False) -> str:
    if fmt == "json":
        return dumps(report.model_dump(mode="json"))
    if fmt == "csv":
        return audit_csv(report)
    return sweep_text(report) if summary else audit_text(report)
