"""Filesystem helpers for command output."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

import typer


def write_text(path: Path, content: str) -> None:
    """Write text content to a file, creating parent dirs if needed."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def dumps(data: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def emit(content: str, output: Optional[Path] = None) -> None:
    """Send *content* to *output* if given, otherwise to stdout unchanged."""
    if not content.endswith("\n"):
        content += "\n"
    if output is None:
        typer.echo(content, nl=False)
    else:
        write_text(output, content)
