"""Preset loading for the sweep and audit commands.

Presets ship with the package (src/pcbr/presets/). Setting PCBR_PRESETS_DIR
points at a directory whose files take precedence over the bundled ones.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import yaml

_PACKAGE_PRESETS = Path(__file__).resolve().parent / "presets"


def get_override_dir() -> Path | None:
    """Return the override presets directory if configured and exists."""
    override = os.environ.get("PCBR_PRESETS_DIR")
    if override:
        p = Path(override).expanduser().resolve()
        if p.is_dir():
            return p
    return None


def _resolve(name: str) -> Path:
    """PCBR_PRESETS_DIR/<name> first, then the bundled presets."""
    override = get_override_dir()
    if override:
        candidate = override / name
        if candidate.exists():
            return candidate

    p = _PACKAGE_PRESETS / name
    if not p.exists():
        raise FileNotFoundError(f"Preset not found: {p}")
    return p


def read_yaml(name: str) -> Any:
    return yaml.safe_load(_resolve(name).read_text(encoding="utf-8"))


def parse_range(text: str) -> list[int]:
    """'2..4' -> [2, 3, 4]; '3' -> [3]; '2,5' -> [2, 5]."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = (int(part) for part in text.split("..", 1))
        return list(range(lo, hi + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def load_defaults() -> dict[str, Any]:
    """Sweep and audit defaults from defaults.yaml, with ranges expanded."""
    raw = read_yaml("defaults.yaml") or {}
    sweep = raw.get("sweep", {})
    audit = raw.get("audit", {})
    return {
        "sweep": {
            "N": parse_range(sweep.get("N", "2..3")),
            "K": parse_range(sweep.get("K", "3..8")),
            "q": [int(q) for q in sweep.get("q", [2, 3])],
            "seeds": int(sweep.get("seeds", 5)),
        },
        "audit": {
            "samples": int(audit.get("samples", 10000)),
            "threshold": audit.get("threshold"),
        },
    }
