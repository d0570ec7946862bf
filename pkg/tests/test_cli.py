from __future__ import annotations

import json

import pytest
from typer.testing import CliRunner

from pcbr.cli import app

runner = CliRunner()


def invoke(*args: str, **kwargs):
    return runner.invoke(app, list(args), **kwargs)


# ── bounds ───────────────────────────────────────────────────────────────────

def test_bounds_text():
    result = invoke("bounds", "-N", "2", "-K", "5", "-D", "2")
    assert result.exit_code == 0
    assert "8/13" in result.stdout
    assert "tight" in result.stdout and "yes" in result.stdout


def test_bounds_json():
    result = invoke("bounds", "-N", "2", "-K", "6", "-D", "2", "--format", "json")
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert (data["L_lower"], data["L_upper"], data["tight"]) == (4, 8, False)
    assert data["rate"] == {"num": 4, "den": 7}


def test_bounds_csv():
    result = invoke("bounds", "-N", "2", "-K", "5", "-D", "3", "--format", "csv")
    header, row = result.stdout.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert values["rate"] == "3/4"
    assert values["symbols_per_server"] == "8"


def test_bounds_rejects_single_server():
    result = invoke("bounds", "-N", "1", "-K", "5", "-D", "2")
    assert result.exit_code == 2
    assert "N must be ≥ 2" in result.output


def test_format_from_environment():
    result = invoke("bounds", "-N", "2", "-K", "5", "-D", "2", env={"PCBR_FORMAT": "json"})
    assert json.loads(result.stdout)["symbols_per_server"] == 13


def test_bounds_to_file(tmp_path):
    target = tmp_path / "out" / "bounds.json"
    result = invoke(
        "bounds", "-N", "2", "-K", "5", "-D", "2", "--format", "json", "-o", str(target)
    )
    assert result.exit_code == 0
    assert result.stdout == ""
    assert json.loads(target.read_text(encoding="utf-8"))["L_upper"] == 8


# ── plan ─────────────────────────────────────────────────────────────────────

def test_plan_text_table():
    result = invoke("plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--format", "text")
    assert result.exit_code == 0
    out = result.stdout
    assert "Server 1" in out and "Server 2" in out
    assert "singletons" in out and "2-sums" in out and "3-sums" in out
    # one row per symbol: 7 singletons, 5 two-sums, 1 three-sum
    rows = [
        line
        for line in out.splitlines()
        if line.count("+") in (2, 4) or _is_singleton_row(line)
    ]
    assert len(rows) == 13


def _is_singleton_row(line: str) -> bool:
    cells = line.replace("singletons", "").split()
    return len(cells) == 2 and all(c[0].isalpha() and c[1:].isdigit() for c in cells)


def test_plan_json_schema():
    result = invoke("plan", "-N", "2", "-K", "5", "-D", "2", "-j", "2", "--format", "json")
    data = json.loads(result.stdout)
    assert data["demand_index"] == 2
    assert len(data["servers"]) == 2
    symbol = data["servers"][0][0]
    assert set(symbol) >= {"support", "entries", "demand_entry", "side_info"}
    assert all(len(server) == 13 for server in data["servers"])


def test_plan_csv_rows():
    result = invoke("plan", "-N", "2", "-K", "5", "-D", "2", "--format", "csv")
    lines = result.stdout.strip().splitlines()
    assert lines[0] == "server,k,support,entries,demand_entry,side_info"
    assert len(lines) == 1 + 26
    assert any(line.startswith("1,3,1;3;5,") for line in lines)


def test_plan_large_demand_has_two_sections():
    result = invoke("plan", "-N", "2", "-K", "5", "-D", "3", "-j", "1")
    assert result.exit_code == 0
    assert "phase 1: direct retrieval of c" in result.stdout
    assert "phase 2: reduced instance K=4 D=2" in result.stdout
    assert "c1" in result.stdout and "c4" in result.stdout


def test_plan_masked_is_seeded():
    args = ("plan", "-N", "2", "-K", "5", "-D", "2", "--masked", "--seed", "3", "--format", "json")
    first, second = invoke(*args), invoke(*args)
    assert first.stdout == second.stdout
    canonical = invoke("plan", "-N", "2", "-K", "5", "-D", "2", "--format", "json")
    assert first.stdout != canonical.stdout


def test_plan_rejects_window():
    result = invoke("plan", "-N", "2", "-K", "5", "-D", "2", "-j", "5")
    assert result.exit_code == 2
    assert "W4=[4:5]" in result.output


# ── run ──────────────────────────────────────────────────────────────────────

def test_run_small_demand():
    result = invoke("run", "-N", "2", "-K", "5", "-D", "2", "-j", "3", "-q", "2", "--seed", "7")
    assert result.exit_code == 0
    assert result.stdout == "rate 8/13, decode OK, oracle OK\n"


def test_run_large_demand():
    result = invoke("run", "-N", "2", "-K", "5", "-D", "3", "-j", "1", "-q", "5")
    assert result.exit_code == 0
    assert result.stdout.startswith("rate 3/4, decode OK")


def test_run_rejects_composite_field():
    result = invoke("run", "-N", "2", "-K", "5", "-D", "2", "-q", "4")
    assert result.exit_code == 2
    assert "q must be prime" in result.output


def test_run_rejects_unsupported_prime():
    result = invoke("run", "-N", "2", "-K", "5", "-D", "2", "-q", "13")
    assert result.exit_code == 2
    assert "q must be one of 2, 3, 5, 7, 11 (got 13)" in result.output


def test_run_json_is_byte_identical():
    args = ("run", "-N", "3", "-K", "7", "-D", "3", "-j", "2", "-q", "3", "--format", "json")
    first, second = invoke(*args), invoke(*args)
    assert first.stdout == second.stdout
    assert json.loads(first.stdout)["ok"] is True


# ── audit and sweep ──────────────────────────────────────────────────────────

def test_audit_passes():
    result = invoke("audit", "-N", "2", "-K", "5", "-D", "2")
    assert result.exit_code == 0
    assert "overall: pass" in result.stdout
    assert "statistical-privacy" in result.stdout


def test_audit_json_without_sampling():
    result = invoke("audit", "-N", "2", "-K", "6", "-D", "2", "--samples", "0", "--format", "json")
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert data["overall"] == "pass"
    assert "statistical-privacy" not in {c["name"] for c in data["checks"]}


def test_audit_rejects_small_sample():
    result = invoke("audit", "-N", "2", "-K", "5", "-D", "2", "--samples", "10")
    assert result.exit_code == 2


def test_audit_failure_names_first_failing_check():
    result = invoke(
        "audit", "-N", "2", "-K", "5", "-D", "2", "--samples", "1000", "--threshold", "0"
    )
    assert result.exit_code == 1
    assert "overall: fail" in result.stdout
    assert "statistical-privacy (2,5,2) W1/W2 server 1" in result.output


def test_sweep_rejects_unsupported_prime():
    result = invoke("sweep", "--N", "2", "--K", "4", "--q", "2,13", "--seeds", "1")
    assert result.exit_code == 2
    assert "q must be one of" in result.output


def test_sweep_shows_mpir_comparison():
    result = invoke("sweep", "--N", "2", "--K", "5", "--q", "2", "--seeds", "1")
    assert result.exit_code == 0
    assert "(2,5,2): 8/13 @ L=8 vs MPIR 82/135 @ L=82" in result.stdout
    assert "overall: pass" in result.stdout


@pytest.mark.slow
def test_sweep_default_grid():
    result = invoke("sweep", "--N", "2..3", "--K", "3..8", "--q", "2,3", "--seeds", "5")
    assert result.exit_code == 0
    assert "(2,5,2): 8/13 @ L=8 vs MPIR 82/135 @ L=82" in result.stdout


def test_sweep_rejects_empty_range():
    result = invoke("sweep", "--K", "3..2")
    assert result.exit_code == 2
    assert "empty range" in result.output


def test_sweep_presets_override(tmp_path):
    (tmp_path / "defaults.yaml").write_text(
        "sweep:\n  N: '2'\n  K: '4'\n  q: [3]\n  seeds: 1\n", encoding="utf-8"
    )
    result = invoke("sweep", env={"PCBR_PRESETS_DIR": str(tmp_path)})
    assert result.exit_code == 0
    assert "(2,4,2)" in result.stdout and "(2,4,3)" in result.stdout
    assert "(2,5,2)" not in result.stdout
