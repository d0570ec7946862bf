from __future__ import annotations

import numpy as np
import pytest

from pcbr.audit import (
    MPIR_REFERENCE,
    audit_index_discipline,
    audit_point,
    audit_rate_and_bounds,
    audit_shape_privacy,
    audit_statistical_privacy,
    default_threshold,
    expected_counts,
    sweep,
    uniform_masks,
)
from pcbr.errors import ParameterError
from pcbr.models import AuditReport, SymbolSpec
from pcbr.params import derive_params
from pcbr.scheme import build_canonical_plan, mask_plan

from conftest import FULL_GRID, GRID


def _names(report: AuditReport) -> list[str]:
    return [c.name for c in report.checks]


def test_report_overall():
    report = AuditReport()
    assert report.overall == "pass"
    report.add("a", "(2,5,2)", True)
    report.add("b", "(2,5,2)", False, "broken")
    assert report.overall == "fail"
    assert report.first_failure().name == "b"
    assert report.model_dump(mode="json")["overall"] == "fail"


# ── shape privacy ────────────────────────────────────────────────────────────

def test_shape_privacy_252():
    report = audit_shape_privacy(2, 5, 2)
    assert report.passed
    assert "4 windows" in report.checks[0].evidence


@pytest.mark.parametrize("nkd", GRID)
def test_shape_privacy_grid(nkd):
    assert audit_shape_privacy(*nkd).passed


def test_shape_privacy_rejects_extra_demand_singleton(plans252):
    plan = plans252[2]
    extra = SymbolSpec(server=1, support=(2,), entries={2: 8}, demand_entry=2)
    mutant = plan.model_copy(
        update={"servers": (plan.servers[0] + (extra,), plan.servers[1])}
    )
    report = audit_shape_privacy(2, 5, 2, {**plans252, 2: mutant})
    assert not report.passed
    assert "server 1" in report.checks[0].evidence
    assert "(2,)" in report.checks[0].evidence


# ── index discipline ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_index_discipline_252(plans252, j):
    report = audit_index_discipline(plans252[j])
    assert report.passed
    assert _names(report) == ["distinct-subpackets", "per-server-counts", "demand-coverage"]


def test_expected_counts(p252, p253):
    assert expected_counts(p252) == {1: 4, 2: 4, 3: 4, 4: 4, 5: 4}
    assert expected_counts(p253) == {x: 2 for x in range(1, 6)}
    p373 = derive_params(3, 7, 3)
    assert expected_counts(p373)[1] == 9
    assert expected_counts(p373)[2] == 9


def test_index_discipline_window_two_uses_all_of_c(plans252):
    report = audit_index_discipline(plans252[2])
    assert report.checks[2].passed
    assert "all 8 indices" in report.checks[2].evidence


@pytest.mark.parametrize("nkd", GRID)
def test_index_discipline_grid(nkd):
    p = derive_params(*nkd)
    for j in range(1, p.E + 1):
        assert audit_index_discipline(build_canonical_plan(p, j)).passed


def test_index_discipline_rejects_reused_index(plans252):
    plan = plans252[1]
    symbols = list(plan.servers[0])
    first, second = (i for i, s in enumerate(symbols) if s.support == (2,))
    symbols[second] = symbols[second].model_copy(update={"entries": dict(symbols[first].entries)})
    mutant = plan.model_copy(update={"servers": (tuple(symbols), plan.servers[1])})
    report = audit_index_discipline(mutant)
    assert not report.checks[0].passed
    assert not report.passed


def test_index_discipline_masked_plan(plans252):
    assert audit_index_discipline(mask_plan(plans252[3], 12)[0]).passed


# ── statistical privacy ──────────────────────────────────────────────────────

def test_statistical_privacy_252():
    report = audit_statistical_privacy(2, 5, 2, 1, 2, 1, 10000, 0.05)
    assert report.passed, report.checks[0].evidence


def test_statistical_privacy_same_demand_is_near_zero():
    report = audit_statistical_privacy(2, 5, 2, 3, 3, 2, 10000, 0.05, seed=3)
    tv = float(report.checks[0].evidence.split()[1])
    assert tv < 0.05


def test_statistical_privacy_rejects_unpermuted_demand():
    def leaky(rng, samples, K, L, demand):
        perms = uniform_masks(rng, samples, K, L, demand)
        for x in demand:
            perms[:, x - 1, :] = np.arange(1, L + 1)
        return perms

    report = audit_statistical_privacy(2, 5, 2, 1, 2, 1, 10000, 0.05, masker=leaky)
    assert not report.passed


def test_statistical_privacy_rejects_cyclic_shift_masks():
    # uniform per coordinate, but the gap between two slots of a message is fixed
    def cyclic(rng, samples, K, L, demand):
        shifts = rng.integers(0, L, size=(samples, K, 1))
        return (np.arange(L, dtype=np.int64) + shifts) % L + 1

    report = audit_statistical_privacy(2, 5, 2, 1, 2, 1, 10000, 0.05, masker=cyclic)
    evidence = report.checks[0].evidence
    assert not report.passed
    assert "index gaps 1.0000" in evidence
    coordinate_tv = float(evidence.split("coordinates ")[1].split(",")[0])
    assert coordinate_tv < 0.05


def test_statistical_privacy_gap_statistic_near_zero_for_uniform_masks():
    report = audit_statistical_privacy(3, 7, 3, 1, 4, 2, 10000, 0.1, seed=5)
    gap_tv = float(report.checks[0].evidence.split("index gaps ")[1].rstrip(")"))
    assert gap_tv < default_threshold(27, 10000)


def test_statistical_privacy_needs_samples():
    with pytest.raises(ParameterError):
        audit_statistical_privacy(2, 5, 2, 1, 2, 1, 999, 0.05)
    with pytest.raises(ParameterError):
        audit_statistical_privacy(2, 5, 2, 1, 2, 3, 1000, 0.05)


def test_default_threshold():
    assert default_threshold(8, 10000) == 0.05
    assert default_threshold(81, 10000) > 0.05


# ── rate and bounds ──────────────────────────────────────────────────────────

def test_rate_and_bounds_252():
    report = audit_rate_and_bounds(2, 5, 2)
    assert report.passed
    assert len(report.checks) == 6
    assert "optimum 8/13" in report.checks[0].evidence


def test_rate_and_bounds_262():
    report = audit_rate_and_bounds(2, 6, 2)
    assert report.passed
    assert "L_* = 4 divides L^* = 8" in report.checks[2].evidence


def test_rate_and_bounds_large_demand():
    report = audit_rate_and_bounds(2, 5, 3)
    assert report.passed
    assert "phase 1 2/server" in report.checks[-1].evidence


@pytest.mark.parametrize("nkd", FULL_GRID)
def test_rate_and_bounds_grid(nkd):
    assert audit_rate_and_bounds(*nkd).passed


# ── point audits and sweep ───────────────────────────────────────────────────

def test_audit_point_includes_round_trips_and_mpir_line():
    report = audit_point(2, 5, 2, q_list=(2, 3), seeds=range(2))
    assert report.passed
    assert _names(report).count("round-trip") == 4 * 2 * 2
    lines = [c.evidence for c in report.checks if c.name == "mpir-comparison"]
    assert lines == ["(2,5,2): 8/13 @ L=8 vs MPIR 82/135 @ L=82"]
    assert MPIR_REFERENCE[(2, 5, 2)][1] == 82


def test_audit_point_demand_divides_messages_shows_mpir_bound():
    report = audit_point(2, 4, 2)
    lines = [c.evidence for c in report.checks if c.name == "mpir-comparison"]
    assert lines == ["(2,4,2): L=4 vs MPIR L ≥ 4"]


def test_audit_point_with_sampling():
    report = audit_point(2, 4, 2, samples=10000)
    assert report.passed
    assert _names(report).count("statistical-privacy") == 3 * 2


def test_sweep_small_grid():
    report = sweep([2], [3, 4, 5], [2], 1)
    assert report.passed
    labels = {c.params.split()[0] for c in report.checks}
    assert labels == {"(2,3,2)", "(2,4,2)", "(2,4,3)", "(2,5,2)", "(2,5,3)", "(2,5,4)"}


def test_sweep_rejects_empty_range():
    with pytest.raises(ParameterError, match="empty range"):
        sweep([2], [], [2], 1)
    with pytest.raises(ParameterError, match="q must be prime"):
        sweep([2], [4], [4], 1)


def test_rate_and_bounds_rejects_padded_plan(plans252):
    plan = plans252[1]
    padding = SymbolSpec(server=2, support=(5,), entries={5: 8})
    mutant = plan.model_copy(update={"servers": (plan.servers[0], plan.servers[1] + (padding,))})
    report = audit_rate_and_bounds(2, 5, 2, mutant)
    assert not report.checks[0].passed
    assert "unbalanced servers [13, 14]" in report.checks[0].evidence


def test_statistical_privacy_every_pair_and_server_252():
    for j in range(1, 5):
        for j2 in range(j + 1, 5):
            for server in (1, 2):
                report = audit_statistical_privacy(2, 5, 2, j, j2, server, 10000, 0.05)
                assert report.passed, report.checks[0].evidence
