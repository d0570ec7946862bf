"""Auditors for correctness, privacy and the rate/subpacketization identities.

Privacy is certified structurally: identical per-server query shapes across all
demand windows, uniform per-message index permutations and no repeated
subpacket at any server together make a server's view independent of the
demand. ``audit_statistical_privacy`` is a sampling regression guard on top.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from pcbr.errors import ParameterError, PipelineError
from pcbr.field import require_prime
from pcbr.graph import run_round_trip
from pcbr.models import AuditReport, Params, QueryPlan, Support
from pcbr.params import (
    canonical_permutation,
    converse_bound,
    derive_params,
    geometric,
    minimal_integral_subpacketization,
    mpir_dk_subpacketization,
    per_server_count,
    rate_of,
    subpack_lower,
    subpack_upper,
)
from pcbr.scheme import (
    build_canonical_plan,
    build_partition,
    draw_permutations,
    enumerate_supports,
    plan_shape,
    reduce_large_demand,
)

logger = logging.getLogger(__name__)

# Best-known MPIR scheme for (N, K, D) = (2, 5, 2): rate 82/135 at subpacketization 82.
MPIR_REFERENCE = {(2, 5, 2): (Fraction(82, 135), 82)}

# Upper bound on samples x pairs held in memory by one gap histogram batch.
GAP_CHUNK = 1 << 22

# (rng, samples, K, L, demand) -> array of shape (samples, K, L)
Masker = Callable[[np.random.Generator, int, int, int, Support], np.ndarray]


def uniform_masks(
    rng: np.random.Generator, samples: int, K: int, L: int, demand: Support
) -> np.ndarray:
    return draw_permutations(rng, K, L, samples)


def default_threshold(L: int, samples: int) -> float:
    """Twice the expected sampling TV between two uniform L-ary samples, floored at 0.05."""
    return max(0.05, 2 * math.sqrt((L - 1) / (math.pi * samples)))


# ── Shape privacy ────────────────────────────────────────────────────────────

def audit_shape_privacy(
    N: int, K: int, D: int, plans: Optional[Mapping[int, QueryPlan]] = None
) -> AuditReport:
    """Every server must see the same multiset of supports for every demand window."""
    p = derive_params(N, K, D)
    if plans is None:
        plans = {j: build_canonical_plan(p, j) for j in range(1, p.E + 1)}
    report = AuditReport()
    reference_j = min(plans)
    for n in range(1, N + 1):
        reference = Counter(plan_shape(plans[reference_j], n))
        for j, plan in sorted(plans.items()):
            shape = Counter(plan_shape(plan, n))
            if shape != reference:
                diff = sorted((shape - reference) + (reference - shape), key=lambda u: (len(u), u))
                report.add(
                    "shape-privacy",
                    p.label,
                    False,
                    f"server {n}: W{j} differs from W{reference_j} at support {diff[0]}",
                )
                return report
    report.add(
        "shape-privacy",
        p.label,
        True,
        f"{len(plans)} windows x {N} servers share one support multiset",
    )
    return report


# ── Index discipline ─────────────────────────────────────────────────────────

def expected_counts(params: Params) -> dict[int, int]:
    """Subpackets of each message that appear at every server."""
    if params.regime == "LARGE_D":
        return {x: params.N for x in range(1, params.K + 1)}
    partition = build_partition(params)
    counts = {x: params.N ** (params.g - 1) for x in partition.s1}
    counts.update({x: params.N**params.f for x in partition.s2})
    return counts


def audit_index_discipline(plan: QueryPlan) -> AuditReport:
    p = plan.params
    label = f"{p.label} j={plan.demand_index}"
    report = AuditReport()

    repeats = []
    for n, symbols in enumerate(plan.servers, 1):
        seen = Counter((x, t) for s in symbols for x, t in s.entries.items())
        repeats += [(n, pair) for pair, c in seen.items() if c > 1]
    report.add(
        "distinct-subpackets",
        label,
        not repeats,
        f"server {repeats[0][0]} repeats (message, index) {repeats[0][1]}"
        if repeats
        else "no subpacket repeats within any server",
    )

    expected = expected_counts(p)
    wrong = []
    for n, symbols in enumerate(plan.servers, 1):
        got = Counter(x for s in symbols for x in s.entries)
        wrong += [(n, x, got[x], c) for x, c in expected.items() if got[x] != c]
    report.add(
        "per-server-counts",
        label,
        not wrong,
        "server {} message {}: {} subpackets, expected {}".format(*wrong[0])
        if wrong
        else f"every message contributes its expected count to all {p.N} servers",
    )

    uncovered = []
    for x in plan.demand:
        used = sorted(s.entries[x] for symbols in plan.servers for s in symbols if x in s.entries)
        if used != list(range(1, p.L + 1)):
            uncovered.append(x)
    report.add(
        "demand-coverage",
        label,
        not uncovered,
        f"message {uncovered[0]} does not use [1:{p.L}] exactly once"
        if uncovered
        else f"each demand message uses all {p.L} indices exactly once",
    )
    return report


# ── Statistical privacy ──────────────────────────────────────────────────────

def _coordinates(plan: QueryPlan, server: int) -> list[tuple[int, int]]:
    """(message, canonical index) of every symbol slot at *server*, in transmission order."""
    return [(x, t) for s in plan.servers[server - 1] for x, t in sorted(s.entries.items())]


def _server_views(
    plan: QueryPlan,
    server: int,
    samples: int,
    rng: np.random.Generator,
    masker: Masker,
) -> np.ndarray:
    """Masked index of every (symbol slot, message) coordinate, one row per sample."""
    p = plan.params
    coords = _coordinates(plan, server)
    messages = np.array([x - 1 for x, _ in coords])
    indices = np.array([t - 1 for _, t in coords])
    perms = masker(rng, samples, p.K, p.L, plan.demand)
    return perms[:, messages, indices]


def _gap_pairs(coords: Sequence[tuple[int, int]]) -> np.ndarray:
    """Column pairs (a, b), a < b, whose coordinates belong to the same message."""
    columns: dict[int, list[int]] = {}
    for col, (x, _) in enumerate(coords):
        columns.setdefault(x, []).append(col)
    pairs = [pair for cols in columns.values() for pair in combinations(cols, 2)]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _max_tv(a: np.ndarray, b: np.ndarray, L: int) -> float:
    worst = 0.0
    for col in range(a.shape[1]):
        pa = np.bincount(a[:, col], minlength=L + 1) / a.shape[0]
        pb = np.bincount(b[:, col], minlength=L + 1) / b.shape[0]
        worst = max(worst, 0.5 * float(np.abs(pa - pb).sum()))
    return worst


def _histograms(gaps: np.ndarray, L: int) -> np.ndarray:
    """Row i is the empirical distribution of column i of *gaps* over [0:L-1]."""
    samples, width = gaps.shape
    shifted = gaps + np.arange(width, dtype=np.int64) * L
    return np.bincount(shifted.ravel(), minlength=width * L).reshape(width, L) / samples


def _max_gap_tv(a: np.ndarray, b: np.ndarray, pairs: np.ndarray, L: int) -> float:
    """Largest TV over the joint index gap (v_b - v_a) mod L of every same-message pair."""
    worst = 0.0
    chunk = max(1, GAP_CHUNK // a.shape[0])
    for start in range(0, len(pairs), chunk):
        block = pairs[start : start + chunk]
        ga = (a[:, block[:, 1]] - a[:, block[:, 0]]) % L
        gb = (b[:, block[:, 1]] - b[:, block[:, 0]]) % L
        diff = np.abs(_histograms(ga, L) - _histograms(gb, L)).sum(axis=1)
        worst = max(worst, 0.5 * float(diff.max()))
    return worst


def audit_statistical_privacy(
    N: int,
    K: int,
    D: int,
    j: int,
    j2: int,
    server: int,
    samples: int,
    threshold: float,
    *,
    seed: int = 0,
    masker: Masker = uniform_masks,
) -> AuditReport:
    """Empirical TV distance between a server's masked views under demands j and j2.

    Two statistics are estimated: the TV of every (symbol slot, message)
    coordinate on its own, and the TV of the index gap between every two slots
    of the same message, which sees masks that are uniform per coordinate but
    keep the relative order of indices. The larger of the two is reported. If
    the support sequences differ the distributions are disjoint and the
    estimate is 1.
    """
    p = derive_params(N, K, D)
    if samples < 1000:
        raise ParameterError(f"samples must be ≥ 1000 (got {samples})")
    if not 1 <= server <= N:
        raise ParameterError(f"server must be in [1:{N}] (got {server})")
    plan_a = build_canonical_plan(p, j)
    plan_b = build_canonical_plan(p, j2)

    if plan_shape(plan_a, server) != plan_shape(plan_b, server):
        coordinate_tv = gap_tv = 1.0
    else:
        rng_a, rng_b = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        views_a = _server_views(plan_a, server, samples, rng_a, masker)
        views_b = _server_views(plan_b, server, samples, rng_b, masker)
        coordinate_tv = _max_tv(views_a, views_b, p.L)
        # slot positions line up because the support sequences match
        gap_tv = _max_gap_tv(views_a, views_b, _gap_pairs(_coordinates(plan_a, server)), p.L)
    tv = max(coordinate_tv, gap_tv)

    report = AuditReport()
    report.add(
        "statistical-privacy",
        f"{p.label} W{j}/W{j2} server {server}",
        tv <= threshold,
        f"TV {tv:.4f} vs threshold {threshold:.4f} at {samples} samples "
        f"(coordinates {coordinate_tv:.4f}, index gaps {gap_tv:.4f})",
    )
    logger.info("statistical privacy %s W%d/W%d server %d: TV %.4f", p.label, j, j2, server, tv)
    return report


# ── Rates and bounds ─────────────────────────────────────────────────────────

def _census(p: Params) -> tuple[bool, str]:
    if p.regime == "LARGE_D":
        reduction = reduce_large_demand(p, 1)
        r = reduction.reduced
        phase2 = p.N * r.D * geometric(p.N, r.g)
        ok = (
            r.K % r.D == 0
            and r.g == 2
            and per_server_count(r) == r.D * (p.N + 1)
            and (2 * p.D - p.K) * p.N**2 + phase2 == p.N * per_server_count(p)
        )
        return ok, f"phase 1 {(2 * p.D - p.K) * p.N}/server, phase 2 {phase2} total"

    partition = build_partition(p)
    plan = enumerate_supports(partition, p)
    s1_total = sum(c for u, c in plan.counts.items() if set(u) <= partition.s1)
    s1_binomial = p.M * sum(comb(p.g, k) * (p.N - 1) ** (k - 1) for k in range(1, p.g + 1))
    census_ok = all(
        sum(1 for u in plan.counts if len(u) == k and set(u) <= partition.s1) == p.M * comb(p.g, k)
        for k in range(1, p.g + 1)
    ) and all(
        sum(1 for u in plan.counts if len(u) == k and set(u) <= partition.s2)
        == (p.D - p.M) * comb(p.f, k)
        for k in range(1, p.f + 1)
    )
    ok = (
        plan.total == per_server_count(p)
        and s1_total == s1_binomial == p.M * geometric(p.N, p.g)
        and census_ok
    )
    return ok, f"{plan.total} symbols/server, S1 part {s1_total}, {len(plan.counts)} supports"


def audit_rate_and_bounds(
    N: int, K: int, D: int, plan: Optional[QueryPlan] = None
) -> AuditReport:
    """Rate, integrality, divisibility, tightness, converse and census checks.

    The achieved rate is measured on *plan* (the canonical W1 plan by default);
    every server must download the same number of symbols.
    """
    p = derive_params(N, K, D)
    rate = rate_of(p)
    report = AuditReport()

    if plan is None:
        plan = build_canonical_plan(p, 1)
    sizes = {len(symbols) for symbols in plan.servers}
    achieved = Fraction(p.D * p.L, sum(len(symbols) for symbols in plan.servers))
    report.add(
        "optimal-rate",
        p.label,
        achieved == rate and len(sizes) == 1,
        f"achieved {achieved}, optimum {rate}"
        + ("" if len(sizes) == 1 else f", unbalanced servers {sorted(sizes)}"),
    )

    per_server = Fraction(p.D * p.L) / (p.N * rate)
    minimal = minimal_integral_subpacketization(N, K, D)
    lower, upper = subpack_lower(N, K, D), subpack_upper(N, K, D)
    report.add(
        "integrality",
        p.label,
        per_server.denominator == 1 and minimal == lower,
        f"D·L/(N·R) = {per_server} at L = {upper}; smallest integral L = {minimal}",
    )
    report.add("divisibility", p.label, upper % lower == 0, f"L_* = {lower} divides L^* = {upper}")

    coprime = math.gcd(p.N, p.M) == 1
    report.add(
        "coprime-tightness",
        p.label,
        not coprime or lower == upper,
        f"gcd(N, K−D(g−1)) = {math.gcd(p.N, p.M)}; L_* = {lower}, L^* = {upper}",
    )

    converse = converse_bound(N, K, D, canonical_permutation(N, K, D))
    report.add("converse", p.label, converse == rate, f"converse at canonical π = {converse}")

    ok, evidence = _census(p)
    report.add("census", p.label, ok, evidence)
    return report


# ── Sweep ────────────────────────────────────────────────────────────────────

def _mpir_lines(p: Params, rate: Fraction) -> Iterable[str]:
    if (p.N, p.K, p.D) in MPIR_REFERENCE:
        ref_rate, ref_l = MPIR_REFERENCE[(p.N, p.K, p.D)]
        yield f"{p.label}: {rate} @ L={p.L} vs MPIR {ref_rate} @ L={ref_l}"
    if p.K % p.D == 0:
        mpir_l = mpir_dk_subpacketization(p.N, p.K, p.D)
        yield f"{p.label}: L={p.L} vs MPIR L ≥ {mpir_l}"


def audit_point(
    N: int,
    K: int,
    D: int,
    *,
    q_list: Sequence[int] = (2,),
    seeds: Iterable[int] = (0,),
    samples: int = 0,
    threshold: Optional[float] = None,
) -> AuditReport:
    """All audits for one (N, K, D): bounds, shape, index discipline, round trips.

    With *samples* > 0 the statistical privacy check runs for every window pair
    and server.
    """
    p = derive_params(N, K, D)
    seeds = list(seeds)
    report = audit_rate_and_bounds(N, K, D)
    plans = {j: build_canonical_plan(p, j) for j in range(1, p.E + 1)}
    report.extend(audit_shape_privacy(N, K, D, plans))
    for plan in plans.values():
        report.extend(audit_index_discipline(plan))

    for j in plans:
        for q in q_list:
            for seed in seeds:
                try:
                    trip = run_round_trip(N, K, D, j, q, seed)
                    report.add(
                        "round-trip",
                        f"{p.label} j={j} q={q} seed={seed}",
                        trip.ok,
                        f"rate {trip.rate}, decode {'OK' if trip.ok else 'FAIL'}, "
                        f"oracle {'OK' if trip.oracle else 'FAIL'}",
                    )
                except PipelineError as exc:
                    report.add("round-trip", f"{p.label} j={j} q={q} seed={seed}", False, str(exc))

    if samples:
        limit = threshold if threshold is not None else default_threshold(p.L, samples)
        for j in range(1, p.E + 1):
            for j2 in range(j + 1, p.E + 1):
                for n in range(1, N + 1):
                    report.extend(
                        audit_statistical_privacy(N, K, D, j, j2, n, samples, limit)
                    )

    for line in _mpir_lines(p, rate_of(p)):
        report.add("mpir-comparison", p.label, True, line)
    logger.info("audit %s: %s", p.label, report.overall)
    return report


def sweep(
    N_range: Sequence[int],
    K_range: Sequence[int],
    q_list: Sequence[int],
    seeds: int,
) -> AuditReport:
    """Every audit and round trip over N in N_range, K in K_range, D in [2:K-1]."""
    if not N_range or not K_range or not q_list:
        raise ParameterError("empty range")
    if seeds < 1:
        raise ParameterError(f"seeds must be ≥ 1 (got {seeds})")
    for q in q_list:
        require_prime(q)
    report = AuditReport()
    for N in N_range:
        for K in K_range:
            for D in range(2, K):
                report.extend(audit_point(N, K, D, q_list=q_list, seeds=range(seeds)))
    return report
