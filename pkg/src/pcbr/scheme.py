"""Construction of the rate-optimal query plans and their private masking.

For D ≤ K/2 the messages are laid out in alternating S1/S2 blocks and every
admissible support U is requested T_U times per server. Subpacket indices are
handed out in increasing sum size: demand subpackets always get fresh indices,
interference subpackets of a demand-bearing k-sum reuse the indices of a
(k-1)-sum on the same interference messages retrieved from another server.

For D > K/2 the messages common to every window are read directly and the rest
is a reduced instance with D̂ | K̂, solved by the same construction.
"""

from __future__ import annotations

import logging
from itertools import combinations
from typing import Optional

import numpy as np

from pcbr.errors import ConstructionError, ParameterError
from pcbr.field import require_prime
from pcbr.models import (
    LargeDemandReduction,
    Params,
    Partition,
    QueryPlan,
    SideInfo,
    Support,
    SupportPlan,
    SymbolSpec,
)
from pcbr.params import derive_params, per_server_count

logger = logging.getLogger(__name__)


def demand_window(j: int, D: int, K: int) -> Support:
    """The candidate demand index set W_j = [j : j+D-1]."""
    if not 1 <= j <= K - D + 1:
        raise ParameterError(f"j must be in [1:{K - D + 1}] (got {j})")
    return tuple(range(j, j + D))


def build_partition(params: Params) -> Partition:
    if params.regime == "LARGE_D":
        raise ParameterError(
            f"{params.label}: the block partition needs D ≤ K/2; use reduce_large_demand first"
        )
    s1: list[tuple[int, ...]] = []
    s2: list[tuple[int, ...]] = []
    start = 1
    for block in range(1, params.g + 1):
        s1.append(tuple(range(start, start + params.M)))
        start += params.M
        if block <= params.f and params.M < params.D:
            s2.append(tuple(range(start, start + params.D - params.M)))
            start += params.D - params.M
    if start != params.K + 1:
        raise ConstructionError(f"{params.label}: blocks cover [1:{start - 1}], not [1:{params.K}]")
    return Partition(s1_blocks=tuple(s1), s2_blocks=tuple(s2))


def enumerate_supports(partition: Partition, params: Params) -> SupportPlan:
    """T_U for every admissible support.

    A support takes the element at one common position from each of k distinct
    blocks of the same set (positions agree exactly when the elements are
    congruent modulo D). S1 supports get (N-1)^(k-1) copies, S2 supports
    N(N-1)^(k-1); mixed supports get none.
    """
    N = params.N
    counts: dict[Support, int] = {}
    for blocks, base in ((partition.s1_blocks, 1), (partition.s2_blocks, N)):
        width = len(blocks[0]) if blocks else 0
        for k in range(1, len(blocks) + 1):
            for chosen in combinations(blocks, k):
                for pos in range(width):
                    counts[tuple(block[pos] for block in chosen)] = base * (N - 1) ** (k - 1)
    plan = SupportPlan(counts=counts)
    if plan.total != per_server_count(params):
        raise ConstructionError(
            f"{params.label}: supports give {plan.total} symbols per server, "
            f"expected {per_server_count(params)}"
        )
    return plan


def reduce_large_demand(params: Params, j: int) -> LargeDemandReduction:
    """Split a D > K/2 instance into the common messages and a (2K-2D, K-D) instance."""
    if params.regime != "LARGE_D":
        raise ParameterError(f"{params.label}: reduction applies only when D > K/2")
    K, D = params.K, params.D
    window = demand_window(j, D, K)
    common = tuple(range(K - D + 1, D + 1))
    reduced = derive_params(params.N, 2 * (K - D), K - D, allow_unit_demand=True)

    shift = 2 * D - K
    relabel = {x: x for x in range(1, K - D + 1)}
    relabel.update({x - shift: x for x in range(D + 1, K + 1)})
    to_reduced = {orig: red for red, orig in relabel.items()}

    residual = sorted(to_reduced[x] for x in window if x not in common)
    if residual != list(range(j, j + K - D)):
        raise ConstructionError(f"{params.label}: residual demand {residual} is not contiguous")
    return LargeDemandReduction(
        common=common, reduced=reduced, relabel=relabel, reduced_demand_index=j
    )


def _build_blocks(params: Params, j: int) -> list[list[SymbolSpec]]:
    N, K, L = params.N, params.K, params.L
    window = set(demand_window(j, params.D, K))
    support_plan = enumerate_supports(build_partition(params), params)

    servers: list[list[SymbolSpec]] = [[] for _ in range(N)]
    issued = dict.fromkeys(range(1, K + 1), 0)
    # positions of interference-only symbols, per support and server
    pool: dict[Support, list[list[int]]] = {}

    def fresh(message: int) -> int:
        issued[message] += 1
        if issued[message] > L:
            raise ConstructionError(f"message {message} ran out of the {L} subpacket indices")
        return issued[message]

    for support in support_plan.supports():
        copies = support_plan.multiplicity(support)
        hits = [x for x in support if x in window]
        if len(hits) > 1:
            raise ConstructionError(f"support {support} holds demand messages {hits}")

        if not hits:
            positions: list[list[int]] = [[] for _ in range(N)]
            for n in range(N):
                for _ in range(copies):
                    positions[n].append(len(servers[n]))
                    servers[n].append(
                        SymbolSpec(
                            server=n + 1,
                            support=support,
                            entries={x: fresh(x) for x in support},
                        )
                    )
            pool[support] = positions
            continue

        demand = hits[0]
        if len(support) == 1:
            for n in range(N):
                for _ in range(copies):
                    servers[n].append(
                        SymbolSpec(
                            server=n + 1,
                            support=support,
                            entries={demand: fresh(demand)},
                            demand_entry=demand,
                        )
                    )
            continue

        rest = tuple(x for x in support if x != demand)
        sources = pool.get(rest)
        if sources is None:
            raise ConstructionError(f"support {support}: no interference symbols on {rest}")
        for n in range(N):
            # label (m, s): the s-th interference symbol on `rest` at server m != n
            labels = [(m, s) for m in range(N) if m != n for s in sources[m]]
            if len(labels) != copies:
                raise ConstructionError(
                    f"support {support}: {len(labels)} side-information symbols "
                    f"for {copies} demand symbols at server {n + 1}"
                )
            for m, s in labels:
                source = servers[m][s]
                servers[n].append(
                    SymbolSpec(
                        server=n + 1,
                        support=support,
                        entries={
                            x: fresh(x) if x == demand else source.entries[x] for x in support
                        },
                        demand_entry=demand,
                        side_info=SideInfo(server=m + 1, symbol=s),
                    )
                )
    return servers


def _relabel(symbol: SymbolSpec, relabel: dict[int, int], offset: int) -> SymbolSpec:
    side_info = None
    if symbol.side_info is not None:
        side_info = SideInfo(
            server=symbol.side_info.server, symbol=symbol.side_info.symbol + offset
        )
    return SymbolSpec(
        server=symbol.server,
        support=tuple(relabel[x] for x in symbol.support),
        entries={relabel[x]: t for x, t in symbol.entries.items()},
        demand_entry=None if symbol.demand_entry is None else relabel[symbol.demand_entry],
        side_info=side_info,
    )


def build_canonical_plan(params: Params, j: int, q: Optional[int] = None) -> QueryPlan:
    """Deterministic, unmasked query plan for demand window W_j.

    The plan is the same over every field; *q*, when given, is only validated.
    Symbols are ordered by support size, then lexicographically, except for D > K/2:
    there each server lists its direct reads of the common messages first and the
    reduced instance after them, an order that does not depend on the window.
    """
    if q is not None:
        require_prime(q)
    demand_window(j, params.D, params.K)
    if params.regime == "SMALL_D":
        servers = _build_blocks(params, j)
        plan = QueryPlan(
            params=params,
            demand_index=j,
            servers=tuple(tuple(s) for s in servers),
        )
    else:
        reduction = reduce_large_demand(params, j)
        inner = _build_blocks(reduction.reduced, reduction.reduced_demand_index)
        N = params.N
        servers = []
        for n in range(N):
            phase1 = [
                SymbolSpec(
                    server=n + 1, support=(c,), entries={c: n * N + t}, demand_entry=c
                )
                for c in reduction.common
                for t in range(1, N + 1)
            ]
            offset = len(phase1)
            servers.append(
                tuple(phase1 + [_relabel(s, reduction.relabel, offset) for s in inner[n]])
            )
        plan = QueryPlan(
            params=params,
            demand_index=j,
            servers=tuple(servers),
            common=reduction.common,
            relabel=reduction.relabel,
        )

    expected = per_server_count(params)
    for n, symbols in enumerate(plan.servers, 1):
        if len(symbols) != expected:
            raise ConstructionError(
                f"server {n} has {len(symbols)} symbols, expected {expected}"
            )
    logger.debug("built canonical plan %s j=%d (%d symbols/server)", params.label, j, expected)
    return plan


def plan_shape(plan: QueryPlan, server: int) -> list[Support]:
    """Supports requested from *server*, in transmission order."""
    return [s.support for s in plan.servers[server - 1]]


def draw_permutations(
    rng: np.random.Generator, K: int, L: int, samples: Optional[int] = None
) -> np.ndarray:
    """Independent uniform permutations of [1:L], one per message.

    Shape (K, L), or (samples, K, L) when *samples* is given. Row x-1 maps the
    canonical index t to the masked index perms[x-1, t-1].
    """
    shape = (K, L) if samples is None else (samples, K, L)
    base = np.broadcast_to(np.arange(1, L + 1, dtype=np.int64), shape)
    return rng.permuted(base, axis=-1)


def apply_masks(plan: QueryPlan, perms: np.ndarray) -> QueryPlan:
    def relabeled(symbol: SymbolSpec) -> SymbolSpec:
        entries = {x: int(perms[x - 1, t - 1]) for x, t in symbol.entries.items()}
        return symbol.model_copy(update={"entries": entries})

    servers = tuple(tuple(relabeled(s) for s in symbols) for symbols in plan.servers)
    return plan.model_copy(update={"servers": servers})


def mask_plan(plan: QueryPlan, seed: Optional[int]) -> tuple[QueryPlan, np.ndarray]:
    """Relabel each message's subpacket indices by a private uniform permutation.

    ``seed=None`` uses identity permutations. The permutations are returned so
    the user can map decoded positions back to canonical ones.
    """
    K, L = plan.params.K, plan.params.L
    if seed is None:
        perms = np.tile(np.arange(1, L + 1, dtype=np.int64), (K, 1))
    else:
        perms = draw_permutations(np.random.default_rng(seed), K, L)
    logger.debug("masking plan %s j=%d seed=%s", plan.params.label, plan.demand_index, seed)
    return apply_masks(plan, perms), perms
