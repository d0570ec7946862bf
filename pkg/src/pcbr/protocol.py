"""Server answers, the user's subtraction decoder and a linear-algebra oracle."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from pcbr.errors import DecodingError, PlanMismatchError
from pcbr.field import FieldElement, sub
from pcbr.models import Answer, DecodeResult, MessageStore, QueryPlan, SymbolSpec

logger = logging.getLogger(__name__)


def answer_query(store: MessageStore, plan_slice: Sequence[SymbolSpec]) -> Answer:
    """Evaluate one server's symbols against *store* (each value is a sum over F_q)."""
    if not plan_slice:
        raise PlanMismatchError("cannot answer an empty query")
    server = plan_slice[0].server
    rows = store.data.tolist()
    values = []
    for position, symbol in enumerate(plan_slice):
        total = 0
        for message, index in symbol.entries.items():
            if not 1 <= message <= store.K or not 1 <= index <= store.L:
                raise PlanMismatchError(
                    f"server {server} symbol {position}: ({message}, {index}) outside "
                    f"[1:{store.K}] x [1:{store.L}]"
                )
            total += rows[message - 1][index - 1]
        values.append(total % store.q)
    return Answer(server=server, q=store.q, values=values)


def decode(answers: Sequence[Answer], plan: QueryPlan, perms: np.ndarray) -> DecodeResult:
    """Recover every demand subpacket by following the plan's side-information links.

    Subpacket positions in the result are those of the store (the masked indices the
    servers were asked for); *perms* maps them back to canonical indices, recorded in
    ``exposed``.
    """
    if not answers:
        raise DecodingError("no answers to decode")
    q = answers[0].q
    values = {a.server: a.values for a in answers}
    L = plan.params.L
    inverse = {x: np.argsort(perms[x - 1]) + 1 for x in plan.demand}

    for n, symbols in enumerate(plan.servers, 1):
        if n not in values or len(values[n]) != len(symbols):
            raise DecodingError(f"answer from server {n} is missing or has the wrong length")

    recovered: dict[int, list[int | None]] = {x: [None] * L for x in plan.demand}
    exposed: dict[int, list[int]] = {x: [] for x in plan.demand}

    for n, symbols in enumerate(plan.servers, 1):
        for position, symbol in enumerate(symbols):
            demand = symbol.demand_entry
            if demand is None:
                continue
            value = FieldElement(values[n][position], q)
            if symbol.side_info is not None:
                link = symbol.side_info
                value = sub(value, FieldElement(values[link.server][link.symbol], q))
            elif symbol.k > 1:
                raise DecodingError(
                    f"server {n} symbol {position} on {symbol.support}: "
                    "missing side-information link"
                )
            index = symbol.entries[demand]
            if recovered[demand][index - 1] is not None:
                raise DecodingError(
                    f"server {n} symbol {position}: subpacket {index} of message {demand} "
                    "exposed twice"
                )
            recovered[demand][index - 1] = value.value
            exposed[demand].append(int(inverse[demand][index - 1]))

    for message, row in recovered.items():
        missing = [t for t, v in enumerate(row, 1) if v is None]
        if missing:
            raise DecodingError(f"message {message}: subpackets {missing} not recovered")
    logger.debug("decoded %d demand messages of %s", len(recovered), plan.params.label)
    return DecodeResult(q=q, recovered=recovered, exposed=exposed)


def coefficient_matrix(plan: QueryPlan) -> np.ndarray:
    """0/1 matrix with one row per requested symbol and one column per (message, subpacket)."""
    K, L = plan.params.K, plan.params.L
    symbols = [s for server in plan.servers for s in server]
    matrix = np.zeros((len(symbols), K * L), dtype=np.int64)
    for row, symbol in enumerate(symbols):
        for message, index in symbol.entries.items():
            matrix[row, (message - 1) * L + index - 1] = 1
    return matrix


def row_reduce(matrix: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_q and its pivot columns."""
    A = np.array(matrix, dtype=np.int64) % q
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nonzero = np.nonzero(A[r:, c])[0]
        if nonzero.size == 0:
            continue
        p = r + int(nonzero[0])
        if p != r:
            A[[r, p]] = A[[p, r]]
        A[r] = (A[r] * pow(int(A[r, c]), -1, q)) % q
        factors = A[:, c].copy()
        factors[r] = 0
        hit = np.nonzero(factors)[0]
        if hit.size:
            A[hit] = (A[hit] - np.outer(factors[hit], A[r])) % q
        pivots.append(c)
        r += 1
    return A[:r], pivots


def oracle_decodable(plan: QueryPlan, q: int) -> bool:
    """True iff every demand subpacket's unit vector lies in the row space over F_q.

    A unit vector e_c is in the row space exactly when c is a pivot column whose
    reduced row has no other non-zero entry.
    """
    rref, pivots = row_reduce(coefficient_matrix(plan), q)
    pivot_row = {c: r for r, c in enumerate(pivots)}
    L = plan.params.L
    for message in plan.demand:
        for index in range(1, L + 1):
            c = (message - 1) * L + index - 1
            r = pivot_row.get(c)
            if r is None or np.count_nonzero(rref[r]) != 1:
                logger.debug("oracle: subpacket %d of message %d not in row space", index, message)
                return False
    return True
