"""LangGraph pipeline for one private retrieval round.

plan → mask → store → answer → decode → certify

Each node records a failure in ``error`` (with the failing ``stage``) and the
graph stops there; ``run_round_trip`` turns that into a PipelineError.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, List, Optional

import numpy as np
from langgraph.graph import END, StateGraph
from pydantic import BaseModel, ConfigDict, Field

from pcbr.errors import InvariantError, PipelineError
from pcbr.field import generate_store
from pcbr.models import (
    Answer,
    DecodeResult,
    MessageStore,
    QueryPlan,
    Rational,
    RoundTripReport,
)
from pcbr.params import derive_params, rate_of
from pcbr.protocol import answer_query, decode, oracle_decodable
from pcbr.scheme import build_canonical_plan, mask_plan

STAGES = ("plan", "mask", "store", "answer", "decode", "certify")


class RoundTripState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    N: int
    K: int
    D: int
    j: int
    q: int
    seed: int
    plan: Optional[QueryPlan] = None
    masked: Optional[QueryPlan] = None
    perms: Optional[np.ndarray] = None
    store: Optional[MessageStore] = None
    answers: List[Answer] = Field(default_factory=list)
    decoded: Optional[DecodeResult] = None
    ok: Optional[bool] = None
    oracle: Optional[bool] = None
    stage: Optional[str] = None
    error: Optional[str] = None


def _seeds(seed: int) -> tuple[int, int]:
    """Independent (mask, store) seeds derived from one user seed."""
    mask_seed, store_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(mask_seed), int(store_seed)


# ── Nodes ────────────────────────────────────────────────────────────────────

def _plan(state: RoundTripState) -> dict:
    params = derive_params(state.N, state.K, state.D)
    return {"plan": build_canonical_plan(params, state.j, state.q)}


def _mask(state: RoundTripState) -> dict:
    masked, perms = mask_plan(state.plan, _seeds(state.seed)[0])
    return {"masked": masked, "perms": perms}


def _store(state: RoundTripState) -> dict:
    p = state.plan.params
    return {"store": generate_store(_seeds(state.seed)[1], state.q, p.K, p.L)}


def _answer(state: RoundTripState) -> dict:
    return {"answers": [answer_query(state.store, s) for s in state.masked.servers]}


def _decode(state: RoundTripState) -> dict:
    return {"decoded": decode(state.answers, state.masked, state.perms)}


def _certify(state: RoundTripState) -> dict:
    matches = all(
        state.decoded.recovered[x] == state.store.row(x) for x in state.masked.demand
    )
    return {"ok": matches, "oracle": oracle_decodable(state.masked, state.q)}


_NODES: dict[str, Callable[[RoundTripState], dict]] = {
    "plan": _plan,
    "mask": _mask,
    "store": _store,
    "answer": _answer,
    "decode": _decode,
    "certify": _certify,
}


def _guarded(stage: str, fn: Callable[[RoundTripState], dict]):
    def node(state: RoundTripState) -> dict:
        try:
            return fn(state)
        except Exception as exc:
            return {"stage": stage, "error": str(exc)}
    return node


def _route(next_stage: str):
    def route(state: RoundTripState) -> str:
        return END if state.error else next_stage
    return route


@lru_cache(maxsize=1)
def build_round_trip_graph():
    """Build and compile the round-trip graph (compiled once per process)."""
    graph = StateGraph(RoundTripState)
    for stage in STAGES:
        graph.add_node(stage, _guarded(stage, _NODES[stage]))
    graph.set_entry_point(STAGES[0])
    for stage, next_stage in zip(STAGES, STAGES[1:]):
        graph.add_conditional_edges(stage, _route(next_stage), {next_stage: next_stage, END: END})
    graph.add_edge(STAGES[-1], END)
    return graph.compile()


def _get(result: Any, key: str) -> Any:
    if isinstance(result, dict):
        return result.get(key)
    return getattr(result, key, None)


def run_round_trip(N: int, K: int, D: int, j: int, q: int, seed: int) -> RoundTripReport:
    """Plan, mask, answer, decode and certify one retrieval; the rate must be optimal."""
    compiled = build_round_trip_graph()
    result = compiled.invoke(RoundTripState(N=N, K=K, D=D, j=j, q=q, seed=seed))

    error = _get(result, "error")
    if error:
        raise PipelineError(_get(result, "stage") or "unknown", error)

    masked: QueryPlan = _get(result, "masked")
    p = masked.params
    rate = Fraction(p.D * p.L, p.N * len(masked.servers[0]))
    if rate != rate_of(p):
        raise InvariantError(f"{p.label}: achieved rate {rate} != optimal {rate_of(p)}")

    oracle = bool(_get(result, "oracle"))
    return RoundTripReport(
        params=p,
        demand_index=j,
        q=q,
        seed=seed,
        rate=Rational.from_fraction(rate),
        ok=bool(_get(result, "ok")) and oracle,
        oracle=oracle,
    )
