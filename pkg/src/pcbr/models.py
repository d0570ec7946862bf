"""Pydantic v2 data models for pcbr."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_serializer,
    model_validator,
)

Regime = Literal["SMALL_D", "LARGE_D"]
OutputFormat = Literal["text", "json", "csv"]
Command = Literal["bounds", "plan", "run", "audit", "sweep"]
OUTPUT_FORMATS: tuple[str, ...] = ("text", "json", "csv")

Support = Tuple[int, ...]


# ── Parameters and exact numbers ─────────────────────────────────────────────

class Params(BaseModel):
    """Derived scheme parameters for N servers, K messages and demand size D."""

    model_config = ConfigDict(frozen=True)

    N: int
    K: int
    D: int
    f: int
    g: int
    M: int
    E: int
    L: int
    regime: Regime

    @model_validator(mode="after")
    def _consistent(self) -> "Params":
        if self.f != self.K // self.D or self.g != -(-self.K // self.D):
            raise ValueError("f and g must be floor(K/D) and ceil(K/D)")
        if self.M != self.K - self.D * (self.g - 1) or self.E != self.K - self.D + 1:
            raise ValueError("M and E disagree with K, D and g")
        if self.L != self.N**self.g:
            raise ValueError("L must equal N^g")
        if (self.regime == "LARGE_D") != (2 * self.D > self.K):
            raise ValueError("regime flag disagrees with 2D > K")
        return self

    @property
    def label(self) -> str:
        return f"({self.N},{self.K},{self.D})"


class Rational(BaseModel):
    """Exact rational on the wire: always in lowest terms with a positive denominator."""

    model_config = ConfigDict(frozen=True)

    num: int
    den: int

    @model_validator(mode="after")
    def _lowest_terms(self) -> "Rational":
        if self.den <= 0:
            raise ValueError("denominator must be positive")
        value = Fraction(self.num, self.den)
        if (value.numerator, value.denominator) != (self.num, self.den):
            raise ValueError(f"{self.num}/{self.den} is not in lowest terms")
        return self

    @classmethod
    def from_fraction(cls, value: Fraction) -> "Rational":
        return cls(num=value.numerator, den=value.denominator)

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"


class Permutation(BaseModel):
    """An ordering of the window indices [1:E]."""

    model_config = ConfigDict(frozen=True)

    ordering: Tuple[int, ...]

    @model_validator(mode="after")
    def _bijective(self) -> "Permutation":
        if sorted(self.ordering) != list(range(1, len(self.ordering) + 1)):
            raise ValueError(f"{self.ordering} is not a permutation of [1:{len(self.ordering)}]")
        return self


# ── Scheme structure ─────────────────────────────────────────────────────────

class Partition(BaseModel):
    """Alternating S1/S2 block layout of [1:K]."""

    model_config = ConfigDict(frozen=True)

    s1_blocks: Tuple[Tuple[int, ...], ...]
    s2_blocks: Tuple[Tuple[int, ...], ...] = ()

    @property
    def s1(self) -> frozenset[int]:
        return frozenset(i for block in self.s1_blocks for i in block)

    @property
    def s2(self) -> frozenset[int]:
        return frozenset(i for block in self.s2_blocks for i in block)


class SupportPlan(BaseModel):
    """Per-server multiplicity T_U of every support U with T_U > 0."""

    model_config = ConfigDict(frozen=True)

    counts: Dict[Support, int]

    def multiplicity(self, support: Support) -> int:
        return self.counts.get(tuple(support), 0)

    def supports(self) -> list[Support]:
        """Supports in construction order: by size, then lexicographically."""
        return sorted(self.counts, key=lambda u: (len(u), u))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


class SideInfo(BaseModel):
    """Reference to the symbol at position *symbol* (0-based) of server *server*."""

    model_config = ConfigDict(frozen=True)

    server: int
    symbol: int


class SymbolSpec(BaseModel):
    """One {0,1}-linear combination requested from one server."""

    model_config = ConfigDict(frozen=True)

    server: int
    support: Support
    entries: Dict[int, int]
    demand_entry: Optional[int] = None
    side_info: Optional[SideInfo] = None

    @model_validator(mode="after")
    def _well_formed(self) -> "SymbolSpec":
        if not self.support or list(self.support) != sorted(set(self.support)):
            raise ValueError(f"support {self.support} must be non-empty, sorted and distinct")
        if set(self.entries) != set(self.support):
            raise ValueError(f"entries {sorted(self.entries)} do not match support {self.support}")
        if self.demand_entry is not None and self.demand_entry not in self.support:
            raise ValueError(f"demand entry {self.demand_entry} outside support {self.support}")
        if self.side_info is not None:
            if self.demand_entry is None or len(self.support) < 2:
                raise ValueError("side information needs a demand entry and |support| >= 2")
            if self.side_info.server == self.server:
                raise ValueError("side information must come from another server")
        elif self.demand_entry is not None and len(self.support) >= 2:
            raise ValueError(
                f"demand entry on {self.support} needs side information to cancel interference"
            )
        return self

    @property
    def k(self) -> int:
        return len(self.support)


class QueryPlan(BaseModel):
    """Per-server symbol lists for one demand window, in transmission order."""

    model_config = ConfigDict(frozen=True)

    params: Params
    demand_index: int
    servers: Tuple[Tuple[SymbolSpec, ...], ...]
    common: Tuple[int, ...] = ()
    relabel: Dict[int, int] = Field(default_factory=dict)

    @property
    def demand(self) -> Support:
        return tuple(range(self.demand_index, self.demand_index + self.params.D))

    def phases(self) -> tuple[list[list[SymbolSpec]], list[list[SymbolSpec]]]:
        """Per-server symbols split into direct reads of the common messages and the rest."""
        common = set(self.common)
        first = [[s for s in server if set(s.support) <= common] for server in self.servers]
        rest = [[s for s in server if not set(s.support) <= common] for server in self.servers]
        return first, rest

    def symbol(self, server: int, position: int) -> SymbolSpec:
        return self.servers[server - 1][position]


class LargeDemandReduction(BaseModel):
    """Outcome of splitting a D > K/2 instance into its common part and reduced instance."""

    model_config = ConfigDict(frozen=True)

    common: Support
    reduced: Params
    relabel: Dict[int, int]
    reduced_demand_index: int


# ── Storage and protocol messages ────────────────────────────────────────────

class MessageStore(BaseModel):
    """K messages of L subpackets each over F_q (rows are messages, 0-based)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    q: int
    K: int
    L: int
    data: np.ndarray

    @model_validator(mode="after")
    def _shape(self) -> "MessageStore":
        from pcbr.field import require_prime

        require_prime(self.q)
        if self.data.shape != (self.K, self.L):
            raise ValueError(f"data has shape {self.data.shape}, expected ({self.K}, {self.L})")
        if self.data.size and (self.data.min() < 0 or self.data.max() >= self.q):
            raise ValueError(f"data must lie in [0, {self.q - 1}]")
        self.data.setflags(write=False)
        return self

    @field_serializer("data")
    def _dump_data(self, data: np.ndarray) -> list[list[int]]:
        return data.tolist()

    def row(self, message: int) -> list[int]:
        return self.data[message - 1].tolist()


class Answer(BaseModel):
    model_config = ConfigDict(frozen=True)

    server: int
    q: int
    values: List[int]

    @model_validator(mode="after")
    def _in_field(self) -> "Answer":
        if any(not 0 <= v < self.q for v in self.values):
            raise ValueError(f"answer values must lie in [0, {self.q - 1}]")
        return self


class DecodeResult(BaseModel):
    """Recovered demand rows keyed by message, plus the canonical index behind each step."""

    model_config = ConfigDict(frozen=True)

    q: int
    recovered: Dict[int, List[int]]
    exposed: Dict[int, List[int]]


# ── Reports ──────────────────────────────────────────────────────────────────

class BoundsReport(BaseModel):
    N: int
    K: int
    D: int
    f: int
    g: int
    M: int
    E: int
    rate: Rational
    L_lower: int
    L_upper: int
    tight: bool
    symbols_per_server: int


class RoundTripReport(BaseModel):
    params: Params
    demand_index: int
    q: int
    seed: int
    rate: Rational
    ok: bool
    oracle: bool


class AuditCheck(BaseModel):
    name: str
    params: str
    passed: bool
    evidence: str = ""


class AuditReport(BaseModel):
    checks: List[AuditCheck] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def overall(self) -> Literal["pass", "fail"]:
        return "pass" if all(c.passed for c in self.checks) else "fail"

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def add(self, name: str, params: str, passed: bool, evidence: str = "") -> None:
        self.checks.append(AuditCheck(name=name, params=params, passed=passed, evidence=evidence))

    def extend(self, other: "AuditReport") -> None:
        self.checks.extend(other.checks)

    def first_failure(self) -> Optional[AuditCheck]:
        return next((c for c in self.checks if not c.passed), None)


# ── CLI configuration ────────────────────────────────────────────────────────

class CliConfig(BaseModel):
    """Validated settings for the single-point commands."""

    command: Command
    N: int
    K: int
    D: int
    j: Optional[int] = None
    q: int = 2
    seed: int = 0
    fmt: OutputFormat = "text"
    output: Optional[Path] = None

    @model_validator(mode="after")
    def _valid(self) -> "CliConfig":
        from pcbr.field import require_supported
        from pcbr.params import derive_params

        params = derive_params(self.N, self.K, self.D)
        if self.j is not None and not 1 <= self.j <= params.E:
            windows = ", ".join(
                f"W{j}=[{j}:{j + self.D - 1}]" for j in range(1, params.E + 1)
            )
            raise ValueError(f"j must be in [1:{params.E}]; valid windows: {windows}")
        require_supported(self.q)
        return self
