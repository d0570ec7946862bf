"""Prime-field arithmetic and message storage.

The scheme only ever forms {0,1}-combinations of subpackets, so addition and
subtraction in F_q for a prime q is all the arithmetic it needs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sympy import isprime

from pcbr.errors import FieldMismatchError, ParameterError
from pcbr.models import MessageStore

logger = logging.getLogger(__name__)

SUPPORTED_MODULI: tuple[int, ...] = (2, 3, 5, 7, 11)


def require_prime(q: int) -> int:
    """Return *q* unchanged or raise if it is not a prime."""
    if not isinstance(q, int) or q < 2 or not isprime(q):
        raise ParameterError(f"q must be prime (got {q})")
    return q


def require_supported(q: int) -> int:
    """Return *q* if it is one of the moduli offered on the command line."""
    require_prime(q)
    if q not in SUPPORTED_MODULI:
        choices = ", ".join(str(m) for m in SUPPORTED_MODULI)
        raise ParameterError(f"q must be one of {choices} (got {q})")
    return q


@dataclass(frozen=True, slots=True)
class FieldElement:
    """An element of F_q stored as its least non-negative residue."""

    value: int
    modulus: int

    def __post_init__(self) -> None:
        require_prime(self.modulus)
        if not 0 <= self.value < self.modulus:
            raise ParameterError(f"value {self.value} outside [0, {self.modulus - 1}]")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return add(self, other)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        return sub(self, other)


def _same_field(a: FieldElement, b: FieldElement) -> int:
    if a.modulus != b.modulus:
        raise FieldMismatchError(f"cannot combine elements of F_{a.modulus} and F_{b.modulus}")
    return a.modulus


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    q = _same_field(a, b)
    return FieldElement((a.value + b.value) % q, q)


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    q = _same_field(a, b)
    return FieldElement((a.value - b.value) % q, q)


def generate_store(seed: int, q: int, K: int, L: int) -> MessageStore:
    """Draw K messages of L uniform F_q symbols.

    Uses numpy's PCG64 generator (``numpy.random.default_rng``) keyed by *seed*,
    so a fixed seed always yields the same store.
    """
    require_prime(q)
    if K < 1 or L < 1:
        raise ParameterError(f"K and L must be >= 1 (got K={K}, L={L})")
    rng = np.random.default_rng(seed)
    data = rng.integers(0, q, size=(K, L), dtype=np.int64)
    logger.debug("generated store seed=%d q=%d K=%d L=%d", seed, q, K, L)
    return MessageStore(q=q, K=K, L=L, data=data)
