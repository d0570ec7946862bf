"""Scheme parameters, the optimal rate and the subpacketization bounds.

Everything here is exact: rates are ``fractions.Fraction`` and every geometric
sum is an explicit integer sum.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from pcbr.errors import InvariantError, ParameterError
from pcbr.models import BoundsReport, Params, Permutation, Rational


def geometric(N: int, x: int) -> int:
    """1 + N + ... + N^(x-1), i.e. (N^x - 1)/(N - 1)."""
    return sum(N**e for e in range(x))


def derive_params(N: int, K: int, D: int, *, allow_unit_demand: bool = False) -> Params:
    """Validate (N, K, D) and derive f, g, M, E, L and the regime.

    *allow_unit_demand* admits D = 1, which only arises for the reduced instance
    of the D > K/2 scheme when K = D + 1.
    """
    if N < 2:
        raise ParameterError(f"N must be ≥ 2 (got {N})")
    min_d = 1 if allow_unit_demand else 2
    if D < min_d:
        raise ParameterError(f"D must be ≥ {min_d} (got {D})")
    if D > K - 1:
        raise ParameterError(f"D must be ≤ K−1 (got D={D}, K={K})")
    f = K // D
    g = -(-K // D)
    return Params(
        N=N,
        K=K,
        D=D,
        f=f,
        g=g,
        M=K - D * (g - 1),
        E=K - D + 1,
        L=N**g,
        regime="LARGE_D" if 2 * D > K else "SMALL_D",
    )


def rate_of(p: Params) -> Fraction:
    return Fraction(p.D * p.N**p.f, p.D * p.N * geometric(p.N, p.f) + p.K - p.D * p.f)


def optimal_rate(N: int, K: int, D: int) -> Fraction:
    """Maximum rate of any balanced {0,1}-linear scheme."""
    return rate_of(derive_params(N, K, D))


def subpack_lower(N: int, K: int, D: int) -> int:
    p = derive_params(N, K, D)
    upper = p.N**p.g
    return upper // gcd(upper, p.D * geometric(p.N, p.g) + p.K - p.D * p.g)


def subpack_upper(N: int, K: int, D: int) -> int:
    p = derive_params(N, K, D)
    return p.N**p.g


def coprimality_tightness(N: int, K: int, D: int) -> bool:
    """True when gcd(N, K - D(g-1)) = 1, in which case both bounds coincide."""
    p = derive_params(N, K, D)
    tight = gcd(p.N, p.M) == 1
    if tight and subpack_lower(N, K, D) != subpack_upper(N, K, D):
        raise InvariantError(f"{p.label}: coprime but L_* != L^*")
    return tight


def per_server_count(p: Params) -> int:
    """Symbols requested from each server by the scheme for *p*."""
    if p.regime == "LARGE_D":
        return (2 * p.D - p.K) * p.N + (p.K - p.D) * (p.N + 1)
    return p.M * geometric(p.N, p.g) + (p.D - p.M) * p.N * geometric(p.N, p.f)


def symbols_per_server(N: int, K: int, D: int) -> int:
    p = derive_params(N, K, D)
    count = per_server_count(p)
    if Fraction(p.D * p.L) / (p.N * rate_of(p)) != count:
        raise InvariantError(f"{p.label}: D·L/(N·R) != {count}")
    return count


def minimal_integral_subpacketization(N: int, K: int, D: int) -> int:
    """Smallest L for which D·L/(N·R) is an integer (scanned over [1:N^g])."""
    p = derive_params(N, K, D)
    rate = rate_of(p)
    for L in range(1, p.L + 1):
        if (Fraction(p.D * L) / (p.N * rate)).denominator == 1:
            return L
    raise InvariantError(f"{p.label}: no integral subpacketization up to N^g")


def converse_bound(N: int, K: int, D: int, pi: Permutation) -> Fraction:
    """Permutation-parameterized upper bound on the rate of any scheme."""
    p = derive_params(N, K, D)
    if len(pi.ordering) != p.E:
        raise ParameterError(f"permutation must order [1:{p.E}] (got {len(pi.ordering)} entries)")
    covered: set[int] = set()
    total = Fraction(0)
    for step, j in enumerate(pi.ordering):
        window = set(range(j, j + p.D))
        total += Fraction(len(window - covered), p.N**step)
        covered |= window
    return Fraction(p.D) / total


def canonical_permutation(N: int, K: int, D: int) -> Permutation:
    """Disjoint windows 1, D+1, ... first, then the tail window K-D+1, then the rest.

    When D divides K the first f windows already cover [1:K] and the tail rule is
    skipped.
    """
    p = derive_params(N, K, D)
    ordering = [(j - 1) * p.D + 1 for j in range(1, p.f + 1)]
    if p.K % p.D:
        ordering.append(p.K - p.D + 1)
    used = set(ordering)
    ordering += [j for j in range(1, p.E + 1) if j not in used]
    pi = Permutation(ordering=tuple(ordering))
    if converse_bound(N, K, D, pi) != rate_of(p):
        raise InvariantError(f"{p.label}: canonical permutation misses the optimal rate")
    return pi


def mpir_dk_subpacketization(N: int, K: int, D: int) -> Fraction:
    """Lower bound N^(K-D+1)/D on the subpacketization of the rate-optimal MPIR scheme.

    Quoted for D | K; display only.
    """
    derive_params(N, K, D)
    return Fraction(N ** (K - D + 1), D)


def bounds_report(N: int, K: int, D: int) -> BoundsReport:
    p = derive_params(N, K, D)
    return BoundsReport(
        N=p.N,
        K=p.K,
        D=p.D,
        f=p.f,
        g=p.g,
        M=p.M,
        E=p.E,
        rate=Rational.from_fraction(rate_of(p)),
        L_lower=subpack_lower(N, K, D),
        L_upper=subpack_upper(N, K, D),
        tight=coprimality_tightness(N, K, D),
        symbols_per_server=symbols_per_server(N, K, D),
    )
