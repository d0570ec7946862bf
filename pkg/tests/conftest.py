"""Shared fixtures: the (2,5,2) instance used throughout the worked example."""

from __future__ import annotations

import pytest

from pcbr.params import derive_params
from pcbr.scheme import build_canonical_plan


@pytest.fixture
def p252():
    return derive_params(2, 5, 2)


@pytest.fixture
def plans252(p252):
    return {j: build_canonical_plan(p252, j) for j in range(1, p252.E + 1)}


@pytest.fixture
def p253():
    return derive_params(2, 5, 3)


GRID = [(N, K, D) for N in (2, 3) for K in range(3, 9) for D in range(2, K)]

# every point with N in [2:4], K in [3:9]
FULL_GRID = [(N, K, D) for N in (2, 3, 4) for K in range(3, 10) for D in range(2, K)]
