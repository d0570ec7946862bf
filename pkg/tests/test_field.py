from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from pcbr.errors import FieldMismatchError, ParameterError
from pcbr.field import (
    SUPPORTED_MODULI,
    FieldElement,
    add,
    generate_store,
    require_prime,
    require_supported,
    sub,
)
from pcbr.models import MessageStore

moduli = st.sampled_from(SUPPORTED_MODULI)


def test_add_examples():
    assert add(FieldElement(1, 2), FieldElement(1, 2)).value == 0
    assert add(FieldElement(2, 5), FieldElement(4, 5)).value == 1


def test_sub_examples():
    assert sub(FieldElement(1, 2), FieldElement(1, 2)).value == 0
    assert sub(FieldElement(1, 5), FieldElement(3, 5)).value == 3


@given(q=moduli, data=st.data())
def test_zero_is_identity_and_self_cancels(q, data):
    x = FieldElement(data.draw(st.integers(0, q - 1)), q)
    zero = FieldElement(0, q)
    assert add(zero, x) == x
    assert sub(x, x) == zero
    assert x + zero - x == zero


@given(q=moduli, data=st.data())
def test_add_then_sub_recovers(q, data):
    a, b = (FieldElement(data.draw(st.integers(0, q - 1)), q) for _ in range(2))
    assert sub(add(a, b), b) == a
    assert add(a, b) == add(b, a)


def test_mismatched_moduli_rejected():
    with pytest.raises(FieldMismatchError):
        add(FieldElement(1, 2), FieldElement(1, 3))
    with pytest.raises(FieldMismatchError):
        sub(FieldElement(1, 5), FieldElement(1, 7))


def test_element_range_checked():
    with pytest.raises(ParameterError):
        FieldElement(5, 5)
    with pytest.raises(ParameterError, match="q must be prime"):
        FieldElement(1, 4)
    with pytest.raises(ParameterError, match="q must be prime"):
        add(FieldElement(1, 4), FieldElement(3, 4))


@pytest.mark.parametrize("q", [0, 1, 4, 6, 9])
def test_require_prime_rejects_composites(q):
    with pytest.raises(ParameterError, match="q must be prime"):
        require_prime(q)


def test_store_is_deterministic():
    a = generate_store(11, 3, 5, 8)
    b = generate_store(11, 3, 5, 8)
    assert np.array_equal(a.data, b.data)


def test_neighbouring_seeds_give_different_stores():
    differing = sum(
        not np.array_equal(generate_store(s, 2, 5, 8).data, generate_store(s + 1, 2, 5, 8).data)
        for s in range(100)
    )
    assert differing == 100


def test_store_dimensions():
    store = generate_store(0, 2, 5, 8)
    assert store.data.shape == (5, 8)
    assert store.data.size == 40
    assert set(np.unique(store.data)) <= {0, 1}


def test_store_is_read_only():
    store = generate_store(0, 5, 3, 4)
    with pytest.raises(ValueError):
        store.data[0, 0] = 1


def test_store_rejects_bad_modulus():
    with pytest.raises(ParameterError):
        generate_store(0, 4, 3, 4)


def test_store_model_requires_prime_modulus():
    with pytest.raises(ValidationError, match="q must be prime"):
        MessageStore(q=4, K=2, L=2, data=np.zeros((2, 2), dtype=np.int64))


def test_require_supported():
    assert [require_supported(q) for q in SUPPORTED_MODULI] == list(SUPPORTED_MODULI)
    with pytest.raises(ParameterError, match="q must be prime"):
        require_supported(9)
    with pytest.raises(ParameterError, match=r"q must be one of 2, 3, 5, 7, 11 \(got 13\)"):
        require_supported(13)
