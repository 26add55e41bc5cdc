"""Bucket heap: examples, error contract and a shadow multiset model."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfimproving.bucket_heap import BucketHeap
from selfimproving.errors import ContractViolation, InvalidHandleError, InvalidInputError


def test_new_heap_is_empty():
    h = BucketHeap(5, 5)
    assert len(h) == 0
    assert h.find_max() is None


def test_smallest_universe():
    h = BucketHeap(1, 1)
    h.insert(1, 0)
    assert h.find_max() == (1, 0)


def test_bad_universe():
    with pytest.raises(InvalidInputError):
        BucketHeap(0, 4)
    with pytest.raises(InvalidInputError):
        BucketHeap(5, 4)


def test_find_max_example():
    h = BucketHeap(5, 5)
    h.insert(3, 0)
    h.insert(5, 1)
    assert h.find_max() == (5, 1)


def test_duplicate_keys_and_delete():
    h = BucketHeap(7, 7)
    h.insert(2, 0)
    h.insert(2, 1)
    top = h.insert(7, 2)
    assert h.find_max()[0] == 7
    h.delete(top)
    assert h.find_max()[0] == 2
    assert len(h) == 2


def test_decrease_key():
    h = BucketHeap(5, 5)
    a = h.insert(5, 0)
    h.insert(3, 1)
    h.decrease_key(a, 2)
    assert h.find_max() == (3, 1)
    assert h.key_of(a) == 2
    h.decrease_key(a, 2)  # equal key is a no-op
    assert h.key_of(a) == 2
    assert h.index_of(a) == 0
    assert h.handle_of(0) == a


def test_errors():
    h = BucketHeap(5, 5)
    with pytest.raises(InvalidInputError):
        h.insert(6, 0)
    with pytest.raises(InvalidInputError):
        h.insert(0, 0)
    a = h.insert(3, 0)
    with pytest.raises(InvalidInputError):
        h.insert(2, 0)
    with pytest.raises(InvalidInputError):
        h.decrease_key(a, 4)
    h.delete(a)
    with pytest.raises(InvalidHandleError):
        h.delete(a)
    with pytest.raises(InvalidHandleError):
        h.decrease_key(a, 1)
    with pytest.raises(InvalidHandleError):
        h.handle_of(0)


def test_late_insert_strict_and_lenient():
    h = BucketHeap(5, 5, strict=True)
    h.insert(2, 0)
    h.find_max()
    h.insert(1, 1)  # below the maximum is fine
    with pytest.raises(ContractViolation):
        h.insert(4, 2)
    lenient = BucketHeap(5, 5)
    lenient.insert(2, 0)
    lenient.find_max()
    lenient.insert(4, 1)
    assert lenient.counters.late_inserts == 1
    assert lenient.find_max() == (4, 1)


ops = st.lists(st.tuples(st.sampled_from(["ins", "del", "dec", "max"]),
                         st.integers(1, 12), st.integers(0, 30)), max_size=80)


@settings(max_examples=200, deadline=None)
@given(ops)
def test_shadow_multiset(seq):
    h = BucketHeap(12, 40)
    shadow = {}  # index -> key
    handles = {}
    for op, key, idx in seq:
        if op == "ins" and idx not in shadow:
            handles[idx] = h.insert(key, idx)
            shadow[idx] = key
        elif op == "del" and idx in shadow:
            h.delete(handles.pop(idx))
            del shadow[idx]
        elif op == "dec" and idx in shadow:
            k = min(key, shadow[idx])
            h.decrease_key(handles[idx], k)
            shadow[idx] = k
        elif op == "max":
            top = h.find_max()
            if not shadow:
                assert top is None
            else:
                assert top[0] == max(shadow.values())
                assert shadow[top[1]] == top[0]
        assert len(h) == len(shadow)
        assert all(i in h for i in shadow)


def test_scan_work_is_amortised():
    rng = np.random.default_rng(7)
    U, n = 1000, 20000
    h = BucketHeap(U, n)
    for i in range(n):
        h.insert(int(rng.integers(1, U + 1)), i)
    x = y = 0
    ops = n
    while ops < 100_000 and len(h):
        ops += 1
        key, i = h.find_max()
        slot = h.handle_of(i)
        if key > 1 and rng.random() < 0.7:
            h.decrease_key(slot, int(rng.integers(1, key)))
            x += 1
        else:
            h.delete(slot)
            y += 1
    c = h.counters
    assert c.scan_steps <= U
    assert c.late_inserts == 0
    assert c.elementary_steps <= 4 * (n + x + y + U)
