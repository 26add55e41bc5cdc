"""Array-of-lists max-priority structure for small integer keys.

Keys live in ``1..U``. Each key owns a FIFO doubly linked list threaded
through a slot arena, and ``current_max`` only moves downward once the first
``find_max`` has been served, so the total scanning work over a run is at most
``U`` when every insertion happens up front.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation, InvalidHandleError, InvalidInputError

_NIL = -1


@dataclass
class HeapCounters:
    inserts: int = 0
    deletes: int = 0
    decrease_keys: int = 0
    find_maxes: int = 0
    scan_steps: int = 0
    late_inserts: int = 0

    @property
    def elementary_steps(self) -> int:
        # one list operation per insert/delete/find-max, two per decrease-key
        return (self.inserts + self.deletes + 2 * self.decrease_keys
                + self.find_maxes + self.scan_steps)


class BucketHeap:
    """Max-heap over integer keys in ``[1, universe]`` with stable handles.

    A handle is the slot number returned by :meth:`insert`; it stays valid
    until the element is deleted. In ``strict`` mode an insert that raises the
    maximum after a ``find_max`` has been served raises ``ContractViolation``;
    otherwise it is only counted in ``counters.late_inserts``.
    """

    def __init__(self, universe: int, capacity: int, strict: bool = False):
        if universe < 1:
            raise InvalidInputError("universe must be >= 1")
        if capacity < universe:
            raise InvalidInputError("universe may not exceed capacity")
        self.universe = universe
        self.capacity = capacity
        self.strict = strict
        self.current_max = 0
        self.counters = HeapCounters()
        self._head = [_NIL] * (universe + 1)
        self._tail = [_NIL] * (universe + 1)
        self._next: list[int] = []
        self._prev: list[int] = []
        self._key: list[int] = []
        self._index: list[int] = []
        self._free: list[int] = []
        self._slot_of: dict[int, int] = {}
        self._served = False

    def __len__(self) -> int:
        return len(self._slot_of)

    def __contains__(self, index: int) -> bool:
        return index in self._slot_of

    def handle_of(self, index: int) -> int:
        try:
            return self._slot_of[index]
        except KeyError:
            raise InvalidHandleError(index) from None

    def key_of(self, handle: int) -> int:
        self._check(handle)
        return self._key[handle]

    def index_of(self, handle: int) -> int:
        self._check(handle)
        return self._index[handle]

    def insert(self, key: int, index: int) -> int:
        if not 1 <= key <= self.universe:
            raise InvalidInputError(f"key {key} outside [1, {self.universe}]")
        if index in self._slot_of:
            raise InvalidInputError(f"index {index} already present")
        if self._served and key > self.current_max:
            if self.strict:
                raise ContractViolation("insert raises the maximum after find_max")
            self.counters.late_inserts += 1
        if self._free:
            slot = self._free.pop()
            self._key[slot] = key
            self._index[slot] = index
        else:
            slot = len(self._key)
            self._next.append(_NIL)
            self._prev.append(_NIL)
            self._key.append(key)
            self._index.append(index)
        self._slot_of[index] = slot
        self._link(slot, key)
        if key > self.current_max:
            self.current_max = key
        self.counters.inserts += 1
        return slot

    def find_max(self) -> tuple[int, int] | None:
        """(key, index) of the oldest element with the maximum key, or None."""
        self.counters.find_maxes += 1
        self._served = True
        if self.current_max == 0:
            return None
        slot = self._head[self.current_max]
        return self.current_max, self._index[slot]

    def delete(self, handle: int) -> None:
        self._check(handle)
        key = self._key[handle]
        self._unlink(handle, key)
        del self._slot_of[self._index[handle]]
        self._key[handle] = 0
        self._free.append(handle)
        self.counters.deletes += 1
        self._settle_max()

    def decrease_key(self, handle: int, new_key: int) -> int:
        self._check(handle)
        old = self._key[handle]
        if new_key > old:
            raise InvalidInputError(f"cannot increase key {old} to {new_key}")
        if new_key < 1:
            raise InvalidInputError("key must be >= 1")
        if new_key == old:
            return handle
        self._unlink(handle, old)
        self._key[handle] = new_key
        self._link(handle, new_key)
        self.counters.decrease_keys += 1
        self._settle_max()
        return handle

    def _check(self, handle: int) -> None:
        if not (0 <= handle < len(self._key)) or self._key[handle] == 0:
            raise InvalidHandleError(handle)

    def _link(self, slot: int, key: int) -> None:
        tail = self._tail[key]
        self._prev[slot] = tail
        self._next[slot] = _NIL
        if tail == _NIL:
            self._head[key] = slot
        else:
            self._next[tail] = slot
        self._tail[key] = slot

    def _unlink(self, slot: int, key: int) -> None:
        prv, nxt = self._prev[slot], self._next[slot]
        if prv == _NIL:
            self._head[key] = nxt
        else:
            self._next[prv] = nxt
        if nxt == _NIL:
            self._tail[key] = prv
        else:
            self._prev[nxt] = prv

    def _settle_max(self) -> None:
        m = self.current_max
        while m > 0 and self._head[m] == _NIL:
            m -= 1
            self.counters.scan_steps += 1
        self.current_max = m
