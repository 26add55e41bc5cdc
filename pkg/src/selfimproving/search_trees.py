"""Per-index search trees over leaf slabs, learned from empirical frequencies.

A tree has a learned top part of ternary nodes (left subslab, split leaf,
right subslab) where every internal child carries at most two thirds of its
parent's empirical mass, and below it balanced binary search over whatever
interval remains. Searches are driven one node at a time through a
:class:`SearchCursor` so the engines can interleave many of them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation, InvalidInputError
from .geometry import OpCounter
from .slabs import Slab, SlabStructure

BALANCED = -1


@dataclass(frozen=True)
class LearningConstants:
    """The constants behind the learning-phase sample sizes.

    ``c`` and ``delta`` set the frequency sample count and the node threshold,
    ``eps`` trades sample count (``n^eps``) against search depth.
    """

    c: float = 8.0
    delta: float = 0.5
    eps: float = 0.5

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise InvalidInputError("eps must lie in (0, 1]")
        if self.c <= 0 or self.delta <= 0:
            raise InvalidInputError("c and delta must be positive")

    def t_freq(self, n: int) -> int:
        """ceil(c delta^-2 n^eps log2 n) training instances for frequencies."""
        return max(1, math.ceil(self.c / self.delta**2 * n**self.eps * _log2(n)))

    def min_count(self, n: int) -> int:
        """ceil(c / (10 e delta^2) log2 n): below this a node is not refined."""
        return max(1, math.ceil(self.c / (10 * math.e * self.delta**2) * _log2(n)))

    def depth_cap(self, n: int) -> int:
        return max(1, math.ceil(self.eps * _log2(n)))


def _log2(n: int) -> float:
    return math.log2(n) if n > 1 else 1.0


class EmpiricalFrequencies:
    """Sparse per-index leaf counts with inclusive prefix sums.

    Row ``i`` stores the sorted distinct leaves hit by index ``i`` and the
    running total of hits up to and including each of them.
    """

    def __init__(self, offsets: np.ndarray, leaves: np.ndarray, cum: np.ndarray,
                 t: int, leaf_count: int):
        self.offsets = offsets
        self.leaves = leaves
        self.cum = cum
        self.t = int(t)
        self.leaf_count = int(leaf_count)

    @property
    def n(self) -> int:
        return len(self.offsets) - 1

    @classmethod
    def from_leaf_matrix(cls, leaves: np.ndarray, leaf_count: int) -> "EmpiricalFrequencies":
        """From a ``(t, n)`` array of leaf ids, one row per training instance."""
        m = np.asarray(leaves)
        if m.ndim != 2 or m.shape[0] < 1:
            raise InvalidInputError("leaf matrix must be (t, n) with t >= 1")
        t, n = m.shape
        a = np.sort(m, axis=0).T.copy()
        end = np.ones_like(a, dtype=bool)
        end[:, :-1] = a[:, 1:] != a[:, :-1]
        pos = np.flatnonzero(end.ravel())
        per_row = end.sum(axis=1)
        offsets = np.concatenate([[0], np.cumsum(per_row)]).astype(np.int64)
        return cls(offsets, a.ravel()[pos].astype(np.int64), (pos % t + 1).astype(np.int64),
                   t, leaf_count)

    @classmethod
    def from_counts(cls, counts) -> "EmpiricalFrequencies":
        """From a dense ``(n, m)`` count table with equal row sums."""
        c = np.asarray(counts, dtype=np.int64)
        if c.ndim != 2 or np.any(c < 0):
            raise InvalidInputError("counts must be a non-negative (n, m) table")
        totals = c.sum(axis=1)
        if len(totals) == 0 or np.any(totals != totals[0]) or totals[0] < 1:
            raise InvalidInputError("every row must sum to the same t >= 1")
        offsets, leaves, cum = [0], [], []
        for row in c:
            nz = np.flatnonzero(row)
            leaves.append(nz)
            cum.append(np.cumsum(row[nz]))
            offsets.append(offsets[-1] + len(nz))
        return cls(np.array(offsets, np.int64), np.concatenate(leaves).astype(np.int64),
                   np.concatenate(cum).astype(np.int64), int(totals[0]), c.shape[1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.leaves[a:b], self.cum[a:b]

    def dense_row(self, i: int) -> np.ndarray:
        leaves, cum = self.row(i)
        out = np.zeros(self.leaf_count, np.int64)
        out[leaves] = np.diff(np.concatenate([[0], cum]))
        return out

    def count(self, i: int, lo: int, hi: int) -> int:
        """N(i, [lo, hi])."""
        leaves, cum = self.row(i)
        return _cum_upto(leaves, cum, hi) - _cum_upto(leaves, cum, lo - 1)

    def estimate(self, i: int, lo: int, hi: int) -> float:
        """q-hat(i, [lo, hi]) = N(i, [lo, hi]) / t."""
        return self.count(i, lo, hi) / self.t


def _cum_upto(leaves: np.ndarray, cum: np.ndarray, leaf: int) -> int:
    k = int(np.searchsorted(leaves, leaf, side="right"))
    return int(cum[k - 1]) if k else 0


def collect_frequencies(d, s: SlabStructure, t: int, start: int = 0) -> EmpiricalFrequencies:
    """Locate every point of ``t`` fresh instances (counters ``start..``)."""
    if t < 1:
        raise InvalidInputError("t must be >= 1")
    dtype = np.int16 if s.leaf_count < 2**15 else np.int32
    mat = np.empty((t, d.n), dtype=dtype)
    for k in range(t):
        mat[k] = s.locate_many(d.sample(start + k)[:, 0])
    return EmpiricalFrequencies.from_leaf_matrix(mat, s.leaf_count)


def split_leaf_choice(freq: EmpiricalFrequencies, i: int, lo: int, hi: int) -> int:
    """Smallest leaf whose cumulative count within [lo, hi] exceeds a third.

    Everything strictly left of it then has at most a third of the mass and
    everything strictly right less than two thirds.
    """
    leaves, cum = freq.row(i)
    base = _cum_upto(leaves, cum, lo - 1)
    total = _cum_upto(leaves, cum, hi) - base
    if total <= 0:
        raise InvalidInputError(f"index {i} has no mass in [{lo}, {hi}]")
    # cum is integral, so "> base + total/3" means ">= floor(...) + 1"
    k = int(np.searchsorted(cum, base + total // 3, side="right"))
    return int(leaves[k])


class SearchTree:
    """Array-backed tree; node ``v`` covers ``[lo[v], hi[v]]`` and splits at
    ``split[v]``. A child entry of ``BALANCED`` means balanced search takes
    over on that (possibly empty) side."""

    def __init__(self, leaf_count: int, lo, hi, split, left, right, depth=None):
        self.leaf_count = int(leaf_count)
        self.lo = list(lo)
        self.hi = list(hi)
        self.split = list(split)
        self.left = list(left)
        self.right = list(right)
        self.depth = list(depth) if depth is not None else None

    @property
    def node_count(self) -> int:
        return len(self.lo)

    @property
    def root(self) -> int:
        return 0 if self.lo else BALANCED

    @classmethod
    def balanced(cls, leaf_count: int) -> "SearchTree":
        return cls(leaf_count, [], [], [], [], [], [])

    def partial_depth(self) -> int:
        return max(self.depth) if self.depth else -1

    def to_dict(self) -> dict:
        return {"leaf_count": self.leaf_count, "lo": self.lo, "hi": self.hi,
                "split": self.split, "left": self.left, "right": self.right}

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchTree":
        return cls(doc["leaf_count"], doc["lo"], doc["hi"], doc["split"],
                   doc["left"], doc["right"])

    def cursor(self) -> "SearchCursor":
        return SearchCursor(self)

    def full_depth(self) -> int:
        """Largest number of steps any full search can take."""
        def balanced_depth(size: int) -> int:
            return math.ceil(math.log2(size)) if size > 1 else 0

        if not self.lo:
            return balanced_depth(self.leaf_count)
        best = 0
        stack = [(0, 0)]
        while stack:
            v, d = stack.pop()
            lo, hi, lam = self.lo[v], self.hi[v], self.split[v]
            best = max(best, d + 1)
            for child, clo, chi in ((self.left[v], lo, lam - 1), (self.right[v], lam + 1, hi)):
                if clo > chi:
                    continue
                if child == BALANCED:
                    best = max(best, d + 1 + balanced_depth(chi - clo + 1))
                else:
                    stack.append((child, d + 1))
        return best


def build_tree(freq: EmpiricalFrequencies, i: int, min_count: int,
               depth_cap: int | None = None) -> SearchTree:
    """Learned tree for index ``i``.

    A slab is refined while it holds at least ``min_count`` training hits,
    spans two or more leaves and sits above ``depth_cap``.
    """
    m = freq.leaf_count
    lo_a: list[int] = []
    hi_a: list[int] = []
    split_a: list[int] = []
    left_a: list[int] = []
    right_a: list[int] = []
    depth_a: list[int] = []

    def learnable(lo: int, hi: int, depth: int) -> bool:
        if lo >= hi:
            return False
        if depth_cap is not None and depth >= depth_cap:
            return False
        return freq.count(i, lo, hi) >= min_count

    if not learnable(0, m - 1, 0):
        return SearchTree.balanced(m)
    stack = [(0, m - 1, 0, -1, 0)]
    while stack:
        lo, hi, depth, parent, side = stack.pop()
        v = len(lo_a)
        lam = split_leaf_choice(freq, i, lo, hi)
        lo_a.append(lo)
        hi_a.append(hi)
        split_a.append(lam)
        left_a.append(BALANCED)
        right_a.append(BALANCED)
        depth_a.append(depth)
        if parent >= 0:
            (left_a if side == 0 else right_a)[parent] = v
        if learnable(lam + 1, hi, depth + 1):
            stack.append((lam + 1, hi, depth + 1, v, 1))
        if learnable(lo, lam - 1, depth + 1):
            stack.append((lo, lam - 1, depth + 1, v, 0))
    return SearchTree(m, lo_a, hi_a, split_a, left_a, right_a, depth_a)


def build_all_trees(freq: EmpiricalFrequencies, min_count: int,
                    depth_cap: int | None = None) -> list[SearchTree]:
    return [build_tree(freq, i, min_count, depth_cap) for i in range(freq.n)]


class SearchCursor:
    """Position of one search: a tree node (or ``BALANCED``) and its interval."""

    __slots__ = ("tree", "node", "lo", "hi", "steps")

    def __init__(self, tree: SearchTree):
        self.tree = tree
        self.node = tree.root
        self.lo = 0
        self.hi = tree.leaf_count - 1
        self.steps = 0

    @property
    def slab(self) -> Slab:
        return Slab(self.lo, self.hi)

    @property
    def at_leaf(self) -> bool:
        return self.lo == self.hi

    def __repr__(self):
        return f"SearchCursor([{self.lo}, {self.hi}], node={self.node}, steps={self.steps})"


MOVED = "moved"
REACHED_LEAF = "leaf"


def advance(cursor: SearchCursor, x: float, s: SlabStructure,
            counter: OpCounter | None = None) -> tuple[str, int, int]:
    """Move the cursor one node toward the leaf slab of ``x``.

    Returns ``(REACHED_LEAF, leaf, leaf)`` once the interval is a single leaf,
    otherwise ``(MOVED, lo, hi)`` with the new interval. A cursor that already
    sits on a leaf does not move and costs nothing.
    """
    lo, hi = cursor.lo, cursor.hi
    if lo == hi:
        return REACHED_LEAF, lo, hi
    b = s._blist
    tree = cursor.tree
    v = cursor.node
    if v != BALANCED:
        lam = tree.split[v]
        if lam > lo and x < b[lam - 1]:
            cursor.node, cursor.hi = tree.left[v], lam - 1
            cmp = 1
        elif lam < hi and x >= b[lam]:
            cursor.node, cursor.lo = tree.right[v], lam + 1
            cmp = 2 if lam > lo else 1
        else:
            cursor.node, cursor.lo, cursor.hi = BALANCED, lam, lam
            cmp = (lam > lo) + (lam < hi)
    else:
        mid = (lo + hi) // 2
        if x < b[mid]:
            cursor.hi = mid
        else:
            cursor.lo = mid + 1
        cmp = 1
    if counter is not None:
        counter.coordinate += cmp
    cursor.steps += 1
    if cursor.lo == cursor.hi:
        return REACHED_LEAF, cursor.lo, cursor.hi
    return MOVED, cursor.lo, cursor.hi


def full_search(tree: SearchTree, x: float, s: SlabStructure) -> tuple[int, int]:
    """(leaf, steps) of an unrestricted search."""
    cur = SearchCursor(tree)
    while True:
        kind, lo, _ = advance(cur, x, s)
        if kind == REACHED_LEAF:
            return lo, cur.steps


def restricted_search(tree: SearchTree, x: float, target: Slab, s: SlabStructure) -> int:
    """Steps until the current interval first lies inside ``target``."""
    leaf = s.locate_leaf(x)
    if leaf not in target:
        raise ContractViolation(f"leaf {leaf} of x={x} lies outside {target}")
    cur = SearchCursor(tree)
    while not (target.lo <= cur.lo and cur.hi <= target.hi):
        advance(cur, x, s)
    return cur.steps


def check_tree_invariants(tree: SearchTree, freq: EmpiricalFrequencies | None = None,
                          i: int | None = None, mu: float = 2.0 / 3.0) -> list[str]:
    """Partition and mu-reducing violations (empty list when sound)."""
    problems = []
    if not tree.lo:
        return problems
    if (tree.lo[0], tree.hi[0]) != (0, tree.leaf_count - 1):
        problems.append("root does not cover every leaf")
    for v in range(tree.node_count):
        lo, hi, lam = tree.lo[v], tree.hi[v], tree.split[v]
        if not lo <= lam <= hi:
            problems.append(f"node {v}: split {lam} outside [{lo}, {hi}]")
            continue
        parent_mass = freq.count(i, lo, hi) if freq is not None else None
        for child, clo, chi in ((tree.left[v], lo, lam - 1), (tree.right[v], lam + 1, hi)):
            if child == BALANCED:
                continue
            if (tree.lo[child], tree.hi[child]) != (clo, chi):
                problems.append(f"node {v}: child {child} covers "
                                f"[{tree.lo[child]}, {tree.hi[child]}], expected [{clo}, {chi}]")
            if parent_mass is not None and freq.count(i, clo, chi) > mu * parent_mass + 1e-12:
                problems.append(f"node {v}: child {child} holds more than {mu:.3f} of the mass")
    return problems


def trees_to_json(trees: Sequence[SearchTree]) -> str:
    return json.dumps([t.to_dict() for t in trees], separators=(",", ":"))


def trees_from_json(text: str) -> list[SearchTree]:
    return [SearchTree.from_dict(doc) for doc in json.loads(text)]


def leaf_paths(tree: SearchTree, s: SlabStructure) -> tuple[np.ndarray, np.ndarray]:
    """Intervals visited by a full search for every leaf, padded with the leaf.

    Row ``j`` of both ``(m, depth + 1)`` arrays lists the interval bounds
    after 0, 1, 2, ... steps of a search for a point in leaf ``j``.
    """
    m = tree.leaf_count
    rows = []
    for j in range(m):
        x = s.left_edge(j) if j > 0 else (s.right_edge(0) - 1.0 if m > 1 else 0.0)
        cur = SearchCursor(tree)
        row = [(cur.lo, cur.hi)]
        while cur.lo != cur.hi:
            advance(cur, x, s)
            row.append((cur.lo, cur.hi))
        rows.append(row)
    width = max(len(r) for r in rows)
    lo = np.empty((m, width), np.int64)
    hi = np.empty((m, width), np.int64)
    for j, row in enumerate(rows):
        row = row + [row[-1]] * (width - len(row))
        lo[j] = [a for a, _ in row]
        hi[j] = [b for _, b in row]
    return lo, hi


def restricted_ratios(tree: SearchTree, q, s: SlabStructure, intervals: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Expected S-restricted search steps over ``1 - log2 xi(S)`` for random S.

    Each S has a log-uniform width and a uniform start; the restricted
    distribution keeps a uniform random fraction of ``q`` on S. Expectations
    are exact sums over the leaves of S.
    """
    q = np.asarray(q, float)
    m = tree.leaf_count
    lo_path, hi_path = leaf_paths(tree, s)
    out = np.empty(intervals)
    for t in range(intervals):
        width = int(min(m, max(1, round(2 ** rng.uniform(0, math.log2(m))))))
        a = int(rng.integers(0, m - width + 1))
        b = a + width - 1
        xi = rng.uniform(0, 1, width) * q[a : b + 1]
        total = xi.sum()
        if total <= 0:
            out[t] = 0.0
            continue
        inside = (lo_path[a : b + 1] >= a) & (hi_path[a : b + 1] <= b)
        steps = inside.argmax(axis=1)
        out[t] = float(np.dot(xi, steps) / total) / (1.0 - math.log2(total))
    return out
