"""Limiting-phase maxima: interleaved restricted searches driven by a bucket heap.

Every point runs a search in its own tree over the leaf slabs. The heap key
of an active point is the right boundary of its current slab, so the
scheduler always advances the search that is furthest right. The slab
``lam_hat`` is the rightmost one not yet flushed; points that reach it wait
in a bucket ``B`` until every remaining active point is strictly left of it,
at which point ``B`` is swept against the leftmost maximum found so far
(``p_hat``). Any point dominated by ``p_hat`` is dropped as soon as it is
scheduled.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
import numpy as np

from .bucket_heap import BucketHeap
from .certificates import MaximaCertificate, SLabel
from .errors import ContractViolation, InvalidInputError
from .geometry import OpCounter, _counting_sort, as_xy, maxima_sweep_xy
from .search_trees import (REACHED_LEAF, LearningConstants, SearchCursor, SearchTree, advance,
                           build_all_trees, collect_frequencies)
from .slabs import SlabStructure, build_slab_structure, default_slab_samples

# Above this many frequency instances the learning phase gets slow for little gain.
DEFAULT_FREQ_CAP = 2000


@dataclass
class RunMetrics:
    rounds: int = 0
    comparisons: int = 0
    heap_ops: int = 0
    heap_steps: int = 0
    update_cost: int = 0
    per_point_steps: dict = field(default_factory=dict)
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {"rounds": self.rounds, "comparisons": self.comparisons,
               "heap_ops": self.heap_ops, "heap_steps": self.heap_steps,
               "update_cost": self.update_cost,
               "per_point_steps": {str(k): v for k, v in sorted(self.per_point_steps.items())},
               "wall_time": self.wall_time}
        doc.update(self.extra)
        return doc


@dataclass
class MaximaStructures:
    slabs: SlabStructure
    trees: list[SearchTree]

    @property
    def n(self) -> int:
        return len(self.trees)


def learn_maxima_structures(d, constants: LearningConstants | None = None,
                            slab_samples: int | None = None, freq_samples: int | None = None,
                            freq_cap: int | None = DEFAULT_FREQ_CAP, start: int = 0,
                            depth_cap: bool = True) -> MaximaStructures:
    """Learning phase: slab structure from a few instances, then one tree per index.

    Instances are drawn with counters ``start, start + 1, ...``; the slab
    instances come first and the frequency instances follow.
    """
    constants = constants or LearningConstants()
    n = d.n
    t1 = slab_samples or default_slab_samples(n)
    s = build_slab_structure(d.sample_many(start, t1))
    t2 = freq_samples or constants.t_freq(n)
    if freq_cap is not None:
        t2 = min(t2, freq_cap)
    freq = collect_frequencies(d, s, t2, start + t1)
    cap = constants.depth_cap(n) if depth_cap else None
    trees = build_all_trees(freq, constants.min_count(n), cap)
    return MaximaStructures(s, trees)


class MaximaRun:
    """State of one limiting-phase run; :meth:`search_step` is one round."""

    def __init__(self, points, structures: MaximaStructures, debug: bool = False,
                 counter: OpCounter | None = None):
        self.xs, self.ys = as_xy(points)
        n = len(self.xs)
        if n != structures.n:
            raise InvalidInputError(f"instance has {n} points, structures expect {structures.n}")
        if n == 0:
            raise InvalidInputError("empty input")
        self.s = structures.slabs
        self.m = self.s.leaf_count
        self.counter = counter if counter is not None else OpCounter()
        self.heap = BucketHeap(self.m, max(n, self.m))
        self.cursors = [SearchCursor(t) for t in structures.trees]
        for i in range(n):
            self.heap.insert(self.m, i)
        self.lam_key = self.m  # right-boundary key of lam_hat
        self.bucket: list[int] = []
        self.maxima_rtl: list[int] = []
        self.p_hat = -1
        self.witnesses: dict[int, int] = {}
        self.labels: dict[int, SLabel] = {}
        self.rounds = 0
        self.update_cost = 0
        self.debug = debug
        self.transcript: list[tuple] = []
        self._oracle = maxima_sweep_xy(self.xs, self.ys) if debug else None
        self._leaf = self.s.locate_many(np.asarray(self.xs)) if debug else None

    def search_step(self) -> None:
        top = self.heap.find_max()
        if top is None:
            raise ContractViolation("search_step on an empty heap")
        key, i = top
        if key < self.lam_key:
            self.update_step(key)
        self.rounds += 1
        c = self.counter
        cur = self.cursors[i]
        xs, ys = self.xs, self.ys
        h = self.heap.handle_of(i)
        if self.p_hat >= 0:
            c.dominance += 1
            j = self.p_hat
            if xs[j] >= xs[i] and ys[j] >= ys[i] and (xs[j], ys[j], j) > (xs[i], ys[i], i):
                self.heap.delete(h)
                self.witnesses[i] = j
                # p_i sits left of its slab's right boundary, p_hat right of lam_hat
                self.labels[i] = SLabel("boundary", cur.hi)
                self._log(i, "dominated")
                return
        old_hi = cur.hi
        kind, lo, hi = advance(cur, xs[i], self.s, c)
        if hi < old_hi:
            self.heap.decrease_key(h, hi + 1)
        if kind == REACHED_LEAF and lo == self.lam_key - 1:
            self.heap.delete(h)
            self.bucket.append(i)
            self._log(i, "bucket")
        else:
            self._log(i, "advanced")

    def update_step(self, new_key: int) -> None:
        """Sweep the bucket of lam_hat, then move lam_hat to the leaf ending at ``new_key``."""
        c = self.counter
        xs, ys = self.xs, self.ys
        leaf = self.lam_key - 1
        if self.bucket:
            before = c.total
            order = _counting_sort(self.bucket, xs, ys, c, reverse=True)
            top = ys[self.p_hat] if self.p_hat >= 0 else None
            for i in order:
                c.dominance += 1
                if top is None or ys[i] > top:
                    self.maxima_rtl.append(i)
                    self.p_hat = i
                    top = ys[i]
                else:
                    self.witnesses[i] = self.p_hat
                self.labels[i] = SLabel("leaf", leaf)
            self.update_cost += c.total - before
            self.bucket = []
        self.lam_key = new_key
        if self.debug:
            self._check_order_invariant()

    def run(self) -> tuple[MaximaCertificate, RunMetrics]:
        t0 = time.perf_counter()
        while len(self.heap):
            self.search_step()
        self.update_step(0)
        cert = MaximaCertificate(self.maxima_rtl[::-1], self.witnesses)
        hc = self.heap.counters
        metrics = RunMetrics(
            rounds=self.rounds,
            comparisons=self.counter.total,
            heap_ops=hc.inserts + hc.deletes + hc.decrease_keys + hc.find_maxes,
            heap_steps=hc.elementary_steps,
            update_cost=self.update_cost,
            per_point_steps=dict(Counter(cur.steps for cur in self.cursors)),
            wall_time=time.perf_counter() - t0,
        )
        return cert, metrics

    def _log(self, i: int, what: str) -> None:
        if self.debug:
            cur = self.cursors[i]
            self.transcript.append((self.rounds, i, cur.lo, cur.hi, what))
            self._check_order_invariant()

    def _check_order_invariant(self) -> None:
        """All maxima strictly right of lam_hat are found, right to left."""
        leaf = self.lam_key - 1
        want = [i for i in self._oracle.maximal_indices if self._leaf[i] > leaf]
        if self.maxima_rtl != want[::-1]:
            raise ContractViolation(f"order invariant broken at round {self.rounds}: "
                                    f"found {self.maxima_rtl[::-1]}, expected {want}")


def run_maxima(points, structures: MaximaStructures, debug: bool = False,
               counter: OpCounter | None = None) -> tuple[MaximaCertificate, RunMetrics]:
    return MaximaRun(points, structures, debug, counter).run()


def run_maxima_labeled(points, structures: MaximaStructures, debug: bool = False):
    """Like :func:`run_maxima` but also returns the per-point slab labels."""
    run = MaximaRun(points, structures, debug)
    cert, metrics = run.run()
    return cert, metrics, run.labels
