"""Limiting-phase upper hull: locate every point against the canonical hull C,
then assemble the hull from the V-extremal points outward.

Location runs one search per point over the C-leaf slabs, always advancing the
point whose current C-slab is widest. A point stops as soon as its slab proves
it lies below C, shows it outside C, or puts it inside the pencil of an
outside point already seen. Construction assigns every remaining point to the
gap between two consecutive V-extremal points using the hints gathered during
location, and only the points above a gap's segment reach an output-sensitive
hull computation.

Every shortcut is validated with exact predicates, and the assembled result is
checked before it is returned. When a precondition or a check fails the run
falls back to the monotone chain, so the certificate is always correct.
"""

from __future__ import annotations

import bisect
import math
import time
from collections import Counter
from dataclasses import dataclass, field

from .bucket_heap import BucketHeap
from .certificates import (BELOW_SEG, LEAF_SLAB, PENCIL_SLAB, CCertificate, CLabel,
                           HullCertificate, direction_argmax)
from .errors import ContractViolation, DegenerateInputError, InvalidInputError
from .geometry import (OpCounter, as_xy, orient, output_sensitive_indices, slope_side,
                       strictly_below, upper_hull_indices, witnesses_from_hull)
from .hull_learning import CanonicalHull, HullParams, Pencil, learn_canonical_hull
from .maxima import DEFAULT_FREQ_CAP, RunMetrics
from .search_trees import (LearningConstants, SearchCursor, SearchTree, advance, build_all_trees,
                           collect_frequencies)

OUTSIDE = "outside"
BELOW = "below_seg"
IN_PENCIL = "in_pencil"
LEAF = "leaf"


@dataclass(frozen=True)
class Location:
    """How location stopped for one point; ``owner`` is set for IN_PENCIL."""

    kind: str
    lo: int
    hi: int
    owner: int = -1


@dataclass
class HullStructures:
    hull: CanonicalHull | None
    trees: list[SearchTree]
    n: int

    @property
    def usable(self) -> bool:
        return self.hull is not None


def learn_hull_structures(d, params: HullParams | None = None,
                          constants: LearningConstants | None = None,
                          freq_samples: int | None = None,
                          freq_cap: int | None = DEFAULT_FREQ_CAP, start: int = 0,
                          depth_cap: bool = True) -> HullStructures:
    """Canonical hull from instance ``start``, then trees over its leaf slabs.

    A degenerate learning sample leaves ``hull`` unset; runs then use the
    fallback.
    """
    params = params or HullParams()
    constants = constants or LearningConstants()
    n = d.n
    try:
        ch = learn_canonical_hull(d.sample(start), params)
    except DegenerateInputError:
        return HullStructures(None, [], n)
    t = freq_samples or constants.t_freq(n)
    if freq_cap is not None:
        t = min(t, freq_cap)
    freq = collect_frequencies(d, ch.slabs, t, start + 1)
    cap = constants.depth_cap(n) if depth_cap else None
    return HullStructures(ch, build_all_trees(freq, constants.min_count(n), cap), n)


# ---------------------------------------------------------------------------
# Location
# ---------------------------------------------------------------------------


@dataclass
class LocationResult:
    outcomes: list[Location]
    candidates: list[int]
    pencils: dict[int, Pencil]
    rounds: int
    cases: Counter
    transcript: list[tuple] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def outside_count(self) -> int:
        return len(self.pencils)


class LocationRun:
    """One run of the location algorithm; :meth:`step` is one round."""

    def __init__(self, points, structures: HullStructures, debug: bool = False,
                 counter: OpCounter | None = None):
        self.xs, self.ys = as_xy(points)
        n = len(self.xs)
        if n == 0:
            raise InvalidInputError("empty input")
        if n != structures.n or len(structures.trees) != n:
            raise InvalidInputError(f"instance has {n} points, structures expect {structures.n}")
        if structures.hull is None:
            raise ContractViolation("location needs a canonical hull")
        ch = self.ch = structures.hull
        self.E = E = ch.edge_count
        self.counter = counter if counter is not None else OpCounter()
        self.heap = BucketHeap(E, max(n, E))
        self.cursors = [SearchCursor(t) for t in structures.trees]
        for c in self.cursors:
            if c.tree.leaf_count != E:
                raise InvalidInputError("trees do not match the canonical hull")
        for i in range(n):
            self.heap.insert(E, i)
        self.outcomes: list[Location | None] = [None] * n
        self.candidates = [-1] * ch.k
        self.pencils: dict[int, Pencil] = {}
        self.left_holder = [-1] * E   # p_s1: pencil over edge s reaching furthest left
        self.right_holder = [-1] * E  # p_s2: pencil over edge s reaching furthest right
        self.rounds = 0
        self.cases: Counter = Counter()
        self.debug = debug
        self.transcript: list[tuple] = []
        self.violations: list[str] = []
        if debug:
            self._debug_setup()

    # -- predicates ---------------------------------------------------------

    def _above_edge(self, e: int, i: int) -> bool:
        self.counter.side += 1
        return self.ch.above_edge(e, self.xs[i], self.ys[i])

    def _deactivate(self, i: int, loc: Location, case: str) -> None:
        self.heap.delete(self.heap.handle_of(i))
        self.outcomes[i] = loc
        self.cases[case] += 1

    def step(self) -> None:
        top = self.heap.find_max()
        if top is None:
            raise ContractViolation("step on an empty heap")
        _, i = top
        self.rounds += 1
        ch, c = self.ch, self.counter
        x, y = self.xs[i], self.ys[i]
        cur = self.cursors[i]
        before = cur.hi - cur.lo + 1
        advance(cur, x, ch.slabs, c)
        lo, hi = cur.lo, cur.hi
        if hi - lo + 1 < before:
            self.heap.decrease_key(self.heap.handle_of(i), hi - lo + 1)
        what = self._classify(i, x, y, lo, hi)
        if self.debug:
            self.transcript.append((self.rounds, i, lo, hi, what))
            self._debug_round(i, lo, hi, what)

    def _classify(self, i: int, x: float, y: float, lo: int, hi: int) -> str:
        ch, c = self.ch, self.counter
        # Case 1: below seg(C, C_i), hence inside C
        if ch.seg_defined(lo, hi):
            c.orientation += 1
            if ch.below_seg(lo, hi, x, y):
                self._deactivate(i, Location(BELOW, lo, hi), "case1")
                return "case1"
        # Case 2: above the line of the first or last edge of C_i
        if self._above_edge(lo, i):
            self._outside(i, lo)
            self.cases["case2"] += 1
            return "case2"
        if hi != lo and self._above_edge(hi, i):
            self._outside(i, hi)
            self.cases["case2"] += 1
            return "case2"
        # Case 3: test the stored pencils reaching into C_i from both ends
        for owner, right_end in ((self.right_holder[lo], True), (self.left_holder[hi], False)):
            if owner < 0:
                continue
            pen = self.pencils[owner]
            c.coordinate += 1
            if right_end:
                comparable = pen.hi >= hi or x < ch.vx[pen.hi]
            else:
                comparable = pen.lo <= lo or x >= ch.vx[pen.lo - 1]
            if not comparable:
                continue
            if pen.below_chain(x, y, c):
                self._deactivate(i, Location(IN_PENCIL, lo, hi, owner), "case3_pencil")
                return "case3_pencil"
            # on or above the tangent chain: outside C unless it touches C
            if self._outside(i, None):
                self.cases["case3_outside"] += 1
                return "case3_outside"
            break
        if lo == hi:
            self._deactivate(i, Location(LEAF, lo, hi), "leaf")
            return "leaf"
        return "active"

    def _outside(self, i: int, start: int | None) -> bool:
        """Register ``i`` as outside C; False if it turns out not to be."""
        ch, c = self.ch, self.counter
        x, y = self.xs[i], self.ys[i]
        rng = ch.visible_edges(x, y, start, c)
        if rng is None:
            return False
        e_lo, e_hi = rng
        pen = ch.pencil_from_range(x, y, i, e_lo, e_hi)
        self.pencils[i] = pen
        key = (x, y, i)
        xs, ys = self.xs, self.ys
        for v in ch.directions_of_edges(e_lo, e_hi):
            j = self.candidates[v]
            if j < 0:
                self.candidates[v] = i
                continue
            c.side += 1
            s = slope_side(xs[j], ys[j], ch.slopes[v], x, y)
            if s > 0 or (s == 0 and key < (xs[j], ys[j], j)):
                self.candidates[v] = i
        for e in range(e_lo, e_hi + 1):
            c.coordinate += 2
            j = self.left_holder[e]
            if j < 0 or e_lo < self.pencils[j].lo or (
                    e_lo == self.pencils[j].lo and key < (xs[j], ys[j], j)):
                self.left_holder[e] = i
            j = self.right_holder[e]
            if j < 0 or e_hi > self.pencils[j].hi or (
                    e_hi == self.pencils[j].hi and key < (xs[j], ys[j], j)):
                self.right_holder[e] = i
        self.heap.delete(self.heap.handle_of(i))
        self.outcomes[i] = Location(OUTSIDE, e_lo, e_hi)
        return True

    def run(self) -> LocationResult:
        while len(self.heap):
            self.step()
        if self.debug:
            self._debug_final()
        return LocationResult(self.outcomes, self.candidates, self.pencils, self.rounds,
                              self.cases, self.transcript, self.violations)

    # -- debug assertions ---------------------------------------------------

    def _debug_setup(self) -> None:
        ch, xs, ys = self.ch, self.xs, self.ys
        n = len(xs)
        self._oracle = [direction_argmax(xs, ys, m) for m in ch.slopes]
        self._vset = set(self._oracle)
        self._populated = all(
            any(ch.above_direction(v, xs[p], ys[p]) for p in range(n)) for v in range(ch.k))
        self._true_pencil = {}
        for p in range(n):
            rng = ch.visible_edges_scan(xs[p], ys[p])
            if rng is not None:
                self._true_pencil[p] = ch.pencil_from_range(xs[p], ys[p], p, *rng)
        self._all_v_outside = all(v in self._true_pencil for v in self._vset)
        self._leaf = [ch.leaf_of(x) for x in xs]
        # smallest pencil of a V-extremal point holding p
        self._inside_v = {}
        for p in range(n):
            if p in self._vset:
                continue
            for v in self._vset:
                pen = self._true_pencil.get(v)
                if pen is not None and pen.contains(xs[p], ys[p], self._leaf[p]):
                    size = self._inside_v.get(p, (None, math.inf))[1]
                    if pen.size < size:
                        self._inside_v[p] = (v, pen.size)
        self._armed: set[int] = set()

    def _debug_round(self, i: int, lo: int, hi: int, what: str) -> None:
        size = hi - lo + 1
        active = what == "active"
        # a V-extremal point outside C stops once its slab fits its pencil
        if i in self._vset and i in self._true_pencil:
            if active and size <= self._true_pencil[i].size:
                self.violations.append(f"early-stop: V-extremal {i} still active at round {self.rounds}")
        # a point inside pen(e_v) stops the next time it is processed
        if i in self._inside_v and self._all_v_outside:
            if i in self._armed and active:
                self.violations.append(f"pencil-stop: {i} still active at round {self.rounds}")
            if active and size <= self._inside_v[i][1]:
                self._armed.add(i)
        # no V-extremal point lands in another point's pencil
        if what == "case3_pencil" and self._all_v_outside and i in self._vset:
            self.violations.append(f"v-in-pencil: V-extremal {i} found inside a pencil")

    def _debug_final(self) -> None:
        if not self._populated:
            return
        for v, (got, want) in enumerate(zip(self.candidates, self._oracle)):
            if got != want:
                self.violations.append(f"candidate: direction {v} candidate {got} != argmax {want}")
        xs, ys = self.xs, self.ys
        order = sorted(self._vset, key=lambda j: (xs[j], ys[j], j))
        for a, b in zip(order, order[1:]):
            pa, pb = self._true_pencil.get(a), self._true_pencil.get(b)
            if pa is None or pb is None:
                self.violations.append(f"overlap: V-extremal {a} or {b} inside C")
            elif pb.lo > pa.hi + 1:
                self.violations.append(f"overlap: pencils of {a} and {b} leave a gap")


def locate_points(points, structures: HullStructures, debug: bool = False,
                  counter: OpCounter | None = None) -> LocationResult:
    return LocationRun(points, structures, debug, counter).run()


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


class Fallback(Exception):
    """Raised inside construction when a precondition or check fails."""


def fallback_hull(points, counter: OpCounter | None = None) -> HullCertificate:
    """Monotone chain plus the hull edge above every other point."""
    xs, ys = as_xy(points)
    if not xs:
        raise InvalidInputError("empty input")
    hull = upper_hull_indices(xs, ys, counter=counter)
    return HullCertificate(hull, witnesses_from_hull(xs, ys, hull, counter=counter), True)


@dataclass
class ConstructionReport:
    step7_cost: float = 0.0
    step7_points: int = 0
    hinted: int = 0
    rehinted: int = 0
    middle_edge: int = 0
    fallback_reason: str | None = None


def construct_hull(points, loc: LocationResult, ch: CanonicalHull,
                   counter: OpCounter | None = None, outside_limit: int | None = None
                   ) -> tuple[HullCertificate, ConstructionReport]:
    xs, ys = as_xy(points)
    counter = counter if counter is not None else OpCounter()
    report = ConstructionReport()
    try:
        cert = _construct(xs, ys, loc, ch, counter, outside_limit, report)
    except Fallback as exc:
        report.fallback_reason = str(exc)
        cert = fallback_hull(points, counter)
    return cert, report


def _construct(xs, ys, loc: LocationResult, ch: CanonicalHull, c: OpCounter,
               outside_limit: int | None, report: ConstructionReport) -> HullCertificate:
    n = len(xs)
    if outside_limit is not None and loc.outside_count > outside_limit:
        raise Fallback(f"{loc.outside_count} points outside C")
    for v, j in enumerate(loc.candidates):
        if j < 0 or not ch.above_direction(v, xs[j], ys[j]):
            raise Fallback(f"no candidate above line {v}")
    # Step 1: the V-extremal points must already be in convex position
    V = sorted(set(loc.candidates), key=lambda j: (xs[j], ys[j], j))
    c.coordinate += len(loc.candidates)
    if upper_hull_indices(xs, ys, V, c) != V:
        raise Fallback("V-extremal points are not in convex position")
    vkeys = [(xs[j], ys[j], j) for j in V]
    vpos = {j: b for b, j in enumerate(V)}
    nv = len(V)
    # Step 2: for every C vertex, the number of V points strictly left of it
    vb = []
    b = 0
    for x in ch.vx:
        while b < nv and vkeys[b][0] < x:
            b += 1
            c.coordinate += 1
        c.coordinate += 1
        vb.append(b)

    def slab_range(lo: int, hi: int) -> tuple[int, int]:
        return (vb[lo - 1] if lo > 0 else 0), (vb[hi] if hi < ch.edge_count - 1 else nv)

    def locate(p: int, blo: int, bhi: int) -> int:
        """Gap of p (V points strictly before it), searching [blo, bhi] first."""
        key = (xs[p], ys[p], p)
        c.coordinate += 2
        if (blo > 0 and not vkeys[blo - 1] < key) or (bhi < nv and not key < vkeys[bhi]):
            report.rehinted += 1
            blo, bhi = 0, nv
        report.hinted += 1
        c.coordinate += max(1, (bhi - blo + 1).bit_length())
        return bisect.bisect_left(vkeys, key, blo, bhi)

    witnesses: dict[int, tuple[int, int]] = {}
    gap: dict[int, int] = {}
    for p in range(n):
        if p in vpos:
            continue
        o = loc.outcomes[p]
        if o.kind == OUTSIDE:
            # Step 3: binary search over the V-extremal points
            gap[p] = locate(p, 0, nv)
        elif o.kind == BELOW:
            # Step 4: the middle edge of the V-pairs of seg's endpoints often certifies p
            b1, b2 = slab_range(o.lo, o.hi)
            if b2 - b1 >= 2:
                c.orientation += 1
                q, r = V[b1], V[b2 - 1]
                if strictly_below(xs, ys, q, r, p):
                    witnesses[p] = (q, r)
                    report.middle_edge += 1
                    continue
            gap[p] = locate(p, b1, b2)
        elif o.kind == IN_PENCIL:
            q = o.owner
            if q in vpos:
                # Step 6: p sits just left or just right of its V-extremal apex
                j = vpos[q]
                c.coordinate += 1
                if (xs[p], ys[p], p) < vkeys[j]:
                    gap[p] = locate(p, j, j)
                else:
                    gap[p] = locate(p, j + 1, j + 1)
            else:
                # Step 5: first the gap of the owner, then the owner's pencil slab
                bq = gap.get(q)
                if bq is None:
                    bq = gap[q] = locate(q, 0, nv)
                key = (xs[p], ys[p], p)
                c.coordinate += 2
                if (bq == 0 or vkeys[bq - 1] < key) and (bq == nv or key < vkeys[bq]):
                    gap[p] = bq
                else:
                    pen = loc.pencils[q]
                    gap[p] = locate(p, *slab_range(pen.lo, pen.hi))
        else:
            gap[p] = locate(p, *slab_range(o.lo, o.hi))
    # Step 7: per gap, only points above the V-pair segment need real work
    above: dict[int, list[int]] = {}
    for p, b in gap.items():
        if 0 < b < nv:
            c.orientation += 1
            q, r = V[b - 1], V[b]
            if strictly_below(xs, ys, q, r, p):
                witnesses[p] = (q, r)
                continue
        above.setdefault(b, []).append(p)
    chain: list[int] = []
    for b in range(nv + 1):
        ends = ([V[b - 1]] if b > 0 else []) + ([V[b]] if b < nv else [])
        Qb = above.get(b)
        if Qb:
            idx = ends[:1] + Qb + ends[1:] if b > 0 else Qb + ends
            sub = output_sensitive_indices(xs, ys, idx, c)
            if b > 0 and sub[0] != V[b - 1] or b < nv and sub[-1] != V[b]:
                raise Fallback(f"a V-extremal point is not extremal near gap {b}")
            witnesses.update(witnesses_from_hull(xs, ys, sub, Qb, c))
            inner = len(sub) - len(ends)
            report.step7_points += len(Qb)
            report.step7_cost += len(Qb) * math.log2(inner + 1)
            middle = sub[1:] if b > 0 else sub
            middle = middle[:-1] if b < nv else middle
            chain.extend(middle)
        if b < nv:
            chain.append(V[b])
    _self_check(xs, ys, chain, witnesses)
    return HullCertificate(chain, witnesses, False)


def _self_check(xs, ys, chain: list[int], witnesses: dict[int, tuple[int, int]]) -> None:
    """Exact, uncounted: a concave sorted chain plus valid witnesses is the hull."""
    for a, b in zip(chain, chain[1:]):
        if not (xs[a], ys[a], a) < (xs[b], ys[b], b):
            raise Fallback("chain not sorted")
    for a, b, d in zip(chain, chain[1:], chain[2:]):
        if orient(xs[a], ys[a], xs[b], ys[b], xs[d], ys[d]) > 0:
            raise Fallback("chain turns left")
    if len(chain) + len(witnesses) != len(xs) or set(chain) & witnesses.keys():
        raise Fallback("points neither on the chain nor witnessed")
    for p, (q, r) in witnesses.items():
        if not strictly_below(xs, ys, q, r, p):
            raise Fallback(f"witness pair for {p} fails")


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------


def run_hull(points, structures: HullStructures, debug: bool = False,
             counter: OpCounter | None = None, outside_limit: int | None = None,
             return_location: bool = False):
    """Location then construction; returns ``(certificate, metrics)``.

    With ``return_location`` the :class:`LocationResult` is appended (``None``
    when there is no canonical hull).
    """
    t0 = time.perf_counter()
    counter = counter if counter is not None else OpCounter()
    if not structures.usable:
        xs, _ = as_xy(points)
        if len(xs) != structures.n:
            raise InvalidInputError(f"instance has {len(xs)} points, structures expect {structures.n}")
        cert = fallback_hull(points, counter)
        metrics = RunMetrics(comparisons=counter.total, wall_time=time.perf_counter() - t0,
                             extra={"outside_count": 0, "fallback_used": True,
                                    "fallback_reason": "no canonical hull",
                                    "case_histogram": {}, "step7_cost": 0.0})
        return (cert, metrics, None) if return_location else (cert, metrics)
    run = LocationRun(points, structures, debug, counter)
    loc = run.run()
    cert, report = construct_hull(points, loc, structures.hull, counter, outside_limit)
    hc = run.heap.counters
    metrics = RunMetrics(
        rounds=loc.rounds,
        comparisons=counter.total,
        heap_ops=hc.inserts + hc.deletes + hc.decrease_keys + hc.find_maxes,
        heap_steps=hc.elementary_steps,
        per_point_steps=dict(Counter(cur.steps for cur in run.cursors)),
        wall_time=time.perf_counter() - t0,
        extra={"outside_count": loc.outside_count,
               "fallback_used": cert.fallback_used,
               "fallback_reason": report.fallback_reason,
               "case_histogram": dict(sorted(loc.cases.items())),
               "step7_cost": report.step7_cost,
               "step7_points": report.step7_points},
    )
    if debug and loc.violations:
        metrics.extra["violations"] = list(loc.violations)
    return (cert, metrics, loc) if return_location else (cert, metrics)


def c_certificate(points, loc: LocationResult, ch: CanonicalHull) -> CCertificate:
    """C-certificate from a location run.

    Points stopped inside a V-extremal pencil keep that pencil; other points
    fall back to the leaf slab or segment that placed them.
    """
    xs, ys = as_xy(points)
    V = sorted(set(j for j in loc.candidates if j >= 0), key=lambda j: (xs[j], ys[j], j))
    vset = set(V)
    labels = {}
    for p, o in enumerate(loc.outcomes):
        if p in vset:
            continue
        if o.kind == BELOW:
            labels[p] = CLabel(BELOW_SEG, o.lo, o.hi)
            continue
        if o.kind == IN_PENCIL and o.owner in vset:
            pen = loc.pencils[o.owner]
            labels[p] = CLabel(PENCIL_SLAB, pen.lo, pen.hi, o.owner)
            continue
        leaf = ch.leaf_of(xs[p])
        labels[p] = CLabel(LEAF_SLAB, leaf, leaf)
    return CCertificate(V, labels)


def hull_structures_to_dict(st: HullStructures) -> dict:
    return {"n": st.n, "hull": None if st.hull is None else st.hull.to_dict(),
            "trees": [t.to_dict() for t in st.trees]}


def hull_structures_from_dict(doc: dict) -> HullStructures:
    ch = None if doc["hull"] is None else CanonicalHull.from_dict(doc["hull"])
    return HullStructures(ch, [SearchTree.from_dict(t) for t in doc["trees"]], int(doc["n"]))

