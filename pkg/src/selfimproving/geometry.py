"""Planar primitives, exact predicates, duality and baseline hull/maxima.

Coordinates are 64-bit floats. ``orientation`` and ``side_of`` first
evaluate in floating point and fall back to rational arithmetic whenever the
result is within the forward error bound, so the returned sign is exact.

Ties between equal coordinates are broken lexicographically by
``(x, y, index)`` everywhere in the package. Under that rule a point is
*extremal* exactly when no witness pair ``(q, r)`` has ``q < p < r`` in
lexicographic order with ``p`` strictly below the segment ``qr``; points lying
on a hull edge are therefore reported as extremal.
"""

from __future__ import annotations

import bisect
import enum
import math
from fractions import Fraction
from functools import cmp_to_key
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError

# Shewchuk's ccwerrboundA = (3 + 16 eps) * eps with eps = 2**-53.
_CCW_ERRBOUND = (3.0 + 16.0 * 2.0**-53) * 2.0**-53
_EPS = 2.0**-53


class Point(NamedTuple):
    x: float
    y: float


class OpCounter:
    """Tallies geometric comparisons; the machine-independent cost model."""

    __slots__ = ("orientation", "side", "dominance", "coordinate")

    def __init__(self):
        self.orientation = 0
        self.side = 0
        self.dominance = 0
        self.coordinate = 0

    @property
    def total(self) -> int:
        return self.orientation + self.side + self.dominance + self.coordinate

    def as_dict(self) -> dict:
        return {
            "orientation": self.orientation,
            "side": self.side,
            "dominance": self.dominance,
            "coordinate": self.coordinate,
            "total": self.total,
        }


def as_xy(points) -> tuple[list[float], list[float]]:
    """Split points into coordinate lists, rejecting non-finite values."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        if arr.size == 0:
            return [], []
        raise InvalidInputError("points must be an (n, 2) array-like")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("non-finite coordinate in input")
    return arr[:, 0].tolist(), arr[:, 1].tolist()


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite coordinate {v!r}")


def orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> int:
    """Sign of (b - a) x (c - a) on raw floats, no validation."""
    detl = (bx - ax) * (cy - ay)
    detr = (by - ay) * (cx - ax)
    det = detl - detr
    bound = _CCW_ERRBOUND * (abs(detl) + abs(detr))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    fa, fb = Fraction(ax), Fraction(ay)
    exact = (Fraction(bx) - fa) * (Fraction(cy) - fb) - (Fraction(by) - fb) * (Fraction(cx) - fa)
    return (exact > 0) - (exact < 0)


def orientation(p, q, r) -> int:
    """+1 for a left turn p->q->r, 0 if collinear, -1 for a right turn."""
    _check_finite(p[0], p[1], q[0], q[1], r[0], r[1])
    return orient(float(p[0]), float(p[1]), float(q[0]), float(q[1]), float(r[0]), float(r[1]))


def line_sign(a: float, b: float, c: float, x: float, y: float) -> int:
    """Exact sign of a*x + b*y + c."""
    t1 = a * x
    t2 = b * y
    val = t1 + t2 + c
    bound = 4.0 * _EPS * (abs(t1) + abs(t2) + abs(c)) + 4.0 * _EPS * abs(val)
    if val > bound:
        return 1
    if -val > bound:
        return -1
    exact = Fraction(a) * Fraction(x) + Fraction(b) * Fraction(y) + Fraction(c)
    return (exact > 0) - (exact < 0)


def above_line(slope: float, intercept: float, x: float, y: float) -> int:
    """Exact sign of y - (slope * x + intercept); +1 means strictly above."""
    return line_sign(-slope, 1.0, -intercept, x, y)


def slope_side(px: float, py: float, slope: float, qx: float, qy: float) -> int:
    """Exact sign of (qy - py) - slope * (qx - px).

    +1 means q lies strictly above the line of the given slope through p;
    equivalently q beats p in direction (-slope, 1).
    """
    dx = qx - px
    dy = qy - py
    t = slope * dx
    val = dy - t
    bound = 4.0 * _EPS * (abs(dy) + abs(t)) + 2.0 * _EPS * abs(val)
    if val > bound:
        return 1
    if -val > bound:
        return -1
    exact = (Fraction(qy) - Fraction(py)) - Fraction(slope) * (Fraction(qx) - Fraction(px))
    return (exact > 0) - (exact < 0)


class Side(enum.Enum):
    LEFT_OPEN = "LeftOpen"
    ON = "On"
    RIGHT_OPEN = "RightOpen"


class DirectedLine:
    """The line a*x + b*y + c = 0; its left halfplane is where the form is > 0.

    Lines built with :meth:`through` remember their two anchor points so
    ``side_of`` agrees exactly with ``orientation``.
    """

    __slots__ = ("a", "b", "c", "anchors")

    def __init__(self, a: float, b: float, c: float, anchors=None):
        a, b, c = float(a), float(b), float(c)
        _check_finite(a, b, c)
        if a == 0.0 and b == 0.0:
            raise InvalidInputError("degenerate line: (a, b) = (0, 0)")
        if b == 0.0:
            raise InvalidInputError("vertical lines are not representable")
        self.a, self.b, self.c = a, b, c
        self.anchors = anchors

    @classmethod
    def through(cls, p, q) -> "DirectedLine":
        """Line directed from p to q; the left halfplane is left of travel."""
        _check_finite(p[0], p[1], q[0], q[1])
        px, py, qx, qy = float(p[0]), float(p[1]), float(q[0]), float(q[1])
        if px == qx and py == qy:
            raise InvalidInputError("degenerate line: coincident points")
        a = -(qy - py)
        b = qx - px
        if b == 0.0:
            raise InvalidInputError("vertical lines are not representable")
        return cls(a, b, -(a * px + b * py), anchors=((px, py), (qx, qy)))

    @classmethod
    def from_slope(cls, slope: float, intercept: float) -> "DirectedLine":
        """The line y = slope*x + intercept, with the upper side as left."""
        return cls(-slope, 1.0, -intercept)

    @property
    def slope(self) -> float:
        return -self.a / self.b

    @property
    def intercept(self) -> float:
        return -self.c / self.b

    def __repr__(self):
        return f"DirectedLine(a={self.a!r}, b={self.b!r}, c={self.c!r})"

    def __eq__(self, other):
        if not isinstance(other, DirectedLine):
            return NotImplemented
        return (self.a, self.b, self.c) == (other.a, other.b, other.c)

    def __hash__(self):
        return hash((self.a, self.b, self.c))


def side_of(p, line: DirectedLine) -> Side:
    _check_finite(p[0], p[1])
    if line.anchors is not None:
        (ax, ay), (bx, by) = line.anchors
        s = orient(ax, ay, bx, by, float(p[0]), float(p[1]))
    else:
        s = line_sign(line.a, line.b, line.c, float(p[0]), float(p[1]))
    if s > 0:
        return Side.LEFT_OPEN
    if s < 0:
        return Side.RIGHT_OPEN
    return Side.ON


def dominates(p, q) -> bool:
    """True iff x(p) >= x(q) and y(p) >= y(q)."""
    return p[0] >= q[0] and p[1] >= q[1]


def strictly_dominates(xs, ys, j: int, i: int) -> bool:
    """p_j dominates p_i and is lexicographically larger, so p_i is non-maximal."""
    xj, yj, xi, yi = xs[j], ys[j], xs[i], ys[i]
    if xj < xi or yj < yi:
        return False
    return (xj, yj, j) > (xi, yi, i)


def dual_point_to_line(p) -> DirectedLine:
    """p -> p*: y = 2 x(p) x - y(p)."""
    _check_finite(p[0], p[1])
    return DirectedLine.from_slope(2.0 * float(p[0]), -float(p[1]))


def dual_line_to_point(line: DirectedLine) -> Point:
    """Inverse of :func:`dual_point_to_line` on non-vertical lines."""
    return Point(line.slope / 2.0, -line.intercept)


def lex_order(xs: Sequence[float], ys: Sequence[float], indices=None) -> list[int]:
    idx = range(len(xs)) if indices is None else indices
    return sorted(idx, key=lambda i: (xs[i], ys[i], i))


def _counting_sort(indices, xs, ys, counter: OpCounter | None, reverse=False):
    if counter is None:
        return sorted(indices, key=lambda i: (xs[i], ys[i], i), reverse=reverse)

    def cmp(i, j):
        counter.coordinate += 1
        ki, kj = (xs[i], ys[i], i), (xs[j], ys[j], j)
        return -1 if ki < kj else (1 if ki > kj else 0)

    return sorted(indices, key=cmp_to_key(cmp), reverse=reverse)


def _chain(order: Sequence[int], xs, ys, counter: OpCounter | None) -> list[int]:
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if counter is not None:
                counter.orientation += 1
            if orient(xs[a], ys[a], xs[b], ys[b], xs[i], ys[i]) > 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def upper_hull_monotone(points, counter: OpCounter | None = None) -> list[int]:
    """Indices of UH(P), left to right, via Andrew's monotone chain."""
    xs, ys = as_xy(points)
    if not xs:
        raise InvalidInputError("empty input")
    return upper_hull_indices(xs, ys, counter=counter)


def upper_hull_indices(xs, ys, indices=None, counter: OpCounter | None = None) -> list[int]:
    idx = range(len(xs)) if indices is None else indices
    order = _counting_sort(idx, xs, ys, counter)
    # coincident points share fate; chain over one representative each
    reps: list[int] = []
    groups: dict[int, list[int]] = {}
    for i in order:
        if reps and xs[i] == xs[reps[-1]] and ys[i] == ys[reps[-1]]:
            groups[reps[-1]].append(i)
        else:
            reps.append(i)
            groups[i] = [i]
    out: list[int] = []
    for r in _chain(reps, xs, ys, counter):
        out.extend(groups[r])
    return out


def upper_hull_output_sensitive(points, counter: OpCounter | None = None) -> list[int]:
    """Indices of UH(P) in O(n log h) time (Chan's grouping and wrapping)."""
    xs, ys = as_xy(points)
    if not xs:
        raise InvalidInputError("empty input")
    return output_sensitive_indices(xs, ys, counter=counter)


def output_sensitive_indices(xs, ys, indices=None, counter: OpCounter | None = None) -> list[int]:
    idx = list(range(len(xs))) if indices is None else list(indices)
    if not idx:
        return []
    # Coincident points share fate; wrap over one representative each.
    dupes: dict[tuple[float, float], list[int]] = {}
    reps: list[int] = []
    for i in idx:
        key = (xs[i], ys[i])
        group = dupes.get(key)
        if group is None:
            dupes[key] = [i]
            reps.append(i)
        else:
            group.append(i)
    t = 1
    while True:
        m = min(2 ** (2**t), len(reps))
        hull = _chan_attempt(reps, m, xs, ys, counter)
        if hull is not None:
            break
        t += 1
    out: list[int] = []
    for i in hull:
        out.extend(sorted(dupes[(xs[i], ys[i])]))
    return out


def _chan_attempt(reps, m, xs, ys, counter):
    groups = []
    for s in range(0, len(reps), m):
        h = _chain(_counting_sort(reps[s : s + m], xs, ys, counter), xs, ys, counter)
        groups.append((h, [(xs[i], ys[i]) for i in h]))
    start = reps[0]
    for i in reps[1:]:
        if counter is not None:
            counter.coordinate += 1
        if (xs[i], ys[i]) < (xs[start], ys[start]):
            start = i
    out = [start]
    c = start
    while True:
        cx, cy = xs[c], ys[c]
        best = -1
        for h, keys in groups:
            lo = bisect.bisect_right(keys, (cx, cy))
            if counter is not None:
                counter.coordinate += max(1, (len(keys) + 1).bit_length())
            if lo == len(h):
                continue
            hi = len(h) - 1
            # first j whose successor does not turn left as seen from c
            while lo < hi:
                mid = (lo + hi) // 2
                a, b = h[mid], h[mid + 1]
                if counter is not None:
                    counter.orientation += 1
                if orient(cx, cy, xs[a], ys[a], xs[b], ys[b]) > 0:
                    lo = mid + 1
                else:
                    hi = mid
            cand = h[lo]
            if best < 0:
                best = cand
                continue
            if counter is not None:
                counter.orientation += 1
            s = orient(cx, cy, xs[best], ys[best], xs[cand], ys[cand])
            if s > 0 or (s == 0 and (xs[cand], ys[cand]) < (xs[best], ys[best])):
                best = cand
        if best < 0:
            return out
        out.append(best)
        c = best
        if len(out) > m:
            return None


def strictly_below(xs, ys, q: int, r: int, p: int) -> bool:
    """p lies in the open lower semislab lss(q, r) under the lexicographic order."""
    kq, kp, kr = (xs[q], ys[q], q), (xs[p], ys[p], p), (xs[r], ys[r], r)
    if not (kq < kp < kr):
        return False
    return orient(xs[q], ys[q], xs[r], ys[r], xs[p], ys[p]) < 0


def witnesses_from_hull(xs, ys, hull: Sequence[int], indices=None,
                        counter: OpCounter | None = None) -> dict[int, tuple[int, int]]:
    """Witness pair for every non-hull point: the hull edge above it."""
    on_hull = set(hull)
    keys = [(xs[i], ys[i], i) for i in hull]
    idx = range(len(xs)) if indices is None else indices
    out = {}
    for p in idx:
        if p in on_hull:
            continue
        j = bisect.bisect_left(keys, (xs[p], ys[p], p))
        if counter is not None:
            counter.coordinate += max(1, len(keys).bit_length())
        if j == 0 or j == len(keys):
            raise InvalidInputError(f"point {p} lies outside the hull's x-range")
        out[p] = (hull[j - 1], hull[j])
    return out


def maxima_sweep(points, counter: OpCounter | None = None):
    """Right-to-left sweep producing a maxima certificate."""
    xs, ys = as_xy(points)
    if not xs:
        raise InvalidInputError("empty input")
    return maxima_sweep_xy(xs, ys, counter)


def maxima_sweep_xy(xs, ys, counter: OpCounter | None = None, indices=None):
    from .certificates import MaximaCertificate

    idx = range(len(xs)) if indices is None else indices
    order = _counting_sort(idx, xs, ys, counter, reverse=True)
    maxima: list[int] = []
    witnesses: dict[int, int] = {}
    top = -math.inf
    leader = -1
    for i in order:
        if counter is not None:
            counter.dominance += 1
        if ys[i] > top:
            maxima.append(i)
            top = ys[i]
            leader = i
        else:
            witnesses[i] = leader
    maxima.reverse()
    return MaximaCertificate(maxima, witnesses)
