"""Learning-phase geometry for upper hulls.

Everything here works in the dual plane given by ``p -> p*: y = 2 x(p) x - y(p)``.
A learning sample ``Q`` yields a level of its dual arrangement, the upper
hull ``H'`` of that level's vertices, a sequence of canonical directions read
off ``H'``, one canonical line per direction, and finally the canonical hull
``C``: the region below all canonical lines. ``C`` carries its own slab
structure (one leaf slab per edge) and the pencil geometry the location
algorithm needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ContractViolation, DegenerateInputError, InvalidInputError
from .geometry import OpCounter, above_line, orient, slope_side, upper_hull_indices
from .slabs import SlabStructure


# ---------------------------------------------------------------------------
# Levels of a line arrangement
# ---------------------------------------------------------------------------

@dataclass
class LevelPolyline:
    """The z-level: x-monotone polyline with breakpoints ``xs`` and one
    supporting line per piece (``edges[k]`` covers ``(xs[k-1], xs[k])``)."""

    z: int
    xs: np.ndarray
    ys: np.ndarray
    edges: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def value_at(self, x: float) -> float:
        k = int(np.searchsorted(self.xs, x, side="right"))
        j = self.edges[k]
        return float(self.slopes[j] * x + self.intercepts[j])

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points strictly inside random pieces, for recount checks."""
        pts = []
        lo_all = self.xs[0] - 1.0 if len(self.xs) else -1.0
        hi_all = self.xs[-1] + 1.0 if len(self.xs) else 1.0
        for _ in range(count):
            k = int(rng.integers(len(self.edges)))
            lo = self.xs[k - 1] if k > 0 else lo_all
            hi = self.xs[k] if k < len(self.xs) else hi_all
            x = lo + (hi - lo) * (0.25 + 0.5 * rng.random())
            j = self.edges[k]
            pts.append((x, self.slopes[j] * x + self.intercepts[j], j))
        return np.array(pts)


def lines_from(lines) -> tuple[np.ndarray, np.ndarray]:
    """(slopes, intercepts) from DirectedLines or from an (n, 2) array."""
    if len(lines) and hasattr(lines[0], "slope"):
        return (np.array([l.slope for l in lines], float),
                np.array([l.intercept for l in lines], float))
    arr = np.asarray(lines, float).reshape(-1, 2)
    return arr[:, 0].copy(), arr[:, 1].copy()


def compute_level(slopes, intercepts, z: int) -> LevelPolyline:
    """z-level of the lines ``y = slopes[i] x + intercepts[i]``.

    For each line, sort its crossings with all others, track how many lines
    lie strictly below it between consecutive crossings and keep the pieces
    where that count is ``z``. Assumes no three lines pass through a point.
    """
    m = np.asarray(slopes, float)
    b = np.asarray(intercepts, float)
    n = len(m)
    if not 0 <= z < n:
        raise InvalidInputError(f"level {z} outside [0, {n})")
    los, his, ids = [], [], []
    idx = np.arange(n)
    for i in range(n):
        dm = m[i] - m
        db = b - b[i]
        other = idx != i
        # a steeper line is below at -inf, as is a lower parallel one
        below0 = int(np.count_nonzero(other & ((dm < 0) | ((dm == 0) & (db < 0)))))
        cross = other & (dm != 0)
        xc = db[cross] / dm[cross]
        step = np.where(dm[cross] < 0, -1, 1)
        order = np.argsort(xc, kind="stable")
        xs = xc[order]
        counts = below0 + np.concatenate([[0], np.cumsum(step[order])])
        left = np.concatenate([[-math.inf], xs])
        right = np.concatenate([xs, [math.inf]])
        sel = np.flatnonzero((counts == z) & (right > left))
        if len(sel):
            los.append(left[sel])
            his.append(right[sel])
            ids.append(np.full(len(sel), i))
    if not los:
        raise DegenerateInputError(f"level {z} is empty (degenerate arrangement)")
    lo = np.concatenate(los)
    hi = np.concatenate(his)
    line = np.concatenate(ids)
    order = np.lexsort((hi, lo))
    lo, hi, line = lo[order], hi[order], line[order]
    # merge pieces of one line split by crossings that leave the count unchanged
    keep_lo, keep_line, keep_hi = [lo[0]], [line[0]], [hi[0]]
    for a, c, j in zip(lo[1:], hi[1:], line[1:]):
        if j == keep_line[-1] and a == keep_hi[-1]:
            keep_hi[-1] = c
        elif a >= keep_hi[-1]:
            keep_lo.append(a)
            keep_hi.append(c)
            keep_line.append(j)
    if keep_lo[0] != -math.inf or keep_hi[-1] != math.inf:
        raise DegenerateInputError("level does not span the x-axis (degenerate arrangement)")
    bx = np.array(keep_hi[:-1], float)
    edges = np.array(keep_line, int)
    by = m[edges[:-1]] * bx + b[edges[:-1]]
    return LevelPolyline(z, bx, by, edges, m, b)


def count_below(slopes, intercepts, x: float, y: float) -> int:
    """Lines strictly below the point (x, y), recounted from scratch."""
    m = np.asarray(slopes, float)
    b = np.asarray(intercepts, float)
    return int(np.count_nonzero(m * x + b < y))


# ---------------------------------------------------------------------------
# Canonical directions and lines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullParams:
    """Learning parameters; ``None`` entries take the size-dependent defaults."""

    level_param: int | None = None
    spacing: int | None = None
    tail: int | None = None
    c: float = 8.0
    gamma: float = 0.25

    def resolve(self, n: int) -> tuple[int, int, int]:
        lg = math.log2(n) if n > 1 else 1.0
        level = self.level_param
        if level is None:
            level = min(math.ceil(lg**4), n // 4)
        spacing = self.spacing if self.spacing is not None else max(1, math.ceil(lg**2))
        tail = self.tail if self.tail is not None else math.ceil(self.gamma * self.c * lg)
        clamp = max(0, n - 1)
        return min(max(level, 0), clamp), max(1, spacing), min(max(tail, 0), clamp)


def asymptotic_direction_count(n: int) -> float:
    """n / log2(n)^2, the asymptotic number of canonical directions."""
    return n / math.log2(n) ** 2


@dataclass
class CanonicalDirections:
    """Dual points ``r_j`` on ``H'``, right to left, and their slopes ``2 x(r_j)``.

    Direction ``j`` is the upward normal ``(-slopes[j], 1)``; the sequence runs
    clockwise from the upward-leftmost direction.
    """

    r_points: np.ndarray
    slopes: np.ndarray
    level: LevelPolyline | None = None
    h_x: np.ndarray | None = None
    h_y: np.ndarray | None = None
    meetings: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.slopes)

    @property
    def directions(self) -> np.ndarray:
        v = np.column_stack([-self.slopes, np.ones_like(self.slopes)])
        return v / np.linalg.norm(v, axis=1)[:, None]


def _dual(points) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(points, float).reshape(-1, 2)
    return 2.0 * q[:, 0], -q[:, 1]


def _meetings(m: np.ndarray, b: np.ndarray, hx: np.ndarray, hy: np.ndarray
              ) -> tuple[np.ndarray, np.ndarray]:
    """Points where the lines meet the polyline (hx, hy), plus the line ids."""
    pts: list[np.ndarray] = []
    who: list[np.ndarray] = []
    chunk = max(1, 2_000_000 // max(1, len(hx)))
    for s in range(0, len(m), chunk):
        mm, bb = m[s : s + chunk, None], b[s : s + chunk, None]
        d = mm * hx[None, :] + bb - hy[None, :]
        scale = np.abs(mm) * np.abs(hx)[None, :] + np.abs(bb) + np.abs(hy)[None, :]
        zero = np.abs(d) <= 1e-12 * scale
        sign = np.where(zero, 0, np.sign(d))
        li, vi = np.nonzero(zero)
        if len(li):
            pts.append(np.column_stack([hx[vi], hy[vi]]))
            who.append(li + s)
        if len(hx) > 1:
            li, ei = np.nonzero(sign[:, :-1] * sign[:, 1:] < 0)
            if len(li):
                d0, d1 = d[li, ei], d[li, ei + 1]
                x = hx[ei] + d0 / (d0 - d1) * (hx[ei + 1] - hx[ei])
                x = np.clip(x, hx[ei], hx[ei + 1])
                pts.append(np.column_stack([x, m[li + s] * x + b[li + s]]))
                who.append(li + s)
    if not pts:
        return np.empty((0, 2)), np.empty(0, int)
    return np.vstack(pts), np.concatenate(who)


def canonical_directions(Q, level_param: int, spacing: int) -> CanonicalDirections:
    """Directions from every ``spacing``-th meeting point of Q* with ``H'``."""
    m, b = _dual(Q)
    n = len(m)
    if not 0 <= level_param < n:
        raise InvalidInputError(f"level parameter {level_param} outside [0, {n})")
    if spacing < 1:
        raise InvalidInputError("spacing must be >= 1")
    level = compute_level(m, b, level_param)
    if len(level.xs) == 0:
        raise DegenerateInputError("the level has no vertices")
    vx, vy = level.xs.tolist(), level.ys.tolist()
    hull = upper_hull_indices(vx, vy)
    hx = np.array([vx[i] for i in hull])
    hy = np.array([vy[i] for i in hull])
    pts, who = _meetings(m, b, hx, hy)
    if len(pts) < 2:
        raise DegenerateInputError("fewer than two meeting points with H'")
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    picked = pts[order][::spacing]
    keep = np.concatenate([[True], np.diff(picked[:, 0]) < 0])
    r = picked[keep]
    return CanonicalDirections(r, 2.0 * r[:, 0], level, hx, hy,
                               np.column_stack([pts, who]))


def check_h_prime(Q, dirs: CanonicalDirections, level_param: int) -> list[str]:
    """Structural properties of ``H'`` (empty list when all hold)."""
    m, b = _dual(Q)
    n = len(m)
    problems = []
    hx, hy = dirs.h_x, dirs.h_y
    samples = list(zip(hx, hy))
    samples += [((hx[i] + hx[i + 1]) / 2, (hy[i] + hy[i + 1]) / 2) for i in range(len(hx) - 1)]
    for x, y in samples:
        below = int(np.count_nonzero(m * x + b < y - 1e-12 * (abs(y) + 1)))
        if below > 2 * level_param:
            problems.append(f"H' point ({x:.6g}, {y:.6g}) has {below} lines below")
    who = dirs.meetings[:, 2].astype(int)
    per_line = np.bincount(who, minlength=n)
    supporting = set()
    for i in range(len(hx) - 1):
        for j in range(n):
            if (abs(m[j] * hx[i] + b[j] - hy[i]) <= 1e-12 * (abs(hy[i]) + 1)
                    and abs(m[j] * hx[i + 1] + b[j] - hy[i + 1]) <= 1e-12 * (abs(hy[i + 1]) + 1)):
                supporting.add(j)
    for j in np.flatnonzero(per_line > 2):
        if j not in supporting:
            problems.append(f"line {j} meets H' {per_line[j]} times")
    if len(hx) > 2 * n:
        problems.append(f"H' has {len(hx)} vertices (> 2n)")
    return problems


def canonical_lines(Q, dirs: CanonicalDirections, tail: int) -> tuple[np.ndarray, np.ndarray]:
    """(slopes, intercepts) of ``l_j = s_j*`` with ``s_j`` on the tail-level
    of Q* above ``r_j``; ``l_j`` has slope ``2 x(r_j)`` so it is normal to v_j."""
    m, b = _dual(Q)
    n = len(m)
    if not 0 <= tail < n:
        raise InvalidInputError(f"tail {tail} outside [0, {n})")
    xr = dirs.r_points[:, 0]
    vals = xr[:, None] * m[None, :] + b[None, :]
    ys = np.partition(vals, tail, axis=1)[:, tail]
    return dirs.slopes.copy(), -ys


def points_above(points, slope: float, intercept: float) -> int:
    p = np.asarray(points, float)
    return int(np.count_nonzero(p[:, 1] > slope * p[:, 0] + intercept))


# ---------------------------------------------------------------------------
# Canonical hull and pencils
# ---------------------------------------------------------------------------

def _lower_envelope(slopes: Sequence[float], intercepts: Sequence[float]) -> list[int]:
    """Indices (in slope-decreasing input order) of the non-redundant lines."""
    ms = [Fraction(v) for v in slopes]
    cs = [Fraction(v) for v in intercepts]

    def cross_x(i: int, j: int) -> Fraction:
        return (cs[j] - cs[i]) / (ms[i] - ms[j])

    stack: list[int] = []
    for j in range(len(ms)):
        while len(stack) >= 2 and cross_x(stack[-2], j) <= cross_x(stack[-2], stack[-1]):
            stack.pop()
        stack.append(j)
    return stack


@dataclass
class Pencil:
    """Region below ``a1 -> apex -> a2`` inside the C-slab ``[lo, hi]``.

    ``a1``/``a2`` are ``None`` when the tangent runs off to infinity along the
    first/last edge; the boundary is then the ray from the apex with that
    edge's slope.
    """

    apex: tuple[float, float]
    index: int
    lo: int
    hi: int
    a1: tuple[float, float] | None
    a2: tuple[float, float] | None
    left_slope: float
    right_slope: float

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def comparable(self, leaf: int) -> bool:
        return self.lo <= leaf <= self.hi

    def below_chain(self, x: float, y: float, counter: OpCounter | None = None) -> bool:
        """Strictly below the two tangent segments (slab membership not checked)."""
        px, py = self.apex
        if counter is not None:
            counter.orientation += 1
        if x <= px:
            if self.a1 is None:
                return slope_side(px, py, self.left_slope, x, y) < 0
            return orient(self.a1[0], self.a1[1], px, py, x, y) < 0
        if self.a2 is None:
            return slope_side(px, py, self.right_slope, x, y) < 0
        return orient(px, py, self.a2[0], self.a2[1], x, y) < 0

    def contains(self, x: float, y: float, leaf: int, counter: OpCounter | None = None) -> bool:
        return self.comparable(leaf) and self.below_chain(x, y, counter)


class CanonicalHull:
    """``C``: the region below every canonical line.

    Directions are indexed ``0..k-1`` clockwise; edges ``0..E-1`` are the
    non-redundant lines left to right, vertex ``j`` joins edges ``j`` and
    ``j + 1``. Leaf slab ``j`` of :attr:`slabs` is the x-range of edge ``j``.
    Vertices are rounded to floats; predicates against lines stay exact.
    """

    def __init__(self, slopes, intercepts, r_points=None):
        m = [float(v) for v in np.asarray(slopes, float).reshape(-1)]
        c = [float(v) for v in np.asarray(intercepts, float).reshape(-1)]
        if len(m) < 1 or len(m) != len(c):
            raise InvalidInputError("need k >= 1 lines with matching intercepts")
        if any(m[i] <= m[i + 1] for i in range(len(m) - 1)):
            raise InvalidInputError("line slopes must be strictly decreasing")
        self.slopes = m
        self.intercepts = c
        self.r_points = None if r_points is None else np.asarray(r_points, float)
        kept = _lower_envelope(m, c)
        while True:
            vx, vy = [], []
            for a, bidx in zip(kept, kept[1:]):
                x = (Fraction(c[bidx]) - Fraction(c[a])) / (Fraction(m[a]) - Fraction(m[bidx]))
                vx.append(float(x))
                vy.append(float(Fraction(m[a]) * x + Fraction(c[a])))
            bad = [j for j in range(len(vx) - 1) if vx[j + 1] <= vx[j]]
            if not bad:
                break
            # an edge shorter than float resolution: drop it
            del kept[bad[0] + 1]
        self.edges = kept
        self.edge_m = [m[d] for d in kept]
        self.edge_c = [c[d] for d in kept]
        self.vx = vx
        self.vy = vy
        self.slabs = SlabStructure(vx)
        E = len(kept)
        self.dir_lo = [kept[e - 1] + 1 if e > 0 else 0 for e in range(E)]
        self.dir_hi = [kept[e + 1] - 1 if e < E - 1 else len(m) - 1 for e in range(E)]

    @property
    def k(self) -> int:
        return len(self.slopes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def hull_vertices(self) -> list[tuple[float, float]]:
        return list(zip(self.vx, self.vy))

    def leaf_of(self, x: float) -> int:
        return self.slabs.locate_leaf(x)

    def vertex(self, j: int) -> tuple[float, float]:
        return self.vx[j], self.vy[j]

    def above_edge(self, e: int, x: float, y: float) -> bool:
        return above_line(self.edge_m[e], self.edge_c[e], x, y) > 0

    def above_direction(self, d: int, x: float, y: float) -> bool:
        return above_line(self.slopes[d], self.intercepts[d], x, y) > 0

    def outside(self, x: float, y: float) -> bool:
        """Strictly above the upper boundary of C."""
        j = self.leaf_of(x)
        return any(self.above_edge(e, x, y)
                   for e in (j - 1, j, j + 1) if 0 <= e < self.edge_count)

    def seg_defined(self, lo: int, hi: int) -> bool:
        return lo >= 1 and hi <= self.edge_count - 2

    def below_seg(self, lo: int, hi: int, x: float, y: float) -> bool:
        """Strictly below the segment joining the boundary vertices of [lo, hi]."""
        ax, ay = self.vx[lo - 1], self.vy[lo - 1]
        bx, by = self.vx[hi], self.vy[hi]
        return orient(ax, ay, bx, by, x, y) < 0

    def visible_edges(self, x: float, y: float, start: int | None = None,
                      counter: OpCounter | None = None) -> tuple[int, int] | None:
        """Contiguous range of edges whose line lies strictly below (x, y).

        ``start`` is an edge already known to be visible. Returns ``None`` if
        the point is not outside C.
        """
        E = self.edge_count
        tests = 0
        if start is None:
            j = self.leaf_of(x)
            for e in (j, j - 1, j + 1):
                if 0 <= e < E:
                    tests += 1
                    if self.above_edge(e, x, y):
                        start = e
                        break
            if start is None:
                if counter is not None:
                    counter.side += tests
                return None
        lo, hi = 0, start
        while lo < hi:
            mid = (lo + hi) // 2
            tests += 1
            if self.above_edge(mid, x, y):
                hi = mid
            else:
                lo = mid + 1
        left = lo
        lo, hi = start, E - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            tests += 1
            if self.above_edge(mid, x, y):
                lo = mid
            else:
                hi = mid - 1
        if counter is not None:
            counter.side += tests
        return left, lo

    def pencil_from_range(self, x: float, y: float, index: int, lo: int, hi: int) -> Pencil:
        a1 = self.vertex(lo - 1) if lo >= 1 else None
        a2 = self.vertex(hi) if hi <= self.edge_count - 2 else None
        return Pencil((x, y), index, lo, hi, a1, a2, self.edge_m[0], self.edge_m[-1])

    def pencil_of(self, x: float, y: float, index: int = -1, start: int | None = None,
                  counter: OpCounter | None = None) -> Pencil:
        rng = self.visible_edges(x, y, start, counter)
        if rng is None:
            raise ContractViolation(f"({x}, {y}) is not outside C")
        return self.pencil_from_range(x, y, index, *rng)

    def visible_edges_scan(self, x: float, y: float) -> tuple[int, int] | None:
        """Linear-scan oracle for :meth:`visible_edges`."""
        vis = [e for e in range(self.edge_count) if self.above_edge(e, x, y)]
        return (vis[0], vis[-1]) if vis else None

    def directions_of_edges(self, lo: int, hi: int) -> range:
        """Directions whose extremal point may be seen through edges lo..hi."""
        return range(self.dir_lo[lo], self.dir_hi[hi] + 1)

    def to_dict(self) -> dict:
        doc = {"slopes": self.slopes, "intercepts": self.intercepts}
        if self.r_points is not None:
            doc["r_points"] = self.r_points.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CanonicalHull":
        return cls(doc["slopes"], doc["intercepts"], doc.get("r_points"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_canonical_hull(slopes, intercepts, r_points=None) -> CanonicalHull:
    return CanonicalHull(slopes, intercepts, r_points)


def learn_canonical_hull(Q, params: HullParams = HullParams()) -> CanonicalHull:
    """Directions, lines and hull from one learning sample."""
    n = len(Q)
    level, spacing, tail = params.resolve(n)
    dirs = canonical_directions(Q, level, spacing)
    slopes, intercepts = canonical_lines(Q, dirs, tail)
    return CanonicalHull(slopes, intercepts, dirs.r_points)
