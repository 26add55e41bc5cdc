"""Output certificates and the verifiers that check them.

Verifiers only use the predicates and baselines from :mod:`.geometry`; none
of them trust engine internals. Each returns ``None`` for a valid
certificate or a :class:`Violation` naming the failed condition and the
indices involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import as_xy, maxima_sweep_xy, orient, strictly_below, upper_hull_indices


@dataclass
class Violation:
    condition: str
    indices: tuple
    message: str

    def __str__(self):
        return f"violation ({self.condition}) at {self.indices}: {self.message}"


@dataclass
class MaximaCertificate:
    """Maximal indices left to right plus a dominating witness for every other index."""

    maximal_indices: list[int]
    witnesses: dict[int, int]

    def to_dict(self) -> dict:
        return {"type": "maxima", "maximal_indices": list(map(int, self.maximal_indices)),
                "witnesses": {str(k): int(v) for k, v in sorted(self.witnesses.items())}}

    @classmethod
    def from_dict(cls, doc: dict) -> "MaximaCertificate":
        return cls([int(i) for i in doc["maximal_indices"]],
                   {int(k): int(v) for k, v in doc["witnesses"].items()})


@dataclass
class HullCertificate:
    """Upper-hull vertices left to right plus a witness pair for every other index."""

    extremal_indices: list[int]
    witness_pairs: dict[int, tuple[int, int]]
    fallback_used: bool = False

    def to_dict(self) -> dict:
        return {"type": "hull", "extremal_indices": list(map(int, self.extremal_indices)),
                "witness_pairs": {str(k): [int(q), int(r)]
                                  for k, (q, r) in sorted(self.witness_pairs.items())},
                "fallback_used": self.fallback_used}

    @classmethod
    def from_dict(cls, doc: dict) -> "HullCertificate":
        return cls([int(i) for i in doc["extremal_indices"]],
                   {int(k): (int(v[0]), int(v[1])) for k, v in doc["witness_pairs"].items()},
                   bool(doc.get("fallback_used", False)))


def certificate_to_json(cert) -> str:
    return json.dumps(cert.to_dict(), separators=(",", ":"))


def certificate_from_json(text: str):
    doc = json.loads(text)
    kind = doc.get("type")
    if kind == "maxima":
        return MaximaCertificate.from_dict(doc)
    if kind == "hull":
        return HullCertificate.from_dict(doc)
    raise InvalidInputError(f"unknown certificate type {kind!r}")


@dataclass(frozen=True)
class SLabel:
    """Leaf-slab label (``kind="leaf"``) or a separating boundary
    (``kind="boundary"``): the point lies left of boundary ``value`` and its
    witness lies on or right of it."""

    kind: str
    value: int


LEAF_SLAB = "LeafSlab"
BELOW_SEG = "BelowSeg"
PENCIL_SLAB = "PencilSlab"


@dataclass(frozen=True)
class CLabel:
    """C-slab ``[lo, hi]`` attached to a non-V-extremal point."""

    kind: str
    lo: int
    hi: int
    owner: int = -1


@dataclass
class CCertificate:
    v_extremal_indices: list[int]
    labels: dict[int, CLabel] = field(default_factory=dict)


def _key(xs, ys, i):
    return (xs[i], ys[i], i)


def _check_range(n: int, indices) -> Violation | None:
    for i in indices:
        if not 0 <= i < n:
            return Violation("range", (i,), f"index {i} outside [0, {n})")
    return None


def verify_maxima_certificate(points, cert: MaximaCertificate) -> Violation | None:
    xs, ys = as_xy(points)
    n = len(xs)
    bad = _check_range(n, list(cert.maximal_indices) + list(cert.witnesses)
                       + list(cert.witnesses.values()))
    if bad:
        return bad
    maxima = list(cert.maximal_indices)
    # (a) left to right and pairwise non-dominating: y strictly falls as x rises
    for a, b in zip(maxima, maxima[1:]):
        if not _key(xs, ys, a) < _key(xs, ys, b):
            return Violation("a", (a, b), "maximal indices are not sorted left to right")
        if ys[b] >= ys[a]:
            return Violation("a", (a, b), f"{b} dominates {a}")
    # (b) every witness dominates its point and beats it in the tie-break
    for i, w in cert.witnesses.items():
        if not (xs[w] >= xs[i] and ys[w] >= ys[i] and _key(xs, ys, w) > _key(xs, ys, i)):
            return Violation("b", (i, w), f"{w} does not dominate {i}")
    # (d) partition
    in_max = set(maxima)
    if len(in_max) != len(maxima):
        return Violation("d", tuple(maxima), "repeated maximal index")
    both = in_max & set(cert.witnesses)
    if both:
        i = min(both)
        return Violation("d", (i,), f"{i} is both maximal and witnessed")
    missing = set(range(n)) - in_max - set(cert.witnesses)
    if missing:
        i = min(missing)
        return Violation("d", (i,), f"{i} is neither maximal nor witnessed")
    # (c) no claimed maximum is dominated by any input point
    oracle = maxima_sweep_xy(xs, ys)
    wrong = in_max - set(oracle.maximal_indices)
    if wrong:
        i = min(wrong)
        return Violation("c", (i, oracle.witnesses[i]), f"{i} is dominated by {oracle.witnesses[i]}")
    return None


def verify_hull_certificate(points, cert: HullCertificate) -> Violation | None:
    xs, ys = as_xy(points)
    n = len(xs)
    pairs = [v for pair in cert.witness_pairs.values() for v in pair]
    bad = _check_range(n, list(cert.extremal_indices) + list(cert.witness_pairs) + pairs)
    if bad:
        return bad
    ext = list(cert.extremal_indices)
    for a, b in zip(ext, ext[1:]):
        if not _key(xs, ys, a) < _key(xs, ys, b):
            return Violation("sorted", (a, b), "extremal indices are not sorted left to right")
    for a, b, c in zip(ext, ext[1:], ext[2:]):
        if orient(xs[a], ys[a], xs[b], ys[b], xs[c], ys[c]) > 0:
            return Violation("convex", (a, b, c), "extremal chain turns left")
    oracle = upper_hull_indices(xs, ys)
    if ext != oracle:
        diff = sorted(set(ext) ^ set(oracle)) or ext
        return Violation("hull", tuple(diff[:3]), "extremal list differs from the upper hull")
    on_hull = set(ext)
    for p, (q, r) in cert.witness_pairs.items():
        if p in on_hull:
            return Violation("partition", (p,), f"{p} is both extremal and witnessed")
        if not _key(xs, ys, q) < _key(xs, ys, p) < _key(xs, ys, r):
            return Violation("interval", (q, r, p), f"{p} is not between {q} and {r}")
        if orient(xs[q], ys[q], xs[r], ys[r], xs[p], ys[p]) >= 0:
            return Violation("semislab", (q, r, p), f"{p} is not strictly below segment {q}-{r}")
    missing = set(range(n)) - on_hull - set(cert.witness_pairs)
    if missing:
        i = min(missing)
        return Violation("partition", (i,), f"{i} is neither extremal nor witnessed")
    return None


def verify_slabels(points, cert: MaximaCertificate, labels: dict[int, SLabel], slabs
                   ) -> Violation | None:
    """Labels agree with leaf location, and boundaries separate points from witnesses."""
    xs, ys = as_xy(points)
    b = slabs.boundaries
    for i in range(len(xs)):
        lab = labels.get(i)
        if lab is None:
            return Violation("label", (i,), f"{i} has no label")
        if lab.kind == "leaf":
            if slabs.locate_leaf(xs[i]) != lab.value:
                return Violation("label", (i, lab.value), f"{i} is not in leaf {lab.value}")
        elif lab.kind == "boundary":
            w = cert.witnesses.get(i)
            j = lab.value
            if w is None or not 0 <= j < len(b):
                return Violation("label", (i, j), f"boundary label for {i} without witness")
            if not xs[i] < b[j] <= xs[w]:
                return Violation("label", (i, j, w), f"boundary {j} does not separate {i} from {w}")
        else:
            return Violation("label", (i,), f"unknown label kind {lab.kind!r}")
    return None


def direction_argmax(xs, ys, slope: float) -> int:
    """Lexicographically smallest index maximising y - slope * x, exactly."""
    x = np.asarray(xs, float)
    y = np.asarray(ys, float)
    vals = y - slope * x
    top = vals.max()
    tol = 1e-9 * (np.abs(y) + np.abs(slope * x)).max() + 1e-300
    near = np.flatnonzero(vals >= top - tol)
    m = Fraction(slope)
    best, best_val = None, None
    for i in near:
        v = Fraction(float(y[i])) - m * Fraction(float(x[i]))
        if best is None or v > best_val or (v == best_val and (x[i], y[i], i) < (x[best], y[best], best)):
            best, best_val = int(i), v
    return best


def v_extremal_oracle(xs, ys, slopes: Sequence[float]) -> list[int]:
    """e_v for every direction (-slope, 1), in direction order."""
    return [direction_argmax(xs, ys, m) for m in slopes]


def verify_c_certificate(points, cc: CCertificate, ch) -> Violation | None:
    """Check a C-certificate against the canonical hull ``ch``."""
    xs, ys = as_xy(points)
    n = len(xs)
    expected = sorted(set(v_extremal_oracle(xs, ys, ch.slopes)), key=lambda i: _key(xs, ys, i))
    if list(cc.v_extremal_indices) != expected:
        diff = sorted(set(cc.v_extremal_indices) ^ set(expected))
        return Violation("v-extremal", tuple(diff[:3]), "V-extremal list differs from argmax oracle")
    vset = set(expected)
    E = ch.edge_count
    for p in range(n):
        lab = cc.labels.get(p)
        if p in vset:
            if lab is not None:
                return Violation("partition", (p,), f"V-extremal {p} carries a label")
            continue
        if lab is None:
            return Violation("partition", (p,), f"{p} has no C-slab")
        if not 0 <= lab.lo <= lab.hi < E:
            return Violation("slab", (p, lab.lo, lab.hi), "C-slab outside the leaf range")
        leaf = ch.leaf_of(xs[p])
        if not lab.lo <= leaf <= lab.hi:
            return Violation("slab", (p, lab.lo, lab.hi), f"{p} lies in leaf {leaf}")
        if lab.kind == LEAF_SLAB:
            if lab.lo != lab.hi:
                return Violation("leaf", (p, lab.lo, lab.hi), "LeafSlab label on a wide slab")
        elif lab.kind == BELOW_SEG:
            if not ch.seg_defined(lab.lo, lab.hi) or not ch.below_seg(lab.lo, lab.hi, xs[p], ys[p]):
                return Violation("seg", (p, lab.lo, lab.hi), f"{p} is not below the segment")
        elif lab.kind == PENCIL_SLAB:
            q = lab.owner
            if q not in vset:
                return Violation("pencil", (p, q), f"owner {q} is not V-extremal")
            rng = ch.visible_edges_scan(xs[q], ys[q])
            if rng is None:
                return Violation("pencil", (p, q), f"owner {q} is inside C")
            if rng != (lab.lo, lab.hi):
                return Violation("pencil", (p, q), f"slab differs from the pencil slab {rng}")
            pen = ch.pencil_from_range(xs[q], ys[q], q, *rng)
            if not pen.contains(xs[p], ys[p], leaf):
                return Violation("pencil", (p, q), f"{p} is not inside the pencil of {q}")
        else:
            return Violation("kind", (p,), f"unknown label kind {lab.kind!r}")
    return None


def brute_force_extremal(points) -> list[int]:
    """O(n^3): indices with no witness pair, left to right."""
    xs, ys = as_xy(points)
    n = len(xs)
    out = []
    for p in range(n):
        if not any(strictly_below(xs, ys, q, r, p) for q in range(n) for r in range(n)):
            out.append(p)
    return sorted(out, key=lambda i: _key(xs, ys, i))


def brute_force_maxima(points) -> list[int]:
    """O(n^2): indices no other point dominates under the tie-break, left to right."""
    xs, ys = as_xy(points)
    n = len(xs)
    out = [i for i in range(n)
           if not any(j != i and xs[j] >= xs[i] and ys[j] >= ys[i]
                      and _key(xs, ys, j) > _key(xs, ys, i) for j in range(n))]
    return sorted(out, key=lambda i: _key(xs, ys, i))
