"""Vertical slab structure built from training x-coordinates.

Boundaries ``b_0 < ... < b_{m-1}`` cut the x-axis into ``m + 1`` leaf slabs;
leaf ``j`` is ``[b_{j-1}, b_j)`` with ``b_{-1} = -inf`` and ``b_m = +inf``,
so a query that hits a boundary exactly goes to the slab on its right.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class Slab:
    """Inclusive interval ``[lo, hi]`` of leaf slabs."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi or self.lo < 0:
            raise InvalidInputError(f"bad slab [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, leaf: int) -> bool:
        return self.lo <= leaf <= self.hi


class SlabStructure:
    def __init__(self, boundaries: Sequence[float]):
        b = np.asarray(boundaries, float).reshape(-1)
        if len(b) and not np.all(np.isfinite(b)):
            raise InvalidInputError("boundaries must be finite")
        if np.any(np.diff(b) <= 0):
            raise InvalidInputError("boundaries must be strictly increasing")
        self.boundaries = b
        self._blist = b.tolist()

    @property
    def leaf_count(self) -> int:
        return len(self._blist) + 1

    def locate_leaf(self, x: float) -> int:
        return bisect.bisect_right(self._blist, x)

    def locate_many(self, xs) -> np.ndarray:
        return np.searchsorted(self.boundaries, np.asarray(xs, float), side="right")

    def left_edge(self, leaf: int) -> float:
        return self._blist[leaf - 1] if leaf > 0 else -math.inf

    def right_edge(self, leaf: int) -> float:
        return self._blist[leaf] if leaf < len(self._blist) else math.inf

    def to_json(self) -> str:
        return json.dumps({"boundaries": self._blist})

    @classmethod
    def from_json(cls, text: str) -> "SlabStructure":
        return cls(json.loads(text)["boundaries"])

    def __eq__(self, other):
        return isinstance(other, SlabStructure) and self._blist == other._blist

    def __repr__(self):
        return f"SlabStructure(leaf_count={self.leaf_count})"


def default_slab_samples(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def build_slab_structure(training) -> SlabStructure:
    """Every t-th sorted training x-coordinate becomes a boundary.

    ``training`` is a sequence of ``t`` instances of size ``n`` (or a
    ``(t, n, 2)`` array). Boundaries are the sorted values at positions
    ``t, 2t, ..., (n-1)t`` counted from one; repeated values collapse.
    """
    arrays = [np.asarray(inst, float).reshape(-1, 2) for inst in training]
    if not arrays:
        raise InvalidInputError("need at least one training instance")
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise InvalidInputError("training instances differ in size")
    t = len(arrays)
    xs = np.sort(np.concatenate([a[:, 0] for a in arrays]), kind="stable")
    picks = xs[t - 1 : (n - 1) * t : t] if n > 1 else xs[:0]
    return SlabStructure(np.unique(picks))


def leaf_counts(s: SlabStructure, instance) -> np.ndarray:
    """X_lambda: number of points of one instance per leaf slab."""
    pts = np.asarray(instance, float).reshape(-1, 2)
    return np.bincount(s.locate_many(pts[:, 0]), minlength=s.leaf_count)


@dataclass
class MomentReport:
    """Per-leaf sample means of X_lambda^2 and the leaves above the bound."""

    mean_square: np.ndarray
    bound: float
    samples: int

    @property
    def max_mean_square(self) -> float:
        return float(self.mean_square.max())

    @property
    def failures(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.mean_square > self.bound)]

    @property
    def ok(self) -> bool:
        return not self.failures


def check_leaf_moments(s: SlabStructure, d, samples: int = 1000, start: int = 0,
                       bound: float = 10.0) -> MomentReport:
    """Monte-Carlo estimate of E[X_lambda^2] for every leaf slab.

    Failures are reported, not raised: the property holds in expectation.
    """
    acc = np.zeros(s.leaf_count)
    for k in range(samples):
        c = leaf_counts(s, d.sample(start + k)).astype(float)
        acc += c * c
    return MomentReport(acc / samples, bound, samples)
