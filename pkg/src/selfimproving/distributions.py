"""Product distributions over planar points and their instance streams.

An instance is an ``(n, 2)`` float array whose row ``i`` is a draw from the
``i``-th component. Draws are counter based: instance ``counter`` of a
distribution with seed ``seed`` is generated from
``numpy.random.default_rng([seed, counter])`` with a fixed per-index column
layout, so point ``i`` depends only on ``(seed, counter, i)`` and disjoint
counter ranges give independent training and evaluation streams.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError

KINDS = ("FixedPoint", "UniformRect", "GaussianBlob", "DiscreteMixture", "SegmentUniform")

# rows of the uniform block drawn per instance; columns are indices
_U_ROWS = 3
_JITTER_ROWS = 2


@dataclass(frozen=True, eq=False)
class ComponentDistribution:
    """One per-index distribution.

    ``params`` holds numpy arrays: ``point`` (FixedPoint), ``lo``/``hi``
    (UniformRect), ``mean``/``chol`` (GaussianBlob), ``support``/``cdf``
    (DiscreteMixture), ``start``/``end`` (SegmentUniform). ``jitter`` adds a
    symmetric uniform offset of that half-width to each coordinate.
    """

    kind: str
    params: dict = field(default_factory=dict)
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown component kind {self.kind!r}")
        if self.jitter < 0:
            raise InvalidInputError("jitter must be non-negative")


def fixed_point(x: float, y: float, jitter: float = 0.0) -> ComponentDistribution:
    return ComponentDistribution("FixedPoint", {"point": np.array([x, y], float)}, jitter)


def uniform_rect(x0: float, y0: float, x1: float, y1: float) -> ComponentDistribution:
    if not (x0 <= x1 and y0 <= y1):
        raise InvalidInputError("rectangle corners must satisfy x0<=x1, y0<=y1")
    return ComponentDistribution("UniformRect", {"lo": np.array([x0, y0], float),
                                                 "hi": np.array([x1, y1], float)})


def gaussian_blob(mean, cov) -> ComponentDistribution:
    cov = np.asarray(cov, float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("covariance must be positive definite") from exc
    return ComponentDistribution("GaussianBlob", {"mean": np.asarray(mean, float),
                                                  "cov": cov, "chol": chol})


def discrete_mixture(support, weights=None, jitter: float = 0.0) -> ComponentDistribution:
    """Weighted choice among support points.

    Passing the same ``support`` array object to many components lets them
    share storage and lets sampling vectorise over the whole group.
    """
    support = np.asarray(support, float)
    if support.ndim != 2 or support.shape[1] != 2 or len(support) == 0:
        raise InvalidInputError("support must be a non-empty (m, 2) array")
    if weights is None:
        cdf = None
    else:
        w = np.asarray(weights, float)
        if w.shape != (len(support),) or np.any(w <= 0):
            raise InvalidInputError("weights must be positive, one per support point")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError("weights must sum to 1")
        cdf = np.cumsum(w)
        cdf[-1] = 1.0
    return ComponentDistribution("DiscreteMixture", {"support": support, "cdf": cdf,
                                                     "weights": None if weights is None else w},
                                 jitter)


def segment_uniform(start, end, jitter: float = 0.0) -> ComponentDistribution:
    return ComponentDistribution("SegmentUniform", {"start": np.asarray(start, float),
                                                    "end": np.asarray(end, float)}, jitter)


class ProductDistribution:
    """``n`` independent components plus a 64-bit seed."""

    def __init__(self, components: Sequence[ComponentDistribution], seed: int = 0,
                 name: str = "custom"):
        if len(components) < 1:
            raise InvalidInputError("a product distribution needs n >= 1 components")
        self.components = list(components)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.name = name
        self._plan = _SamplingPlan(self.components)

    @property
    def n(self) -> int:
        return len(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def with_seed(self, seed: int) -> "ProductDistribution":
        return ProductDistribution(self.components, seed, self.name)

    def sample(self, counter: int) -> np.ndarray:
        return sample(self, counter)

    def sample_many(self, start: int, count: int) -> np.ndarray:
        out = np.empty((count, self.n, 2))
        for k in range(count):
            out[k] = self._plan.draw(self.seed, start + k)
        return out


def sample(d: ProductDistribution, counter: int) -> np.ndarray:
    """Instance number ``counter`` of ``d`` as an ``(n, 2)`` array."""
    return d._plan.draw(d.seed, int(counter))


class _SamplingPlan:
    """Groups indices by kind so one instance costs a few vector operations."""

    def __init__(self, components):
        n = len(components)
        self.n = n
        self.jitter = np.array([c.jitter for c in components], float)
        self.any_jitter = bool(np.any(self.jitter > 0))
        by_kind: dict[str, list[int]] = {k: [] for k in KINDS}
        mixtures: dict[int, tuple[np.ndarray, np.ndarray | None, list[int]]] = {}
        for i, c in enumerate(components):
            if c.kind == "DiscreteMixture":
                key = (id(c.params["support"]), id(c.params["cdf"]))
                entry = mixtures.setdefault(key, (c.params["support"], c.params["cdf"], []))
                entry[2].append(i)
            else:
                by_kind[c.kind].append(i)
        self.fixed = np.array(by_kind["FixedPoint"], int)
        self.fixed_pts = np.array([components[i].params["point"] for i in self.fixed]).reshape(-1, 2)
        self.rect = np.array(by_kind["UniformRect"], int)
        self.rect_lo = np.array([components[i].params["lo"] for i in self.rect]).reshape(-1, 2)
        self.rect_span = np.array([components[i].params["hi"] - components[i].params["lo"]
                                   for i in self.rect]).reshape(-1, 2)
        self.gauss = np.array(by_kind["GaussianBlob"], int)
        self.gauss_mean = np.array([components[i].params["mean"] for i in self.gauss]).reshape(-1, 2)
        self.gauss_chol = np.array([components[i].params["chol"] for i in self.gauss]).reshape(-1, 2, 2)
        self.seg = np.array(by_kind["SegmentUniform"], int)
        self.seg_start = np.array([components[i].params["start"] for i in self.seg]).reshape(-1, 2)
        self.seg_dir = np.array([components[i].params["end"] - components[i].params["start"]
                                 for i in self.seg]).reshape(-1, 2)
        self.mixtures = [(support, cdf, np.array(idx, int))
                         for support, cdf, idx in mixtures.values()]

    def draw(self, seed: int, counter: int) -> np.ndarray:
        rng = np.random.default_rng([seed, counter])
        n = self.n
        u = rng.random((_U_ROWS, n))
        z = rng.standard_normal((2, n))
        jit = rng.random((_JITTER_ROWS, n))
        out = np.empty((n, 2))
        if len(self.fixed):
            out[self.fixed] = self.fixed_pts
        if len(self.rect):
            out[self.rect] = self.rect_lo + self.rect_span * u[:2, self.rect].T
        if len(self.gauss):
            out[self.gauss] = self.gauss_mean + np.einsum("kij,jk->ki", self.gauss_chol,
                                                          z[:, self.gauss])
        if len(self.seg):
            out[self.seg] = self.seg_start + self.seg_dir * u[0, self.seg][:, None]
        for support, cdf, idx in self.mixtures:
            if cdf is None:
                pick = np.minimum((u[0, idx] * len(support)).astype(np.int64), len(support) - 1)
            else:
                pick = np.minimum(np.searchsorted(cdf, u[0, idx], side="right"), len(support) - 1)
            out[idx] = support[pick]
        if self.any_jitter:
            out += (2.0 * jit.T - 1.0) * self.jitter[:, None]
        return out


# ---------------------------------------------------------------------------
# Generator families
# ---------------------------------------------------------------------------

DEFAULT_JITTER = 1e-9


def _family_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5EED, tag])


def _arc(m: int) -> np.ndarray:
    """m points on the cap y = 1 - (2x - 1)^2 over [0, 1]; all on the upper hull."""
    x = np.linspace(0.0, 1.0, m)
    return np.column_stack([x, 1.0 - (2.0 * x - 1.0) ** 2])


def _check_even(n: int) -> None:
    if n < 4 or n % 2:
        raise InvalidInputError("n must be even and >= 4")


def _lower_group(m: int) -> np.ndarray:
    # spread over x in (0, 1) and y in [-1, -0.5]; golden-ratio offsets keep
    # the layout deterministic without sharing x-coordinates with the arc
    j = np.arange(m)
    x = (j + 0.5) / m
    y = -0.5 - 0.5 * ((j * 0.6180339887498949) % 1.0)
    return np.column_stack([x, y])


def bad_hull_distribution_easy(n: int, seed: int = 0, jitter: float = DEFAULT_JITTER
                               ) -> ProductDistribution:
    """Half the indices fixed on a convex cap, half uniform over points far below it."""
    _check_even(n)
    m = n // 2
    upper = _arc(m)
    lower = _lower_group(m)
    comps = [fixed_point(x, y, jitter) for x, y in upper]
    comps += [discrete_mixture(lower, jitter=jitter) for _ in range(m)]
    return ProductDistribution(comps, seed, "bad_hull_easy")


def hard_lower_points(upper: np.ndarray, eps: float) -> np.ndarray:
    """One point under the midpoint of each edge of the cap.

    The depth is ``eps`` times the edge height, taken as the vertical gap at
    the edge midpoint between the edge and the next lower chord of the cap
    (``2 h^2`` for spacing ``h`` on this parabola), so only the edge's own
    endpoints form a witness pair from the cap.
    """
    h = upper[1, 0] - upper[0, 0]
    mid = 0.5 * (upper[:-1] + upper[1:])
    mid[:, 1] -= eps * 2.0 * h * h
    return mid


def bad_hull_distribution_hard(n: int, seed: int = 0, eps: float = 1e-3,
                               jitter: float = DEFAULT_JITTER) -> ProductDistribution:
    """Like the easy family but every lower point sits just under a cap edge."""
    _check_even(n)
    m = n // 2
    upper = _arc(m)
    lower = hard_lower_points(upper, eps)
    h = upper[1, 0] - upper[0, 0]
    jitter = min(jitter, eps * 2.0 * h * h / 8.0)
    comps = [fixed_point(x, y, jitter) for x, y in upper]
    comps += [discrete_mixture(lower, jitter=jitter) for _ in range(m)]
    return ProductDistribution(comps, seed, "bad_hull_hard")


def bad_hull_distribution_doubled(n: int, seed: int = 0, eps: float = 1e-3,
                                  jitter: float = DEFAULT_JITTER) -> ProductDistribution:
    """Lower points drawn from both the easy and the hard positions."""
    _check_even(n)
    m = n // 2
    upper = _arc(m)
    lower = np.vstack([_lower_group(m), hard_lower_points(upper, eps)])
    h = upper[1, 0] - upper[0, 0]
    jitter = min(jitter, eps * 2.0 * h * h / 8.0)
    comps = [fixed_point(x, y, jitter) for x, y in upper]
    comps += [discrete_mixture(lower, jitter=jitter) for _ in range(m)]
    return ProductDistribution(comps, seed, "bad_hull_doubled")


def bad_maxima_dependency(n: int, seed: int = 0, jitter: float = DEFAULT_JITTER
                          ) -> ProductDistribution:
    """Index 0 is either far up-right (dominating all) or far down-left; the rest
    form a staircase that is maximal exactly when index 0 is low."""
    if n < 3:
        raise InvalidInputError("n must be >= 3")
    high = np.array([[2.0, 2.0], [-1.0, -1.0]])
    comps = [discrete_mixture(high, [0.5, 0.5], jitter=jitter)]
    for i in range(1, n):
        t = i / n
        comps.append(fixed_point(t, 1.0 - t, jitter))
    return ProductDistribution(comps, seed, "bad_maxima_dependency")


def maxima_easy_analog(n: int, seed: int = 0, jitter: float = DEFAULT_JITTER
                       ) -> ProductDistribution:
    """Maxima counterpart of the easy hull family: a fixed staircase of n/2
    maximal points and n/2 indices uniform over points dominated by all of it."""
    _check_even(n)
    m = n // 2
    t = (np.arange(m) + 0.5) / m
    comps = [fixed_point(1.0 + ti, 2.0 - ti, jitter) for ti in t]
    lower = _lower_group(m)
    lower = np.column_stack([0.9 * lower[:, 0], 0.9 * (lower[:, 1] + 1.0) / 0.5])
    comps += [discrete_mixture(lower, jitter=jitter) for _ in range(m)]
    return ProductDistribution(comps, seed, "maxima_easy")


def uniform_square(n: int, seed: int = 0) -> ProductDistribution:
    """Every index uniform on its own random sub-square of the unit square."""
    rng = _family_rng(seed, 1)
    lo = rng.random((n, 2)) * 0.8
    side = 0.05 + 0.15 * rng.random(n)
    comps = [uniform_rect(x, y, x + s, y + s) for (x, y), s in zip(lo, side)]
    return ProductDistribution(comps, seed, "uniform")


def gaussian_blobs(n: int, seed: int = 0) -> ProductDistribution:
    rng = _family_rng(seed, 2)
    angle = rng.random(n) * np.pi
    radius = 0.6 + 0.4 * rng.random(n)
    centers = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    comps = []
    for c in centers:
        s = 0.01 + 0.04 * rng.random()
        comps.append(gaussian_blob(c, [[s * s, 0.0], [0.0, s * s]]))
    return ProductDistribution(comps, seed, "gaussian")


def fixed_points(n: int, seed: int = 0, jitter: float = DEFAULT_JITTER) -> ProductDistribution:
    rng = _family_rng(seed, 3)
    pts = rng.random((n, 2))
    return ProductDistribution([fixed_point(x, y, jitter) for x, y in pts], seed, "fixed")


def random_segments(n: int, seed: int = 0, jitter: float = DEFAULT_JITTER) -> ProductDistribution:
    rng = _family_rng(seed, 4)
    start = rng.random((n, 2))
    end = start + 0.1 * (rng.random((n, 2)) - 0.5)
    return ProductDistribution([segment_uniform(a, b, jitter) for a, b in zip(start, end)],
                               seed, "segments")


FAMILIES: dict[str, Callable[..., ProductDistribution]] = {
    "uniform": uniform_square,
    "gaussian": gaussian_blobs,
    "fixed": fixed_points,
    "segments": random_segments,
    "bad_hull_easy": bad_hull_distribution_easy,
    "bad_hull_hard": bad_hull_distribution_hard,
    "bad_hull_doubled": bad_hull_distribution_doubled,
    "bad_maxima_dependency": bad_maxima_dependency,
    "maxima_easy": maxima_easy_analog,
}


def make_family(name: str, n: int, seed: int = 0) -> ProductDistribution:
    try:
        builder = FAMILIES[name]
    except KeyError:
        raise InvalidInputError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    return builder(n, seed=seed)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def distribution_to_json(d: ProductDistribution) -> str:
    tables: list[list] = []
    table_ids: dict[int, int] = {}

    def table(arr) -> int:
        key = id(arr)
        if key not in table_ids:
            table_ids[key] = len(tables)
            tables.append(np.asarray(arr).tolist())
        return table_ids[key]

    comps = []
    for c in d.components:
        entry: dict = {"kind": c.kind}
        if c.jitter:
            entry["jitter"] = c.jitter
        p = c.params
        if c.kind == "FixedPoint":
            entry["point"] = p["point"].tolist()
        elif c.kind == "UniformRect":
            entry["lo"], entry["hi"] = p["lo"].tolist(), p["hi"].tolist()
        elif c.kind == "GaussianBlob":
            entry["mean"], entry["cov"] = p["mean"].tolist(), p["cov"].tolist()
        elif c.kind == "DiscreteMixture":
            entry["support"] = table(p["support"])
            if p["weights"] is not None:
                entry["weights"] = table(p["weights"])
        else:
            entry["start"], entry["end"] = p["start"].tolist(), p["end"].tolist()
        comps.append(entry)
    doc = {"name": d.name, "seed": d.seed, "n": d.n, "tables": tables, "components": comps}
    return json.dumps(doc, separators=(",", ":"))


def distribution_from_json(text: str) -> ProductDistribution:
    doc = json.loads(text)
    tables = [np.asarray(t, float) for t in doc.get("tables", [])]
    shared: dict[tuple, tuple] = {}
    comps = []
    for e in doc["components"]:
        kind = e["kind"]
        jitter = float(e.get("jitter", 0.0))
        if kind == "FixedPoint":
            comps.append(fixed_point(*e["point"], jitter=jitter))
        elif kind == "UniformRect":
            comps.append(uniform_rect(*e["lo"], *e["hi"]))
        elif kind == "GaussianBlob":
            comps.append(gaussian_blob(e["mean"], e["cov"]))
        elif kind == "DiscreteMixture":
            key = (e["support"], e.get("weights"), jitter)
            if key not in shared:
                w = None if e.get("weights") is None else tables[e["weights"]]
                shared[key] = discrete_mixture(tables[e["support"]], w, jitter)
            comps.append(shared[key])
        elif kind == "SegmentUniform":
            comps.append(segment_uniform(e["start"], e["end"], jitter))
        else:
            raise InvalidInputError(f"unknown component kind {kind!r}")
    return ProductDistribution(comps, doc.get("seed", 0), doc.get("name", "custom"))


def instance_to_text(points: np.ndarray) -> str:
    return "".join(f"{float(x)!r} {float(y)!r}\n" for x, y in np.asarray(points, float))


def instance_from_text(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    for r in rows:
        if len(r) != 2:
            raise InvalidInputError(f"expected 'x y' per line, got {' '.join(r)!r}")
    return np.array([[float(a), float(b)] for a, b in rows], float).reshape(-1, 2)


def instance_to_bytes(points: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(points, dtype="<f8").reshape(-1, 2)
    return struct.pack("<Q", len(arr)) + arr.tobytes()


def instance_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise InvalidInputError("binary instance shorter than its header")
    (n,) = struct.unpack("<Q", data[:8])
    if len(data) != 8 + 16 * n:
        raise InvalidInputError(f"binary instance declares {n} points but has {len(data) - 8} bytes")
    return np.frombuffer(data, dtype="<f8", offset=8).reshape(n, 2).astype(float)
