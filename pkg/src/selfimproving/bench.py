"""Learning and limiting phases end to end: persistence, baselines, metrics.

Instance counters are split into disjoint ranges so that training,
evaluation and entropy estimation never reuse a draw:

* ``0 ..``           learning instances
* ``LIMIT_BASE ..``  one instance per trial
* ``ENTROPY_BASE ..`` samples for the entropy proxy
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .certificates import (HullCertificate, MaximaCertificate, certificate_from_json,
                           verify_hull_certificate, verify_maxima_certificate)
from .distributions import (FAMILIES, ProductDistribution, distribution_from_json,
                            distribution_to_json, instance_from_bytes, instance_from_text,
                            make_family)
from .errors import ContractViolation, InvalidInputError, StaleStructuresError
from .geometry import OpCounter, maxima_sweep_xy, upper_hull_indices
from .hull import (HullStructures, hull_structures_from_dict, hull_structures_to_dict,
                   learn_hull_structures, run_hull)
from .hull_learning import HullParams
from .maxima import DEFAULT_FREQ_CAP, MaximaStructures, learn_maxima_structures, run_maxima
from .search_trees import LearningConstants, SearchTree
from .slabs import SlabStructure, default_slab_samples

LIMIT_BASE = 2**40
ENTROPY_BASE = 2**41
PROBLEMS = ("maxima", "hull")
CSV_COLUMNS = ("problem", "family", "n", "trials", "rounds_per_n", "cmp_per_n",
               "baseline_cmp_per_nlogn", "entropy_proxy_per_n", "fallback_rate")


@dataclass
class BenchConfig:
    problem: str = "maxima"
    family: str | None = "uniform"
    dist_file: str | None = None
    n: int = 256
    seed: int = 0
    epsilon: float = 0.5
    c: float = 8.0
    delta: float = 0.5
    t_slabs: int | None = None
    t_freq: int | None = None
    freq_cap: int | None = DEFAULT_FREQ_CAP
    level_param: int | None = None
    spacing: int | None = None
    tail: int | None = None
    gamma: float = 0.25
    trials: int = 10
    entropy_samples: int = 100

    def validate(self) -> "BenchConfig":
        if self.problem not in PROBLEMS:
            raise InvalidInputError(f"problem must be one of {PROBLEMS}")
        if (self.family is None) == (self.dist_file is None):
            raise InvalidInputError("give exactly one of a family or a distribution file")
        if self.family is not None and self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        if not 0 < self.epsilon <= 1:
            raise InvalidInputError("epsilon must lie in (0, 1]")
        for name in ("n", "trials", "t_slabs", "t_freq", "freq_cap", "spacing", "entropy_samples"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        return self

    @property
    def constants(self) -> LearningConstants:
        return LearningConstants(self.c, self.delta, self.epsilon)

    @property
    def hull_params(self) -> HullParams:
        return HullParams(self.level_param, self.spacing, self.tail, self.c, self.gamma)

    def distribution(self) -> ProductDistribution:
        if self.dist_file is not None:
            try:
                d = distribution_from_json(Path(self.dist_file).read_text())
            except OSError as exc:
                raise InvalidInputError(f"cannot read {self.dist_file}: {exc}") from exc
            if d.n != self.n:
                raise InvalidInputError(f"{self.dist_file} has n={d.n}, config says n={self.n}")
            return d
        return make_family(self.family, self.n, self.seed)

    def learning_hash(self, d: ProductDistribution) -> str:
        """Digest of everything the learned structures depend on."""
        keys = ["problem", "n", "seed", "epsilon", "c", "delta", "t_slabs", "t_freq", "freq_cap"]
        if self.problem == "hull":
            keys += ["level_param", "spacing", "tail", "gamma"]
        doc = {k: getattr(self, k) for k in keys}
        doc["distribution"] = _sha(distribution_to_json(d).encode())
        return _sha(json.dumps(doc, sort_keys=True).encode())


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------


def learn(config: BenchConfig, d: ProductDistribution | None = None):
    """Learned structures for ``config`` (in memory)."""
    d = d or config.distribution()
    if config.problem == "maxima":
        return learn_maxima_structures(d, config.constants, config.t_slabs, config.t_freq,
                                       config.freq_cap)
    return learn_hull_structures(d, config.hull_params, config.constants, config.t_freq,
                                 config.freq_cap)


def structures_to_dict(st) -> dict:
    if isinstance(st, MaximaStructures):
        return {"problem": "maxima", "boundaries": st.slabs.boundaries.tolist(),
                "trees": [t.to_dict() for t in st.trees]}
    doc = hull_structures_to_dict(st)
    doc["problem"] = "hull"
    return doc


def structures_from_dict(doc: dict):
    if doc["problem"] == "maxima":
        return MaximaStructures(SlabStructure(doc["boundaries"]),
                                [SearchTree.from_dict(t) for t in doc["trees"]])
    return hull_structures_from_dict(doc)


def _summary(st) -> dict:
    if isinstance(st, MaximaStructures):
        return {"leaf_count": st.slabs.leaf_count, "boundaries": len(st.slabs.boundaries),
                "trees": len(st.trees), "tree_nodes": sum(t.node_count for t in st.trees)}
    if st.hull is None:
        return {"canonical_hull": None, "trees": 0}
    return {"directions": st.hull.k, "edges": st.hull.edge_count, "trees": len(st.trees),
            "tree_nodes": sum(t.node_count for t in st.trees)}


def cmd_learn(config: BenchConfig, out_dir) -> dict:
    """Learn and write ``distribution.json``, ``structures.json``, ``manifest.json``."""
    config.validate()
    d = config.distribution()
    st = learn(config, d)
    out = Path(out_dir)
    files = {
        "distribution.json": distribution_to_json(d).encode(),
        "structures.json": json.dumps(structures_to_dict(st), separators=(",", ":")).encode(),
    }
    manifest = {"problem": config.problem, "n": config.n,
                "config_hash": config.learning_hash(d),
                "config": asdict(config),
                "files": {name: _sha(data) for name, data in files.items()},
                "summary": _summary(st)}
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, data in files.items():
            (out / name).write_bytes(data)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write structures to {out}: {exc}") from exc
    return manifest


def load_structures(config: BenchConfig, in_dir):
    """Read structures written by :func:`cmd_learn`, refusing stale ones."""
    src = Path(in_dir)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
        blobs = {name: (src / name).read_bytes() for name in manifest["files"]}
    except OSError as exc:
        raise OSError(f"cannot read structures from {src}: {exc}") from exc
    for name, digest in manifest["files"].items():
        if _sha(blobs[name]) != digest:
            raise StaleStructuresError(f"{src / name} does not match its manifest digest")
    d = distribution_from_json(blobs["distribution.json"].decode())
    if manifest["config_hash"] != config.learning_hash(config.distribution()) or manifest["problem"] != config.problem:
        raise StaleStructuresError(f"structures in {src} were learned with a different configuration")
    return d, structures_from_dict(json.loads(blobs["structures.json"]))


# ---------------------------------------------------------------------------
# Baselines and entropy proxy
# ---------------------------------------------------------------------------


def _scrambled(n: int) -> list[int]:
    # generators often emit points in x order, which an adaptive sort would exploit
    return np.random.default_rng(n).permutation(n).tolist()


def baseline_maxima(points) -> tuple[MaximaCertificate, int]:
    """Sort-and-sweep maxima; returns the certificate and its comparison count."""
    c = OpCounter()
    xs, ys = points[:, 0].tolist(), points[:, 1].tolist()
    return maxima_sweep_xy(xs, ys, c, _scrambled(len(xs))), c.total


def baseline_hull(points) -> tuple[list[int], int]:
    """Monotone-chain upper hull with its comparison count."""
    c = OpCounter()
    xs, ys = points[:, 0].tolist(), points[:, 1].tolist()
    return upper_hull_indices(xs, ys, _scrambled(len(xs)), c), c.total


def entropy_proxy(d: ProductDistribution, s: SlabStructure, samples: int = 100,
                  start: int = ENTROPY_BASE) -> float:
    """Sum over indices of the Shannon entropy (bits) of the empirical leaf slab."""
    if samples < 100:
        raise InvalidInputError("the entropy proxy needs at least 100 samples")
    leaves = np.empty((samples, d.n), np.int64)
    for k in range(samples):
        leaves[k] = s.locate_many(d.sample(start + k)[:, 0])
    leaves.sort(axis=0)
    # run lengths per column of the sorted leaf matrix
    change = np.ones((samples, d.n), bool)
    change[1:] = leaves[1:] != leaves[:-1]
    total = 0.0
    for col in change.T:
        starts = np.flatnonzero(col)
        counts = np.diff(np.append(starts, samples))
        p = counts / samples
        total -= float(np.sum(p * np.log2(p)))
    return total


def proxy_slabs(st) -> SlabStructure | None:
    if isinstance(st, MaximaStructures):
        return st.slabs
    return st.hull.slabs if st.hull is not None else None


# ---------------------------------------------------------------------------
# Limiting phase
# ---------------------------------------------------------------------------


def run_trial(problem: str, d: ProductDistribution, st, trial: int,
              entropy: float | None = None, debug: bool = False) -> dict:
    points = d.sample(LIMIT_BASE + trial)
    n = len(points)
    if problem == "maxima":
        cert, metrics = run_maxima(points, st, debug=debug)
        bad = verify_maxima_certificate(points, cert)
        _, base_cmp = baseline_maxima(points)
    else:
        cert, metrics = run_hull(points, st, debug=debug)
        bad = verify_hull_certificate(points, cert)
        _, base_cmp = baseline_hull(points)
    return {"trial": trial, "problem": problem, "n": n,
            "metrics": metrics.to_dict(),
            "baseline_comparisons": base_cmp,
            "oracle_agreement": bad is None,
            "violation": None if bad is None else str(bad),
            "entropy_proxy": entropy}


def cmd_run(config: BenchConfig, in_dir, out=None, trials: int | None = None,
            first_trial: int = 0):
    """Yield one record per trial, writing JSON lines to ``out`` if given.

    A record whose certificate fails verification raises ``ContractViolation``
    after it has been written.
    """
    config.validate()
    d, st = load_structures(config, in_dir)
    slabs = proxy_slabs(st)
    entropy = entropy_proxy(d, slabs, config.entropy_samples) if slabs is not None else None
    for t in range(first_trial, first_trial + (trials or config.trials)):
        rec = run_trial(config.problem, d, st, t, entropy)
        if out is not None:
            out.write(json.dumps(rec, sort_keys=True) + "\n")
        if not rec["oracle_agreement"]:
            raise ContractViolation(f"trial {t}: {rec['violation']}")
        yield rec


@dataclass
class BenchRow:
    problem: str
    family: str
    n: int
    trials: int
    rounds_per_n: float
    cmp_per_n: float
    baseline_cmp_per_nlogn: float
    entropy_proxy_per_n: float
    fallback_rate: float
    stddev: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def csv_values(self) -> list:
        return [getattr(self, k) for k in CSV_COLUMNS]


def bench_point(config: BenchConfig, trials: int | None = None) -> BenchRow:
    """Learn once for ``config``, then aggregate ``trials`` limiting runs."""
    config.validate()
    if config.family is None:
        raise InvalidInputError("bench needs a generator family")
    d = config.distribution()
    st = learn(config, d)
    slabs = proxy_slabs(st)
    n = config.n
    entropy = entropy_proxy(d, slabs, config.entropy_samples) if slabs is not None else 0.0
    recs = []
    for t in range(trials or config.trials):
        rec = run_trial(config.problem, d, st, t, entropy)
        if not rec["oracle_agreement"]:
            raise ContractViolation(f"trial {t}: {rec['violation']}")
        recs.append(rec)
    rounds = [r["metrics"]["rounds"] / n for r in recs]
    cmps = [r["metrics"]["comparisons"] / n for r in recs]
    base = [r["baseline_comparisons"] / (n * math.log2(n)) for r in recs]
    fb = [bool(r["metrics"].get("fallback_used", False)) for r in recs]

    def sd(v):
        return statistics.pstdev(v) if len(v) > 1 else 0.0

    extra = {}
    if config.problem == "hull":
        s7 = [r["metrics"]["step7_cost"] for r in recs]
        extra = {"step7_cost": statistics.fmean(s7),
                 "step7_per_nloglogn": statistics.fmean(s7) / (n * math.log2(max(2.0, math.log2(n)))),
                 "outside_count": statistics.fmean(r["metrics"]["outside_count"] for r in recs)}
    return BenchRow(config.problem, config.family, n, len(recs),
                    statistics.fmean(rounds), statistics.fmean(cmps), statistics.fmean(base),
                    entropy / n, sum(fb) / len(fb),
                    {"rounds_per_n": sd(rounds), "cmp_per_n": sd(cmps),
                     "baseline_cmp_per_nlogn": sd(base)}, extra)


def cmd_bench(config: BenchConfig, ladder, trials: int | None = None, out=None) -> list[BenchRow]:
    """One :class:`BenchRow` per ``n`` in ``ladder``; CSV to ``out`` if given."""
    rows = []
    for n in ladder:
        cfg = BenchConfig(**{**asdict(config), "n": int(n)})
        rows.append(bench_point(cfg, trials))
    if out is not None:
        out.write(rows_to_csv(rows))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def load_instance(path) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".bin":
        return instance_from_bytes(p.read_bytes())
    return instance_from_text(p.read_text())


def cmd_verify(instance_path, cert_path, err=None) -> int:
    """0 when the certificate is valid, 1 on a violation, 2 on unusable input."""
    def say(msg):
        if err is not None:
            err.write(msg + "\n")

    try:
        points = load_instance(instance_path)
        cert = certificate_from_json(Path(cert_path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        say(f"error: {exc}")
        return EXIT_USAGE
    n = len(points)
    if isinstance(cert, MaximaCertificate):
        used = list(cert.maximal_indices) + list(cert.witnesses) + list(cert.witnesses.values())
        covered = len(cert.maximal_indices) + len(cert.witnesses)
    else:
        used = list(cert.extremal_indices) + list(cert.witness_pairs)
        used += [v for pair in cert.witness_pairs.values() for v in pair]
        covered = len(cert.extremal_indices) + len(cert.witness_pairs)
    if covered != n or any(not 0 <= i < n for i in used):
        say(f"error: certificate covers {covered} points but the instance has {n}")
        return EXIT_USAGE
    if isinstance(cert, HullCertificate):
        bad = verify_hull_certificate(points, cert)
    else:
        bad = verify_maxima_certificate(points, cert)
    if bad is not None:
        say(f"violation: {bad}")
        return EXIT_VIOLATION
    return EXIT_OK


def constants_report(n: int, constants: LearningConstants | None = None,
                           params: HullParams | None = None) -> str:
    """The learning formulas with their values at ``n``."""
    k = constants or LearningConstants()
    p = params or HullParams()
    lg = math.log2(n)
    level, spacing, tail = p.resolve(n)
    lines = [
        f"n = {n}, log2 n = {lg:.4g}",
        f"slab instances        ceil(log2 n)                      = {default_slab_samples(n)}",
        f"frequency instances   ceil(c delta^-2 n^eps log2 n)     = {k.t_freq(n)}"
        f"   (c={k.c}, delta={k.delta}, eps={k.eps})",
        f"min training hits     ceil(c / (10 e delta^2) log2 n)   = {k.min_count(n)}",
        f"learned depth cap     ceil(eps log2 n)                  = {k.depth_cap(n)}",
        f"level parameter       min(ceil(log2^4 n), n // 4)       = {level}",
        f"direction spacing     ceil(log2^2 n)                    = {spacing}",
        f"line tail             ceil(gamma c log2 n)              = {tail}   (gamma={p.gamma})",
        f"asymptotic directions n / log2^2 n                      = {n / lg**2:.4g}",
    ]
    return "\n".join(lines)


def write_text(path, text: str) -> None:
    """UTF-8, LF endings."""
    with open(os.fspath(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
