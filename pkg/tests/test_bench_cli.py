"""Bench harness and command line: persistence, records, CSV, verify and generators."""

import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import selfimproving.bench as bench
from selfimproving.bench import (CSV_COLUMNS, BenchConfig, baseline_hull, baseline_maxima,
                                 cmd_bench, cmd_learn, cmd_run, cmd_verify, entropy_proxy,
                                 load_structures, constants_report, rows_to_csv)
from selfimproving.certificates import HullCertificate, Violation, certificate_to_json
from selfimproving.cli import main
from selfimproving.distributions import (ProductDistribution, fixed_point, instance_from_bytes,
                                         instance_from_text, instance_to_text, make_family,
                                         uniform_rect)
from selfimproving.errors import ContractViolation, InvalidInputError, StaleStructuresError
from selfimproving.geometry import maxima_sweep, upper_hull_monotone, witnesses_from_hull
from selfimproving.slabs import SlabStructure


def _cfg(**kw):
    base = dict(problem="maxima", family="uniform", n=64, trials=3)
    base.update(kw)
    return BenchConfig(**base)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        _cfg(problem="sorting").validate()
    with pytest.raises(InvalidInputError):
        _cfg(family=None).validate()
    with pytest.raises(InvalidInputError):
        _cfg(dist_file="x.json").validate()
    with pytest.raises(InvalidInputError):
        _cfg(epsilon=0).validate()
    with pytest.raises(InvalidInputError):
        _cfg(trials=0).validate()


def test_maxima_learn_manifest(tmp_path):
    m = cmd_learn(_cfg(n=256), tmp_path)
    assert m["summary"]["trees"] == 256
    assert m["summary"]["leaf_count"] == m["summary"]["boundaries"] + 1
    assert set(m["files"]) == {"distribution.json", "structures.json"}
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["config_hash"] == m["config_hash"]
    doc = json.loads((tmp_path / "structures.json").read_text())
    assert len(doc["boundaries"]) == m["summary"]["boundaries"]


def test_hull_learn_direction_count(tmp_path):
    cfg = _cfg(problem="hull", family="fixed", n=256)
    m = cmd_learn(cfg, tmp_path)
    spacing = cfg.hull_params.resolve(256)[1]
    k = m["summary"]["directions"]
    # every spacing-th of at most two meetings per dual line
    assert 2 <= k <= math.ceil(2 * 256 / spacing) + 1
    assert m["summary"]["trees"] == 256


def test_learning_is_byte_identical(tmp_path):
    for problem in ("maxima", "hull"):
        a, b = tmp_path / f"{problem}a", tmp_path / f"{problem}b"
        cmd_learn(_cfg(problem=problem), a)
        cmd_learn(_cfg(problem=problem), b)
        for name in ("distribution.json", "structures.json", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_stale_structures_detected(tmp_path):
    cmd_learn(_cfg(), tmp_path)
    load_structures(_cfg(), tmp_path)
    with pytest.raises(StaleStructuresError):
        load_structures(_cfg(seed=1), tmp_path)
    with pytest.raises(StaleStructuresError):
        load_structures(_cfg(problem="hull"), tmp_path)
    with pytest.raises(StaleStructuresError):
        load_structures(_cfg(t_freq=50), tmp_path)
    doc = json.loads((tmp_path / "structures.json").read_text())
    doc["boundaries"][0] += 1e-3
    (tmp_path / "structures.json").write_text(json.dumps(doc))
    with pytest.raises(StaleStructuresError):
        load_structures(_cfg(), tmp_path)


@pytest.mark.parametrize("problem", ["maxima", "hull"])
def test_run_records(tmp_path, problem):
    cfg = _cfg(problem=problem, family="gaussian", trials=100)
    cmd_learn(cfg, tmp_path)
    out = io.StringIO()
    recs = list(cmd_run(cfg, tmp_path, out))
    assert len(recs) == 100 and all(r["oracle_agreement"] for r in recs)
    lines = out.getvalue().splitlines()
    assert [json.loads(l) for l in lines] == recs
    assert {"trial", "metrics", "baseline_comparisons", "entropy_proxy"} <= set(recs[0])


def test_run_aborts_on_disagreement(tmp_path, monkeypatch):
    cfg = _cfg(trials=5)
    cmd_learn(cfg, tmp_path)
    monkeypatch.setattr(bench, "verify_maxima_certificate",
                        lambda pts, cert: Violation("b", (0, 1), "forced"))
    out = io.StringIO()
    with pytest.raises(ContractViolation):
        list(cmd_run(cfg, tmp_path, out))
    assert len(out.getvalue().splitlines()) == 1  # the failing record is still written
    code = main(["run", "--n", "64", "--structures", str(tmp_path), "--trials", "2",
                 "--out", str(tmp_path / "r.jsonl")])
    assert code == 1


def test_baselines_scale_like_n_log_n():
    ratios_m, ratios_h = [], []
    for n in (2**8, 2**10, 2**12):
        pts = make_family("uniform", n, 0).sample(0)
        cert, cm = baseline_maxima(pts)
        hull, ch = baseline_hull(pts)
        assert cert.maximal_indices == maxima_sweep(pts).maximal_indices
        assert hull == upper_hull_monotone(pts)
        ratios_m.append(cm / (n * math.log2(n)))
        ratios_h.append(ch / (n * math.log2(n)))
    for r in (ratios_m, ratios_h):
        assert max(r) / min(r) <= 1.15


def test_bench_csv_shape_and_determinism(tmp_path):
    cfg = _cfg(trials=2, entropy_samples=100)
    rows = cmd_bench(cfg, [32, 64])
    text = rows_to_csv(rows)
    assert "\r" not in text and text.endswith("\n")
    table = list(csv.reader(io.StringIO(text)))
    assert tuple(table[0]) == CSV_COLUMNS and len(CSV_COLUMNS) == 9
    assert all(len(r) == 9 for r in table)
    assert [int(r[2]) for r in table[1:]] == [32, 64]
    assert rows_to_csv(cmd_bench(cfg, [32, 64])) == text


@pytest.mark.parametrize("problem", ["maxima", "hull"])
@pytest.mark.parametrize("family", ["uniform", "fixed", "bad_hull_easy", "bad_maxima_dependency"])
def test_entropy_proxy_tracks_comparisons(problem, family):
    row = bench.bench_point(_cfg(problem=problem, family=family, n=256, trials=3))
    assert row.entropy_proxy_per_n <= row.cmp_per_n + 2
    assert row.fallback_rate == 0


def test_entropy_proxy_analytic_values():
    fixed = ProductDistribution([fixed_point(x, x) for x in np.linspace(0, 1, 30)])
    s = SlabStructure(np.linspace(0, 1, 30)[1::3])
    assert entropy_proxy(fixed, s, 100) == 0.0
    n = 50
    halves = ProductDistribution([uniform_rect(0, 0, 1, 1)] * n, seed=1)
    value = entropy_proxy(halves, SlabStructure([0.5]), 2000)
    assert abs(value - n) <= 0.01 * n
    with pytest.raises(InvalidInputError):
        entropy_proxy(halves, SlabStructure([0.5]), 99)


@pytest.mark.xfail(strict=True, reason="per-index leaf entropy of the lower group grows like log n")
def test_entropy_proxy_linear_on_easy_hull_family():
    per_n = []
    for n in (256, 1024):
        cfg = _cfg(problem="hull", family="bad_hull_easy", n=n)
        st = bench.learn(cfg, cfg.distribution())
        per_n.append(entropy_proxy(cfg.distribution(), bench.proxy_slabs(st), 100) / n)
    assert max(per_n) / min(per_n) <= 1.25


def test_verify_exit_codes(tmp_path, capsys):
    pts = make_family("uniform", 20, 0).sample(0)
    inst = tmp_path / "inst.txt"
    inst.write_text(instance_to_text(pts))
    xs, ys = pts[:, 0].tolist(), pts[:, 1].tolist()
    hull = upper_hull_monotone(pts)
    good = HullCertificate(hull, witnesses_from_hull(xs, ys, hull))
    cert = tmp_path / "cert.json"
    cert.write_text(certificate_to_json(good))
    assert cmd_verify(inst, cert) == 0
    assert main(["verify", str(inst), str(cert)]) == 0
    p = next(iter(good.witness_pairs))
    q, r = good.witness_pairs[p]
    bad = HullCertificate(hull, {**good.witness_pairs, p: (r, q)})
    cert.write_text(certificate_to_json(bad))
    err = io.StringIO()
    assert cmd_verify(inst, cert, err) == 1
    assert str(p) in err.getvalue() and "violation" in err.getvalue()
    small = tmp_path / "small.txt"
    small.write_text(instance_to_text(pts[:10]))
    cert.write_text(certificate_to_json(maxima_sweep(pts)))
    assert cmd_verify(small, cert) == 2
    assert cmd_verify(tmp_path / "missing.txt", cert) == 2
    assert main(["verify", str(small), str(cert)]) == 2


def test_gen_dist(tmp_path):
    out = tmp_path / "d.json"
    assert main(["gen-dist", "--family", "bad_hull_easy", "--n", "16", "--out", str(out),
                 "--instances", "2"]) == 0
    doc = json.loads(out.read_text())
    assert doc["n"] == 16 and len(doc["components"]) == 16
    d = make_family("bad_hull_easy", 16, 0)
    assert np.array_equal(instance_from_text((tmp_path / "d_1.txt").read_text()), d.sample(1))
    assert main(["gen-dist", "--family", "uniform", "--n", "8", "--out", str(out),
                 "--instances", "1", "--binary"]) == 0
    assert instance_from_bytes((tmp_path / "d_0.bin").read_bytes()).shape == (8, 2)


def test_dist_file_round_trip_through_cli(tmp_path):
    dist = tmp_path / "dist.json"
    main(["gen-dist", "--family", "segments", "--n", "32", "--seed", "4", "--out", str(dist)])
    assert main(["learn", "--dist-file", str(dist), "--n", "32", "--out", str(tmp_path / "s")]) == 0
    assert main(["run", "--dist-file", str(dist), "--n", "32", "--structures",
                 str(tmp_path / "s"), "--trials", "3", "--out", str(tmp_path / "r.jsonl")]) == 0
    recs = [json.loads(l) for l in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert len(recs) == 3 and all(r["oracle_agreement"] for r in recs)
    # size mismatch between file and flags is a usage error
    assert main(["learn", "--dist-file", str(dist), "--n", "16", "--out", str(tmp_path / "t")]) == 2


def test_cli_stale_exit_code(tmp_path):
    s = str(tmp_path / "s")
    assert main(["learn", "--problem", "hull", "--n", "64", "--out", s]) == 0
    assert main(["run", "--problem", "hull", "--n", "64", "--seed", "5", "--structures", s,
                 "--trials", "1"]) == 3


def test_cli_bench_writes_csv_and_json(tmp_path):
    out, js = tmp_path / "b.csv", tmp_path / "b.json"
    assert main(["bench", "--problem", "hull", "--family", "fixed", "--ladder", "32,64",
                 "--trials", "2", "--out", str(out), "--json", str(js)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert [r["n"] for r in rows] == ["32", "64"]
    doc = json.loads(js.read_text())
    assert {"stddev", "extra"} <= set(doc[0]) and "step7_cost" in doc[0]["extra"]


def test_paper_constants(capsys):
    text = constants_report(256)
    assert "= 4096" in text and "= 8" in text
    assert main(["learn", "--n", "256", "--paper-constants"]) == 0
    assert "frequency instances" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "selfimproving", "gen-dist", "--family", "fixed",
                        "--n", "4", "--out", str(tmp_path / "f.json")], capture_output=True)
    assert r.returncode == 0 and (tmp_path / "f.json").exists()
