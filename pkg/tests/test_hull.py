"""Hull engine: location cases, construction, fallback and oracle agreement."""

import json
import math

import numpy as np
import pytest

from oracles import argmax_direction, hull_by_supporting_pairs
from selfimproving.certificates import verify_c_certificate, verify_hull_certificate
from selfimproving.distributions import FAMILIES, make_family
from selfimproving.errors import InvalidInputError
from selfimproving.geometry import upper_hull_monotone
from selfimproving.hull import (BELOW, IN_PENCIL, OUTSIDE, HullStructures, LocationRun,
                                c_certificate, construct_hull, fallback_hull,
                                hull_structures_from_dict, hull_structures_to_dict,
                                learn_hull_structures, locate_points, run_hull)
from selfimproving.hull_learning import CanonicalHull
from selfimproving.search_trees import SearchTree


def _fixed_structures(ch, n):
    return HullStructures(ch, [SearchTree.balanced(ch.edge_count)] * n, n)


def test_two_line_walkthrough():
    # C is the wedge below y = x and y = -x; the apex (0, 0) is its only vertex
    ch = CanonicalHull([1.0, -1.0], [0.0, 0.0])
    pts = np.array([[0.0, 1.0], [-1.0, -3.0], [1.0, -3.0], [0.2, -0.5]])
    loc = locate_points(pts, _fixed_structures(ch, 4), debug=True)
    assert loc.outcomes[0].kind == OUTSIDE and (loc.outcomes[0].lo, loc.outcomes[0].hi) == (0, 1)
    assert loc.candidates == [0, 0]
    pen = loc.pencils[0]
    assert pen.a1 is None and pen.a2 is None
    assert loc.violations == []
    cert, metrics = run_hull(pts, _fixed_structures(ch, 4))
    assert cert.extremal_indices == [1, 0, 2]
    assert verify_hull_certificate(pts, cert) is None
    assert not metrics.extra["fallback_used"]


def test_far_below_point_stops_by_case1():
    ch = CanonicalHull([2.0, 1.0, 0.0, -1.0, -2.0], [2.0, 1.5, 1.25, 1.5, 2.0])
    assert ch.edge_count == 5
    x = 0.5 * (ch.vx[1] + ch.vx[2])  # inside leaf 2, the middle edge
    pts = np.array([[x, -100.0]])
    st = _fixed_structures(ch, 1)
    run = LocationRun(pts, st)
    loc = run.run()
    assert loc.outcomes[0].kind == BELOW
    assert run.cursors[0].steps <= st.trees[0].full_depth()
    assert loc.cases["case1"] == 1


def test_fallback_when_lines_are_empty():
    # every canonical line lies far above the input, so no candidate can be above it
    ch = CanonicalHull([1.0, 0.0, -1.0], [10.0, 9.5, 10.0])
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (30, 2))
    cert, metrics = run_hull(pts, _fixed_structures(ch, 30))
    assert cert.fallback_used and metrics.extra["fallback_used"]
    assert "no candidate" in metrics.extra["fallback_reason"]
    assert verify_hull_certificate(pts, cert) is None


def test_outside_limit_forces_fallback():
    d = make_family("bad_hull_easy", 64, 1)
    st = learn_hull_structures(d, freq_samples=100)
    pts = d.sample(99)
    cert, metrics = run_hull(pts, st, outside_limit=0)
    assert metrics.extra["outside_count"] > 0 and cert.fallback_used
    assert verify_hull_certificate(pts, cert) is None


def test_unusable_structures_fall_back():
    st = HullStructures(None, [], 5)
    pts = np.random.default_rng(1).uniform(size=(5, 2))
    cert, metrics = run_hull(pts, st)
    assert cert.fallback_used and metrics.extra["fallback_reason"] == "no canonical hull"
    with pytest.raises(InvalidInputError):
        run_hull(pts[:4], st)


def test_fallback_hull_is_valid():
    rng = np.random.default_rng(2)
    for _ in range(20):
        pts = rng.integers(0, 5, (25, 2)).astype(float)
        cert = fallback_hull(pts)
        assert verify_hull_certificate(pts, cert) is None


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_oracle_agreement_and_debug_checks(name):
    n = 32
    d = make_family(name, n, 3)
    st = learn_hull_structures(d, freq_samples=200)
    for k in range(8):
        pts = d.sample(5000 + k)
        cert, metrics = run_hull(pts, st, debug=True)
        assert verify_hull_certificate(pts, cert) is None
        assert cert.extremal_indices == hull_by_supporting_pairs(pts)
        assert metrics.extra.get("violations", []) == []


@pytest.mark.parametrize("name", ["bad_hull_easy", "bad_hull_hard", "uniform", "gaussian"])
def test_debug_checks_at_256(name):
    d = make_family(name, 256, 4)
    st = learn_hull_structures(d, freq_samples=300)
    for k in range(3):
        pts = d.sample(7000 + k)
        cert, metrics, loc = run_hull(pts, st, debug=True, return_location=True)
        assert loc.violations == []
        assert cert.extremal_indices == upper_hull_monotone(pts)


def test_candidates_are_true_argmax_when_lines_populated():
    d = make_family("gaussian", 128, 5)
    st = learn_hull_structures(d, freq_samples=300)
    ch = st.hull
    checked = 0
    for k in range(5):
        pts = d.sample(300 + k)
        populated = all(any(ch.above_direction(v, x, y) for x, y in pts) for v in range(ch.k))
        if not populated:
            continue
        loc = locate_points(pts, st)
        assert loc.candidates == [argmax_direction(pts, m) for m in ch.slopes]
        checked += 1
    assert checked


def test_all_below_except_candidates_skips_step7():
    # tangents to the cap lowered a little: only cap points are outside C
    t = np.linspace(-1, 1, 9)
    cap = np.column_stack([t, -t * t])
    lines_m = -2 * t
    lines_c = t * t - 1e-9
    ch = CanonicalHull(lines_m, lines_c)
    inner = np.column_stack([np.linspace(-0.9, 0.9, 7), np.full(7, -2.0)])
    pts = np.vstack([cap, inner])
    loc = locate_points(pts, _fixed_structures(ch, len(pts)))
    cert, report = construct_hull(pts, loc, ch)
    assert report.fallback_reason is None
    assert report.step7_points == 0 and report.step7_cost == 0
    assert cert.extremal_indices == list(range(9))
    assert verify_hull_certificate(pts, cert) is None


def test_c_certificate_end_to_end():
    d = make_family("fixed", 64, 6)
    st = learn_hull_structures(d, freq_samples=100)
    for k in range(5):
        pts = d.sample(k + 50)
        _, _, loc = run_hull(pts, st, return_location=True)
        cc = c_certificate(pts, loc, st.hull)
        assert verify_c_certificate(pts, cc, st.hull) is None


def test_in_pencil_outcomes_occur():
    d = make_family("bad_hull_hard", 256, 0)
    st = learn_hull_structures(d, freq_samples=200)
    kinds = set()
    for k in range(3):
        loc = locate_points(d.sample(k + 400), st)
        kinds |= {o.kind for o in loc.outcomes}
    assert {OUTSIDE, BELOW} <= kinds
    assert IN_PENCIL in kinds


def test_structures_round_trip_and_determinism():
    d = make_family("uniform", 64, 7)
    a = learn_hull_structures(d, freq_samples=100)
    b = learn_hull_structures(d, freq_samples=100)
    assert hull_structures_to_dict(a) == hull_structures_to_dict(b)
    back = hull_structures_from_dict(json.loads(json.dumps(hull_structures_to_dict(a))))
    pts = d.sample(123)
    c1, m1 = run_hull(pts, a)
    c2, m2 = run_hull(pts, back)
    assert c1 == c2 and m1.rounds == m2.rounds and m1.comparisons == m2.comparisons


@pytest.mark.parametrize("name", ["bad_hull_easy", "bad_hull_hard", "bad_hull_doubled"])
def test_fallback_rate_and_outside_budget(name):
    n = 1024
    d = make_family(name, n, 0)
    st = learn_hull_structures(d, freq_samples=300)
    fallbacks, outside = 0, []
    trials = 40
    for k in range(trials):
        pts = d.sample(10**6 + k)
        cert, metrics = run_hull(pts, st)
        fallbacks += metrics.extra["fallback_used"]
        outside.append(metrics.extra["outside_count"])
    assert fallbacks <= 0.05 * trials
    assert np.mean(outside) <= 4 * n / math.log2(n)
