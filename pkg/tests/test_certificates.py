"""Certificate verifiers: acceptance of sound certificates and mutation detection."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import hull_by_supporting_pairs, maxima_by_pairs, random_points
from selfimproving.certificates import (BELOW_SEG, LEAF_SLAB, PENCIL_SLAB, CCertificate, CLabel,
                                        HullCertificate, MaximaCertificate, SLabel,
                                        brute_force_extremal, brute_force_maxima,
                                        certificate_from_json, certificate_to_json,
                                        v_extremal_oracle, verify_c_certificate,
                                        verify_hull_certificate, verify_maxima_certificate,
                                        verify_slabels)
from selfimproving.errors import InvalidInputError
from selfimproving.geometry import (as_xy, maxima_sweep, strictly_below, upper_hull_monotone,
                                   witnesses_from_hull)
from selfimproving.hull_learning import CanonicalHull
from selfimproving.slabs import SlabStructure


def _hull_cert(pts):
    xs, ys = as_xy(pts)
    hull = upper_hull_monotone(pts)
    return HullCertificate(hull, witnesses_from_hull(xs, ys, hull))


def _instances(count=30, n=40):
    rng = np.random.default_rng(12)
    kinds = ["uniform", "grid", "collinear"]
    return [random_points(rng, n, kinds[k % 3]) for k in range(count)]


def test_sweep_certificates_verify():
    for pts in _instances():
        cert = maxima_sweep(pts)
        assert verify_maxima_certificate(pts, cert) is None
        assert cert.maximal_indices == maxima_by_pairs(pts)


def test_hull_certificates_verify():
    for pts in _instances():
        cert = _hull_cert(pts)
        assert verify_hull_certificate(pts, cert) is None
        assert cert.extremal_indices == hull_by_supporting_pairs(pts)


def test_brute_force_helpers_agree_with_pair_oracles():
    for pts in _instances(9, 15):
        assert brute_force_maxima(pts) == maxima_by_pairs(pts)
        assert brute_force_extremal(pts) == hull_by_supporting_pairs(pts)


def test_maxima_witness_swap_detected():
    pts = np.array([[0, 0], [1, 1], [2, 0.5], [3, -1]], float)
    cert = maxima_sweep(pts)
    assert verify_maxima_certificate(pts, cert) is None
    bad = MaximaCertificate(cert.maximal_indices, {**cert.witnesses, 0: 3})
    assert verify_maxima_certificate(pts, bad).condition == "b"


def test_maxima_dropped_index_detected():
    pts = np.array([[0, 0], [1, 1], [2, 0.5], [3, -1]], float)
    cert = maxima_sweep(pts)
    dropped = MaximaCertificate(cert.maximal_indices[1:], cert.witnesses)
    assert verify_maxima_certificate(pts, dropped).condition in ("c", "d")
    extra = MaximaCertificate(sorted(cert.maximal_indices + [0], key=lambda i: pts[i][0]),
                              {k: v for k, v in cert.witnesses.items() if k != 0})
    assert verify_maxima_certificate(pts, extra).condition in ("a", "c")
    assert verify_maxima_certificate(pts, MaximaCertificate([9], {})).condition == "range"


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_maxima_single_field_corruption(seed, what):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 12, ["uniform", "grid", "collinear"][seed % 3])
    cert = maxima_sweep(pts)
    maxima, wit = list(cert.maximal_indices), dict(cert.witnesses)
    if what == 0 and wit:
        i = int(rng.choice(list(wit)))
        j = int(rng.integers(12))
        xs, ys = as_xy(pts)
        if xs[j] >= xs[i] and ys[j] >= ys[i] and (xs[j], ys[j], j) > (xs[i], ys[i], i):
            return  # still a valid witness
        wit[i] = j
    elif what == 1:
        k = int(rng.integers(len(maxima)))
        del maxima[k]
    elif what == 2 and wit:
        i = int(rng.choice(list(wit)))
        del wit[i]
    elif what == 3 and len(maxima) > 1:
        maxima[0], maxima[1] = maxima[1], maxima[0]
    else:
        return
    assert verify_maxima_certificate(pts, MaximaCertificate(maxima, wit)) is not None


def test_hull_interval_and_collinear_violations():
    pts = np.array([[0, 0], [1, 1], [2, 0], [3, -2], [1, 0]], float)
    cert = _hull_cert(pts)
    assert verify_hull_certificate(pts, cert) is None
    out_of_range = dict(cert.witness_pairs)
    out_of_range[4] = (2, 3)  # x(4) is not between x(2) and x(3)
    v = verify_hull_certificate(pts, HullCertificate(cert.extremal_indices, out_of_range))
    assert v.condition == "interval"
    # a point on the segment qr is not in the open semislab
    line = np.array([[0, 0], [2, 2], [1, 1], [3, 0]], float)
    bad = HullCertificate([0, 1, 3], {2: (0, 1)})
    assert verify_hull_certificate(line, bad) is not None
    good = HullCertificate([0, 2, 1, 3], {})
    assert verify_hull_certificate(line, good) is None


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_hull_single_field_corruption(seed, what):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 12, ["uniform", "grid", "collinear"][seed % 3])
    cert = _hull_cert(pts)
    ext, wit = list(cert.extremal_indices), dict(cert.witness_pairs)
    xs, ys = as_xy(pts)
    if what == 0 and wit:
        p = int(rng.choice(list(wit)))
        q, r = int(rng.integers(12)), int(rng.integers(12))
        if strictly_below(xs, ys, q, r, p):
            return
        wit[p] = (q, r)
    elif what == 1:
        del ext[int(rng.integers(len(ext)))]
    elif what == 2 and wit:
        del wit[int(rng.choice(list(wit)))]
    elif what == 3 and len(ext) > 1:
        ext[0], ext[-1] = ext[-1], ext[0]
    else:
        return
    assert verify_hull_certificate(pts, HullCertificate(ext, wit)) is not None


def test_json_round_trip():
    pts = _instances(1)[0]
    for cert in (maxima_sweep(pts), _hull_cert(pts)):
        back = certificate_from_json(certificate_to_json(cert))
        assert back == cert
    with pytest.raises(InvalidInputError):
        certificate_from_json(json.dumps({"type": "other"}))


def test_slabels():
    pts = np.array([[0.5, 0.5], [1.5, 2.0], [2.5, 1.0], [0.2, 0.1]], float)
    s = SlabStructure([1.0, 2.0])
    cert = maxima_sweep(pts)
    labels = {1: SLabel("leaf", 1), 2: SLabel("leaf", 2), 0: SLabel("boundary", 0),
              3: SLabel("leaf", 0)}
    assert verify_slabels(pts, cert, labels, s) is None
    assert verify_slabels(pts, cert, {**labels, 2: SLabel("leaf", 1)}, s) is not None
    # boundary 1 lies right of the witness of point 0
    assert verify_slabels(pts, cert, {**labels, 0: SLabel("boundary", 1)}, s) is not None
    missing = dict(labels)
    del missing[3]
    assert verify_slabels(pts, cert, missing, s) is not None


# canonical hull: edges y = x + 1, y = 0.5, y = 1 - x; vertices (-0.5, 0.5), (0.5, 0.5)
CH = CanonicalHull([1.0, 0.0, -1.0], [1.0, 0.5, 1.0])
C_PTS = np.array([[0.0, 2.0], [0.1, 0.3], [0.2, 0.8], [-2.0, -3.0], [2.0, -3.0]], float)


def _valid_cc():
    return CCertificate([0], {1: CLabel(BELOW_SEG, 1, 1),
                              2: CLabel(PENCIL_SLAB, 0, 2, 0),
                              3: CLabel(LEAF_SLAB, 0, 0),
                              4: CLabel(LEAF_SLAB, 2, 2)})


def test_c_certificate_example():
    assert CH.edge_count == 3
    assert v_extremal_oracle(*as_xy(C_PTS), CH.slopes) == [0, 0, 0]
    assert verify_c_certificate(C_PTS, _valid_cc(), CH) is None


def test_c_certificate_mutations():
    cc = _valid_cc()
    cases = [
        {2: CLabel(BELOW_SEG, 1, 1)},             # point above the segment
        {1: CLabel(LEAF_SLAB, 0, 1)},             # leaf label on a wide slab
        {3: CLabel(LEAF_SLAB, 1, 1)},             # slab does not contain the point
        {2: CLabel(PENCIL_SLAB, 0, 2, 1)},        # owner is not V-extremal
        {2: CLabel(PENCIL_SLAB, 1, 1, 0)},        # not the owner's pencil slab
        {4: CLabel(BELOW_SEG, 0, 2)},             # segment undefined on the outer edges
    ]
    for change in cases:
        bad = CCertificate(cc.v_extremal_indices, {**cc.labels, **change})
        assert verify_c_certificate(C_PTS, bad, CH) is not None, change
    assert verify_c_certificate(C_PTS, CCertificate([0, 1], cc.labels), CH) is not None
    unlabeled = dict(cc.labels)
    del unlabeled[4]
    assert verify_c_certificate(C_PTS, CCertificate([0], unlabeled), CH) is not None


def test_pencil_owner_inside_c_rejected():
    high = CanonicalHull([1.0, 0.0, -1.0], [10.0, 9.5, 10.0])
    cc = _valid_cc()
    cc.labels[2] = CLabel(PENCIL_SLAB, 0, 2, 0)
    cc.labels[1] = CLabel(LEAF_SLAB, 1, 1)
    v = verify_c_certificate(C_PTS, cc, high)
    assert v is not None and "inside C" in v.message
