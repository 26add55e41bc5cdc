"""Slab structure: construction rule, location and the leaf moment check."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfimproving.distributions import make_family
from selfimproving.errors import InvalidInputError
from selfimproving.slabs import (Slab, SlabStructure, build_slab_structure, check_leaf_moments,
                                 default_slab_samples, leaf_counts)


def _instances(xs_per_instance):
    return [np.column_stack([xs, np.zeros(len(xs))]) for xs in xs_per_instance]


def test_every_t_th_rule():
    s = build_slab_structure(_instances([[1, 4, 5], [2, 3, 6]]))
    assert s.boundaries.tolist() == [2.0, 4.0]
    assert s.leaf_count == 3


def test_single_point_instances():
    s = build_slab_structure(_instances([[3.0], [1.0], [7.0]]))
    assert s.leaf_count == 1
    assert s.locate_leaf(-1e300) == 0 and s.locate_leaf(1e300) == 0


def test_mismatched_sizes_rejected():
    with pytest.raises(InvalidInputError):
        build_slab_structure(_instances([[1, 2], [3]]))
    with pytest.raises(InvalidInputError):
        build_slab_structure([])
    with pytest.raises(InvalidInputError):
        SlabStructure([1.0, 1.0])


def test_duplicates_collapse():
    s = build_slab_structure(_instances([[1, 1, 1, 1], [1, 1, 1, 2]]))
    assert s.boundaries.tolist() == [1.0]


def test_locate_examples():
    s = SlabStructure([2.0, 4.0])
    assert s.locate_leaf(3.0) == 1
    assert s.locate_leaf(-10.0) == 0
    assert s.locate_leaf(2.0) == 1
    assert s.locate_leaf(4.0) == 2
    assert s.left_edge(0) == -np.inf and s.right_edge(2) == np.inf
    assert (s.left_edge(1), s.right_edge(1)) == (2.0, 4.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=0, max_size=20, unique=True),
       st.lists(st.floats(-120, 120), min_size=1, max_size=20))
def test_locate_matches_linear_scan(bounds, queries):
    s = SlabStructure(sorted(bounds))
    b = sorted(bounds)
    for x in queries:
        scan = sum(1 for v in b if v <= x)
        assert s.locate_leaf(x) == scan
    assert s.locate_many(queries).tolist() == [s.locate_leaf(x) for x in queries]


def test_slab_interval():
    assert Slab(2, 5).size == 4
    assert 3 in Slab(2, 5) and 6 not in Slab(2, 5)
    with pytest.raises(InvalidInputError):
        Slab(3, 2)


def test_default_sample_count():
    assert default_slab_samples(1) == 1
    assert default_slab_samples(2) == 1
    assert default_slab_samples(1024) == 10
    assert default_slab_samples(1000) == 10


def test_json_round_trip():
    s = SlabStructure([0.1, 0.25, 3.0])
    assert SlabStructure.from_json(s.to_json()) == s


def test_leaf_counts_sum_to_n():
    d = make_family("uniform", 64, seed=0)
    s = build_slab_structure(d.sample_many(0, 6))
    c = leaf_counts(s, d.sample(100))
    assert c.sum() == 64 and len(c) == s.leaf_count


@pytest.mark.parametrize("family", ["fixed", "uniform"])
def test_leaf_second_moment(family):
    n = 128
    d = make_family(family, n, seed=1)
    s = build_slab_structure(d.sample_many(0, default_slab_samples(n)))
    assert n // 2 <= s.leaf_count <= n
    report = check_leaf_moments(s, d, samples=1000, start=1000)
    assert report.ok, report.failures
    assert report.max_mean_square <= 10
