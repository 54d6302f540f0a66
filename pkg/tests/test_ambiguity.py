import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memgdro.ambiguity import (LOWER, SAMPLE, UPPER, AmbiguitySet, DiscreteDistribution, candidate_lattice,
                               discrete_wasserstein, l1_distance, lattice_guard, vertex_lattice)
from memgdro.instance import SampleSet, UncertaintyBox

vec = st.lists(st.floats(-100, 100), min_size=1, max_size=8)


def unit_box(T=1):
    return UncertaintyBox(np.zeros(4 * T), np.ones(4 * T), T)


def test_l1_examples():
    assert l1_distance([1, 2], [1, 2]) == 0
    assert l1_distance([0, 3], [1, 1]) == 3


def test_l1_length_mismatch():
    with pytest.raises(ValueError):
        l1_distance([0, 1], [0])


@given(a=vec, b=vec)
def test_l1_symmetric(a, b):
    n = min(len(a), len(b))
    assert l1_distance(a[:n], b[:n]) == l1_distance(b[:n], a[:n])


def test_lattice_three_candidates_on_demand_component():
    box = unit_box()
    sample = np.full(4, 0.5)
    lat = candidate_lattice(sample, box, reduce=True)
    assert lat.candidates(2) == [0.5, 0.0, 1.0]  # ed factor


def test_lattice_reduce_drops_upper_for_wind():
    lat = candidate_lattice(np.full(4, 0.5), unit_box(), reduce=True)
    assert lat.candidates(0) == [0.5, 0.0]
    assert candidate_lattice(np.full(4, 0.5), unit_box(), reduce=False).candidates(0) == [0.5, 0.0, 1.0]


def test_lattice_dedups_coincident_lower():
    sample = np.array([0.5, 0.5, 0.0, 0.5])
    lat = candidate_lattice(sample, unit_box(), reduce=True)
    assert lat.candidates(2) == [0.0, 1.0]


def test_lattice_size_matches_enumeration():
    lat = candidate_lattice(np.array([0.5, 0.5, 0.0, 0.5]), unit_box(), reduce=True)
    pts = list(lat.enumerate())
    assert len(pts) == lat.size == 2 * 2 * 2 * 3
    assert len({p.tobytes() for p in pts}) == len(pts)


def test_sample_outside_box_rejected():
    with pytest.raises(ValueError):
        candidate_lattice(np.full(4, 1.5), unit_box())


def test_guard():
    lat = candidate_lattice(np.full(4, 0.5), unit_box(), reduce=False)
    with pytest.raises(ValueError):
        lattice_guard(lat, limit=10)


def test_vertex_lattice_spans_corners():
    lat = vertex_lattice(unit_box(), reduce=False)
    pts = {tuple(lat.scenario(c)) for c in lat.enumerate()}
    assert len(pts) == 16
    assert all(set(p) <= {0.0, 1.0} for p in pts)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_codes_roundtrip_and_distance(data):
    T = data.draw(st.integers(1, 3))
    m = 4 * T
    lo = np.array(data.draw(st.lists(st.floats(0, 1), min_size=m, max_size=m)))
    w = np.array(data.draw(st.lists(st.floats(0, 1), min_size=m, max_size=m)))
    u = np.array(data.draw(st.lists(st.floats(0, 1), min_size=m, max_size=m)))
    box = UncertaintyBox(lo, lo + w, T)
    sample = np.clip(lo + u * w, box.lower, box.upper)
    lat = candidate_lattice(sample, box, reduce=data.draw(st.booleans()))
    codes = np.array([data.draw(st.sampled_from(lat.codes_for(i))) for i in range(m)], np.int8)
    xi = lat.scenario(codes)
    assert box.contains(xi)
    back = lat.locate(xi)
    assert back is not None
    np.testing.assert_array_equal(lat.scenario(back), xi)
    assert lat.distance(codes) == pytest.approx(l1_distance(xi, sample), abs=1e-12)


def test_wasserstein_identity_and_point_masses():
    a, b = np.array([[0.0, 1.0]]), np.array([[2.0, 0.5]])
    assert discrete_wasserstein((a, [1.0]), (a, [1.0])) == pytest.approx(0.0, abs=1e-12)
    assert discrete_wasserstein((a, [1.0]), (b, [1.0])) == pytest.approx(l1_distance(a[0], b[0]))


def test_wasserstein_mass_mismatch():
    with pytest.raises(ValueError):
        discrete_wasserstein((np.zeros((1, 1)), [1.0]), (np.zeros((1, 1)), [0.5]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_wasserstein_below_any_coupling(seed):
    g = np.random.default_rng(seed)
    S, m = g.integers(1, 4), 3
    smp = SampleSet(g.random((S, m)), np.full(S, 1.0 / S))
    pts = [g.random((g.integers(1, 4), m)) for _ in range(S)]
    prs = [g.dirichlet(np.ones(len(p))) for p in pts]
    dist = DiscreteDistribution(smp.probabilities, pts, prs)
    w = discrete_wasserstein(dist, DiscreteDistribution.empirical(smp))
    assert w <= dist.transport_cost_to_samples(smp) + 1e-9
    assert w >= -1e-12


def test_negative_radius_rejected():
    smp = SampleSet(np.zeros((1, 4)), np.ones(1))
    with pytest.raises(ValueError):
        AmbiguitySet(smp, -0.1, unit_box())


def test_codes_constants():
    assert (SAMPLE, LOWER, UPPER) == (0, 1, 2)
