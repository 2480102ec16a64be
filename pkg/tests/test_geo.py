import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from colearn import geo
from colearn.errors import InputError, NumericalError

import oracles


def random_distances(rng, n):
    d = rng.uniform(50, 3000, (n, n))
    d = np.triu(d, 1)
    return d + d.T


def table(geo_km, hops):
    return SimpleNamespace(geo_km=np.asarray(geo_km, float), hops=np.asarray(hops),
                           adjacent=np.asarray(hops) == 1)


# -- industrial similarity ------------------------------------------------------

def test_similarity_examples():
    e1 = math.e - 1
    assert geo.industrial_similarity([2.0, 0.5], [2.0, 0.5]) == pytest.approx(1.0)
    assert geo.industrial_similarity([2.0, 0.0], [0.0, 3.0]) == 0.0
    assert geo.industrial_similarity([e1, 0], [e1, e1]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert geo.industrial_similarity([0, 0], [1, 1]) == 0.0
    with pytest.raises(InputError):
        geo.industrial_similarity([1, 2], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7), st.integers(2, 9), st.data())
def test_similarity_matrix_matches_pairs(n, m, data):
    r = data.draw(arrays(float, (n, m), elements=st.one_of(st.just(0.0), st.floats(1e-6, 5))))
    sim = geo.similarity_matrix(r)
    assert np.array_equal(sim, sim.T)
    assert ((sim >= 0) & (sim <= 1)).all()
    for i in range(n):
        for j in range(n):
            if i != j:
                assert sim[i, j] == pytest.approx(oracles.similarity(r[i], r[j]), abs=1e-12)
        assert sim[i, i] == (1.0 if r[i].any() else 0.0)
    perm = data.draw(st.permutations(range(m)))
    assert np.allclose(geo.similarity_matrix(r[:, perm]), sim, atol=1e-12, rtol=0)


# -- neighbour densities ---------------------------------------------------------

def test_neighbor_density_examples():
    d = [[0, 1, 3], [1, 0, 2], [3, 2, 0]]
    u = np.array([[0], [1], [0]])
    assert geo.density_neighbors_weighted(u, d)[0, 0] == pytest.approx(0.75, abs=1e-15)
    assert (geo.density_neighbors_weighted(np.ones((3, 2)), d) == 1).all()
    assert (geo.density_neighbors_weighted(np.zeros((3, 2)), d) == 0).all()


def test_own_activity_excluded():
    d = [[0, 1], [1, 0]]
    assert geo.density_neighbors_weighted(np.array([[1], [0]]), d)[0, 0] == 0.0


def test_adjacent_variants():
    hops = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 3], [1, 2, 3, 0]])
    u = np.array([[1], [1], [0], [0]])
    ratio, active, total = geo.density_neighbors_adjacent(u, hops == 1)
    assert ratio[:, 0].tolist() == [0.5, 0.5, 1.0, 1.0]
    assert active[:, 0].tolist() == [1, 1, 1, 1]
    assert total[:, 0].tolist() == [2, 2, 1, 1]
    t = table(np.ones((4, 4)) - np.eye(4), hops)
    assert geo.density_neighbors(u, t, "ratio")[0, 0] == 0.5
    assert geo.density_neighbors(u, t, "count")[2, 0] == 1.0
    assert geo.density_neighbors_cell(u, t, 0, 0, "ratio") == 0.5
    assert geo.density_neighbors_cell(u, t, 2, 0, "count") == 1.0


def test_no_bordering_province():
    hops = np.array([[0, 2, 2], [2, 0, 1], [2, 1, 0]])
    ratio, _, total = geo.density_neighbors_adjacent(np.ones((3, 1)), hops == 1)
    assert math.isnan(ratio[0, 0]) and total[0, 0] == 0
    with pytest.raises(NumericalError, match="bordering"):
        geo.density_neighbors_cell(np.ones((3, 1)), table(np.ones((3, 3)), hops), 0, 0, "ratio")


def test_unknown_weighting():
    with pytest.raises(InputError):
        geo.density_neighbors(np.ones((2, 1)), table([[0, 1], [1, 0]], [[0, 1], [1, 0]]), "bogus")


def test_nonpositive_distance_rejected():
    with pytest.raises(InputError):
        geo.density_neighbors_weighted(np.ones((2, 1)), [[0, 0], [0, 0]])


@pytest.mark.parametrize("seed", range(20))
def test_weighted_density_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(5, 9), rng.integers(5, 9)
    d = random_distances(rng, n)
    u = (rng.random((n, m)) < 0.4).astype(int)
    got = geo.density_neighbors_weighted(u, d)
    t = table(d, np.ones((n, n), int))
    for i in range(n):
        for a in range(m):
            ref = oracles.neighbor_density(u.tolist(), d.tolist(), i, a)
            assert got[i, a] == pytest.approx(ref, abs=1e-12)
            assert geo.density_neighbors_cell(u, t, i, a) == pytest.approx(ref, abs=1e-12)
    assert ((got >= 0) & (got <= 1)).all()


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.floats(0.01, 1000), st.data())
def test_uniform_and_scaled_distances(n, c, data):
    u = data.draw(arrays(np.int8, (n, 3), elements=st.integers(0, 1)))
    ones = np.ones((n, n)) - np.eye(n)
    got = geo.density_neighbors_weighted(u, ones)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        assert np.allclose(got[i], u[others].mean(axis=0), rtol=0, atol=1e-15)
    d = random_distances(np.random.default_rng(n), n)
    assert np.allclose(geo.density_neighbors_weighted(u, d * c),
                       geo.density_neighbors_weighted(u, d), rtol=0, atol=1e-12)


# -- productivity --------------------------------------------------------------------

def test_pairwise_productivity_examples():
    assert geo.pairwise_productivity(100.0, 300.0) == 200.0
    assert geo.pairwise_productivity(100.0, math.nan) == 100.0
    assert math.isnan(geo.pairwise_productivity(math.nan, math.nan))


def test_productivity_density_examples():
    d = np.array([[0, 1, 1], [1, 0, 2], [1, 2, 0]], float)
    const = np.full((3, 1), 42.0)
    assert np.allclose(geo.productivity_density(const, d), 42.0)
    # province 0 undefined, so each pair takes the other member's value
    p = np.array([[math.nan], [100.0], [200.0]])
    assert geo.productivity_density(p, d)[0, 0] == pytest.approx(150.0)
    p = np.array([[math.nan], [80.0], [math.nan]])
    assert geo.productivity_density(p, d)[0, 0] == pytest.approx(80.0)
    assert math.isnan(geo.productivity_density(np.full((3, 1), math.nan), d)[0, 0])


@pytest.mark.parametrize("seed", range(20))
def test_productivity_density_matches_loop_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n, m = rng.integers(5, 9), rng.integers(5, 9)
    d = random_distances(rng, n)
    p = rng.uniform(1e4, 1e6, (n, m))
    p[rng.random((n, m)) < 0.35] = math.nan
    got = geo.productivity_density(p, d)
    for i in range(n):
        for a in range(m):
            ref = oracles.productivity_density(p.tolist(), d.tolist(), i, a)
            if math.isnan(ref):
                assert math.isnan(got[i, a])
            else:
                assert got[i, a] == pytest.approx(ref, rel=1e-12)
                assert got[i, a] >= 0


def test_pair_productivity_mean_over_industries():
    p = np.array([[100.0, math.nan, 10.0], [300.0, 50.0, math.nan], [math.nan, math.nan, math.nan]])
    out = geo.pair_productivity(p)
    assert out[0, 1] == out[1, 0] == pytest.approx((200 + 50 + 10) / 3)
    assert out[0, 2] == pytest.approx((100 + 10) / 2)
    assert math.isnan(out[0, 0])
    q = np.full((2, 2), math.nan)
    assert math.isnan(geo.pair_productivity(q)[0, 1])
