import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from colearn import complexity as cx
from colearn.errors import InputError, NumericalError

import oracles


def count_matrices(min_side=2, max_side=8, max_count=20):
    shape = st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side))
    return shape.flatmap(lambda s: arrays(np.int64, s, elements=st.integers(0, max_count))) \
        .filter(lambda x: x.sum() > 0)


def activity_matrices(max_side=8):
    shape = st.tuples(st.integers(1, max_side), st.integers(2, max_side))
    return shape.flatmap(lambda s: arrays(np.int8, s, elements=st.integers(0, 1)))


# -- RCA and activity ------------------------------------------------------------

def test_rca_diagonal_example():
    assert cx.rca([[1, 0], [0, 1]]).tolist() == [[2.0, 0.0], [0.0, 2.0]]


def test_rca_uniform_is_one():
    r = cx.rca(np.full((4, 5), 7))
    assert np.array_equal(r, np.ones((4, 5)))
    assert cx.activity(r).all()


def test_rca_single_province():
    assert cx.rca([[3, 0, 5]]).tolist() == [[1.0, 0.0, 1.0]]


def test_rca_empty_year():
    with pytest.raises(InputError, match="empty year"):
        cx.rca(np.zeros((2, 3)))


def test_province_without_firms_gets_zero_row():
    r = cx.rca([[0, 0], [1, 2], [3, 1]])
    assert r[0].tolist() == [0.0, 0.0]


def test_activity_threshold_is_inclusive():
    assert cx.activity([[1.0, 0.999, 0.0]]).tolist() == [[1, 0, 0]]
    assert cx.activity(np.zeros((1, 3))).sum() == 0


@settings(max_examples=150, deadline=None)
@given(count_matrices())
def test_rca_matches_loop_oracle(x):
    assert np.allclose(cx.rca(x), oracles.rca(x.tolist()), rtol=1e-12, atol=0)


@settings(max_examples=150, deadline=None)
@given(count_matrices())
def test_rca_share_identity(x):
    r = cx.rca(x)
    share = x.sum(axis=0) / x.sum()
    with_firms = x.sum(axis=1) > 0
    assert np.allclose((r * share).sum(axis=1)[with_firms], 1.0, rtol=0, atol=1e-12)
    assert (r[x == 0] == 0).all()


# -- proximity -------------------------------------------------------------------

def test_proximity_examples():
    prox = cx.proximity([[1, 2, 0], [0, 0, 3], [1, 2, 0]])
    assert prox[0, 1] == pytest.approx(1.0)
    assert prox[0, 2] == 0.0
    assert cx.proximity([[1, 1], [0, 1]])[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_zero_column_unrelated_to_everything():
    prox = cx.proximity([[1, 0], [2, 0]])
    assert prox[1].tolist() == [0.0, 0.0]
    assert prox[0, 0] == 1.0


@settings(max_examples=150, deadline=None)
@given(count_matrices())
def test_proximity_matches_loop_oracle(x):
    prox = cx.proximity(x)
    assert np.allclose(prox, oracles.proximity(x.tolist()), rtol=0, atol=1e-12)
    assert np.array_equal(prox, prox.T)
    assert ((prox >= 0) & (prox <= 1)).all()


@settings(max_examples=100, deadline=None)
@given(count_matrices(), st.data())
def test_proximity_column_scale_invariance(x, data):
    col = data.draw(st.integers(0, x.shape[1] - 1))
    c = data.draw(st.floats(0.01, 100))
    scaled = x.astype(float)
    scaled[:, col] *= c
    assert np.allclose(cx.proximity(scaled), cx.proximity(x), rtol=0, atol=1e-12)


# -- related density ---------------------------------------------------------------

PROX3 = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.0], [0.25, 0.0, 1.0]])


def test_related_density_example():
    u = np.array([[0, 0, 1]])
    assert cx.density_related(u, PROX3)[0, 0] == pytest.approx(0.25 / 1.75, abs=1e-15)
    assert cx.density_related_cell(u, PROX3, 0, 0) == pytest.approx(0.14285714285714285)


def test_related_density_all_and_none():
    assert np.allclose(cx.density_related(np.ones((2, 3)), PROX3), 1.0)
    assert (cx.density_related(np.zeros((2, 3)), PROX3) == 0).all()


def test_related_density_exclude_self():
    u = np.array([[1, 0, 1]])
    assert cx.density_related(u, PROX3, exclude_self=True)[0, 0] == pytest.approx(0.25 / 0.75)
    assert cx.density_related_cell(u, PROX3, 0, 0, exclude_self=True) == pytest.approx(1 / 3)


def test_isolated_industry():
    prox = np.zeros((2, 2))
    prox[0, 0] = 1.0
    out = cx.density_related(np.ones((1, 2)), prox)
    assert out[0, 0] == 1.0 and math.isnan(out[0, 1])
    with pytest.raises(NumericalError, match="isolated"):
        cx.density_related_cell(np.ones((1, 2)), prox, 0, 1)


def test_full_activity_density_is_exactly_one():
    # this matrix made the unclipped ratio land one ulp above 1
    x = np.random.default_rng(1).integers(0, 9, (4, 8))
    prox = cx.proximity(x)
    u = np.ones((1, 8))
    assert (cx.density_related(u, prox) <= 1.0).all()
    assert all(cx.density_related_cell(u, prox, 0, a) <= 1.0 for a in range(8))


@settings(max_examples=150, deadline=None)
@given(count_matrices(), st.data(), st.booleans())
def test_related_density_matches_loop_oracle(x, data, exclude_self):
    prox = cx.proximity(x)
    u = data.draw(arrays(np.int8, (3, x.shape[1]), elements=st.integers(0, 1)))
    got = cx.density_related(u, prox, exclude_self)
    for i in range(u.shape[0]):
        for a in range(u.shape[1]):
            ref = oracles.related_density(u.tolist(), prox.tolist(), i, a, exclude_self)
            if math.isnan(ref):
                assert math.isnan(got[i, a])
            else:
                assert got[i, a] == pytest.approx(ref, abs=1e-12)
                assert 0.0 <= got[i, a] <= 1.0


@settings(max_examples=150, deadline=None)
@given(count_matrices(), st.data())
def test_related_density_monotone_under_activation(x, data):
    prox = cx.proximity(x)
    m = x.shape[1]
    u = data.draw(arrays(np.int8, (2, m), elements=st.integers(0, 1)))
    zeros = np.argwhere(u == 0)
    if zeros.size == 0:
        return
    i, b = zeros[data.draw(st.integers(0, len(zeros) - 1))]
    flipped = u.copy()
    flipped[i, b] = 1
    before = cx.density_related(u, prox)[i]
    after = cx.density_related(flipped, prox)[i]
    ok = ~np.isnan(before)
    assert (after[ok] >= before[ok] - 1e-15).all()


# -- diversity and graph-neighbour variants -------------------------------------------

def test_diversity_counts_examples():
    m, n = cx.diversity_counts(np.ones((3, 4)))
    assert m.tolist() == [3, 3, 3, 3] and n.tolist() == [4, 4, 4]
    m, n = cx.diversity_counts(np.zeros((3, 4)))
    assert m.sum() == 0 and n.sum() == 0
    m, n = cx.diversity_counts(np.eye(3))
    assert m.tolist() == n.tolist() == [1, 1, 1]


def star_graph(leaves):
    g = np.zeros((leaves + 1, leaves + 1), dtype=bool)
    g[0, 1:] = g[1:, 0] = True
    return g


def test_related_variants_examples():
    g = star_graph(4)
    u = np.array([[0, 1, 0, 0, 0]])
    ratio, active, total = cx.related_variants(u, g)
    assert (ratio[0, 0], active[0, 0], total[0, 0]) == (0.25, 1, 4)
    assert cx.related_variants_cell(u, g, 0, 0) == {"ratio": 0.25, "count_active": 1, "count_total": 4}
    ratio, _, _ = cx.related_variants(np.ones((1, 5)), g)
    assert ratio[0, 0] == 1.0


def test_related_variants_isolated_node():
    g = np.zeros((3, 3), dtype=bool)
    g[0, 1] = g[1, 0] = True
    ratio, active, total = cx.related_variants(np.ones((1, 3)), g)
    assert math.isnan(ratio[0, 2]) and (active[0, 2], total[0, 2]) == (0, 0)
    with pytest.raises(NumericalError, match="isolated"):
        cx.related_variants_cell(np.ones((1, 3)), g, 0, 2)


@settings(max_examples=100, deadline=None)
@given(activity_matrices(), st.data())
def test_related_variants_match_cells(u, data):
    m = u.shape[1]
    g = data.draw(arrays(np.bool_, (m, m), elements=st.booleans()))
    g = g | g.T
    ratio, active, total = cx.related_variants(u, g)
    for i in range(u.shape[0]):
        for a in range(m):
            if total[i, a] == 0:
                assert math.isnan(ratio[i, a])
                continue
            cell = cx.related_variants_cell(u, g, i, a)
            assert cell == {"ratio": ratio[i, a], "count_active": active[i, a],
                            "count_total": total[i, a]}
