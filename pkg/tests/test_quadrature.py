"""Quadrature tests: frozen rule values, exactness oracles, grid bookkeeping."""

import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpcsim.basis import Beta, Gamma, Gaussian, GpcBasisSet, Uniform, eval_basis
from gpcsim.quadrature import (
    GridBudgetError,
    gauss_rule,
    integrate,
    tensor_grid,
)
from helpers import germ_moments, simpson_moment

FAMILIES = [Gaussian(), Uniform(), Gamma(1.0), Gamma(2.5), Beta(2.0, 3.0), Beta(1.0, 1.0)]


# ---------------------------------------------------------------------------
# 1-D rules
# ---------------------------------------------------------------------------

def test_two_point_rules_match_hand_values():
    r = gauss_rule(Gaussian(), 2)
    assert np.allclose(r.nodes, [-1.0, 1.0])
    assert np.allclose(r.weights, [0.5, 0.5])

    r = gauss_rule(Uniform(), 2)
    assert np.allclose(r.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert np.allclose(r.weights, [0.5, 0.5])

    r = gauss_rule(Gamma(1.0), 2)
    assert np.allclose(r.nodes, [2 - math.sqrt(2), 2 + math.sqrt(2)])
    assert np.allclose(r.weights, [(2 + math.sqrt(2)) / 4, (2 - math.sqrt(2)) / 4])


def test_one_point_rule_is_the_mean():
    for dist in FAMILIES:
        r = gauss_rule(dist, 1)
        assert r.nodes[0] == pytest.approx(dist.germ_mean())
        assert r.weights[0] == pytest.approx(1.0)


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
@pytest.mark.parametrize("n_hat", range(1, 9))
def test_rule_exactness_against_exact_moments(dist, n_hat):
    r = gauss_rule(dist, n_hat)
    assert abs(r.weights.sum() - 1.0) < 1e-12
    assert np.all(r.weights > 0)
    moments = germ_moments(dist, 2 * n_hat - 1)
    abs_scale = 1.0
    for d in range(2 * n_hat):
        got = float(np.dot(r.weights, r.nodes**d))
        want = float(moments[d])
        abs_scale = float(np.dot(r.weights, np.abs(r.nodes) ** d))
        assert abs(got - want) <= 1e-10 * max(1.0, abs_scale)


def test_simpson_oracle_agrees_with_exact_moments():
    # validates the panel oracle itself before acceptance uses it
    for dist, d in [(Gaussian(), 6), (Gamma(2.5), 5), (Beta(2.0, 3.0), 7), (Uniform(), 4)]:
        ref = float(germ_moments(dist, d)[d])
        est = simpson_moment(dist, d, panels=200_000)
        assert est == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_simpson_oracle_cross_checked_with_mpmath():
    import mpmath

    dist = Gamma(2.5)
    ref = mpmath.quad(
        lambda x: x**5 * x ** (dist.gamma - 1) * mpmath.e ** (-x) / mpmath.gamma(dist.gamma),
        [0, mpmath.inf],
    )
    est = simpson_moment(dist, 5, panels=200_000)
    assert est == pytest.approx(float(ref), rel=1e-9)


def test_gauss_rule_validation():
    with pytest.raises(ValueError):
        gauss_rule(Gaussian(), 0)


# ---------------------------------------------------------------------------
# tensor grids
# ---------------------------------------------------------------------------

def _grid(dists, n_hat, **kw):
    return tensor_grid([gauss_rule(d, n_hat) for d in dists], **kw)


def test_grid_sizes():
    assert _grid([Gaussian()] * 2, 4).npoints == 16
    assert _grid([Gaussian()] * 3, 4).npoints == 64
    assert _grid([Gaussian(), Uniform(), Gamma(2.0), Beta(2.0, 2.0)], 4).npoints == 256


def test_grid_requires_matching_point_counts():
    with pytest.raises(ValueError):
        tensor_grid([gauss_rule(Gaussian(), 2), gauss_rule(Uniform(), 3)])


def test_index_round_trip_and_mixed_radix_relation():
    grid = _grid([Gaussian(), Uniform(), Gamma(1.5)], 3)
    n_hat = 3
    for j in range(grid.npoints):
        col = grid.index_column(j)
        assert grid.linear_index(col) == j
        # one-based mixed-radix linearization of the digit column
        j1 = 1 + sum(n_hat ** (k) * (col[k] - 1) for k in range(grid.dim))
        assert j1 == j + 1
        # node/weight are the per-dimension products the column says they are
        node = grid.node(j)
        w = 1.0
        for k in range(grid.dim):
            assert node[k] == grid.rules[k].nodes[col[k] - 1]
            w *= grid.rules[k].weights[col[k] - 1]
        assert grid.weight(j) == pytest.approx(w, rel=1e-15)


def test_materialized_views_match_streamed_access():
    grid = _grid([Uniform(), Gamma(2.0)], 4)
    nodes = grid.all_nodes()
    weights = grid.all_weights()
    assert nodes.shape == (16, 2)
    for j in range(grid.npoints):
        assert np.allclose(nodes[j], grid.node(j))
        assert weights[j] == pytest.approx(grid.weight(j), rel=1e-15)
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(weights > 0)


def test_enumeration_budget():
    grid = _grid([Gaussian()] * 8, 7, budget=10**6)  # 7^8 > 5.7e6 nodes
    assert grid.npoints == 7**8
    with pytest.raises(GridBudgetError):
        grid.all_weights()
    with pytest.raises(GridBudgetError):
        grid.all_nodes()
    # streamed access still works on the same grid
    j = grid.npoints - 1
    assert grid.node(j).shape == (8,)
    assert grid.weight(j) > 0


@settings(max_examples=40, deadline=None)
@given(
    n_hat=st.integers(1, 8),
    fam=st.sampled_from(FAMILIES),
    l=st.integers(1, 3),
)
def test_tensor_weight_positivity(n_hat, fam, l):
    grid = _grid([fam] * l, n_hat, budget=10**6)
    if grid.npoints <= 4096:
        w = grid.all_weights()
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def test_integrate_constant_is_one():
    grid = _grid([Gaussian(), Beta(2.0, 5.0)], 3)
    assert integrate(grid, lambda xi: 1.0) == pytest.approx(1.0, abs=1e-12)


def test_integrate_orthonormal_pairs():
    dists = [Gaussian(), Uniform()]
    p = 3
    basis = GpcBasisSet(dists, p)
    grid = _grid(dists, p + 1)
    gram = integrate(grid, lambda xi: np.outer(eval_basis(basis, xi), eval_basis(basis, xi)))
    assert np.max(np.abs(gram - np.eye(basis.size))) < 1e-10


def test_integrate_gaussian_fourth_moment_product():
    grid = _grid([Gaussian(), Gaussian()], 3)
    val = integrate(grid, lambda xi: xi[0] ** 2 * xi[1] ** 2)
    assert val == pytest.approx(1.0, rel=1e-12)


def test_integrate_propagates_failure_with_node_index():
    grid = _grid([Gaussian()], 3)

    def bad(xi):
        if xi[0] > 0:
            raise FloatingPointError("boom")
        return 1.0

    with pytest.raises(RuntimeError, match="node"):
        integrate(grid, bad)


def test_mixed_family_gram_is_identity():
    dists = [Gamma(2.0), Beta(2.0, 3.0), Uniform()]
    p = 4
    basis = GpcBasisSet(dists, p)
    grid = _grid(dists, p + 1)
    phi = basis.eval_many(grid.all_nodes())
    gram = phi.T @ (grid.all_weights()[:, None] * phi)
    assert np.max(np.abs(gram - np.eye(basis.size))) < 1e-9
