import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from entrocon.gallery import make_chain
from entrocon.transport import (FiniteMetric, bernoulli_laplace_coupling, bernoulli_laplace_kappa,
                                bl_row, delta_lower_from_coupling, johnson_edges, johnson_metric,
                                w1, w_infty, w_infty_within)

from conftest import distributions


def line_metric(n):
    idx = np.arange(n, dtype=float)
    return FiniteMetric(np.abs(idx[:, None] - idx[None, :]))


@given(st.data())
@settings(max_examples=30, deadline=None)
def test_w1_on_a_line_matches_scipy(data):
    n = data.draw(st.integers(2, 7))
    mu, nu = data.draw(distributions(n)), data.draw(distributions(n))
    cost, coupling = w1(mu, nu, line_metric(n))
    pts = np.arange(n)
    assert cost == pytest.approx(wasserstein_distance(pts, pts, mu, nu), abs=1e-9)
    assert coupling.couples(mu, nu)
    assert coupling.cost(line_metric(n)) == pytest.approx(cost, abs=1e-9)


def brute_w_infty(mu, nu, d):
    """Smallest radius r such that every set A satisfies mu(A) <= nu(A^r) (Strassen)."""
    n = len(mu)
    for r in sorted(set(d.d.ravel())):
        ok = True
        for size in range(1, n + 1):
            for A in itertools.combinations(range(n), size):
                hood = [j for j in range(n) if min(d.d[i, j] for i in A) <= r]
                if mu[list(A)].sum() > nu[hood].sum() + 1e-12:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return r
    raise AssertionError


@given(st.data())
@settings(max_examples=25, deadline=None)
def test_w_infty_matches_strassen_brute_force(data):
    n = data.draw(st.integers(2, 5))
    mu, nu = data.draw(distributions(n)), data.draw(distributions(n))
    d = line_metric(n)
    assert w_infty(mu, nu, d) == brute_w_infty(mu, nu, d)


def test_w_infty_dominates_w1(rng):
    d = line_metric(5)
    for _ in range(10):
        mu, nu = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        assert w1(mu, nu, d)[0] <= w_infty(mu, nu, d) + 1e-12


def test_metric_validation():
    with pytest.raises(ValueError):
        FiniteMetric(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        FiniteMetric(np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float))
    with pytest.raises(ValueError):
        FiniteMetric.from_graph(np.zeros((3, 3)))
    cyc = FiniteMetric.from_graph(np.roll(np.eye(5), 1, axis=1) + np.roll(np.eye(5), -1, axis=1))
    assert cyc.d[0, 2] == 2 and cyc.d[0, 3] == 2


def test_bl_row_is_exact_distribution():
    row = bl_row(6, 2, frozenset({0, 1}))
    assert sum(row.values()) == 1
    assert row[frozenset({0, 1})] == Fraction(1, 2)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(2, 9) for k in range(1, n)])
def test_bernoulli_laplace_kappa_exact(n, k):
    assert bernoulli_laplace_kappa(n, k) == Fraction(n, 2 * k * (n - k))


def test_coupling_rejects_non_adjacent():
    with pytest.raises(ValueError):
        bernoulli_laplace_coupling(6, 2, {0, 1}, {2, 3})


def test_coupling_parts_sum_to_one():
    c = bernoulli_laplace_coupling(7, 3, {0, 1, 2}, {0, 1, 3})
    assert sum(c.part.values()) == 1
    assert c.max_distance == 1
    assert set(c.part) == {1, 2, 3, 4, 5}


@pytest.mark.parametrize("n,k", [(4, 2), (5, 2), (6, 3)])
def test_transport_kappa_matches_coupling(n, k):
    pair = make_chain("bernoulli_laplace", n=n, k=k).float_pair
    rep = delta_lower_from_coupling(pair, johnson_metric(n, k), johnson_edges(n, k))
    assert rep.estimate is not None and not rep.w_infty_violations
    assert rep.estimate.value >= n / (2 * k * (n - k)) - 1e-9


def test_transport_reports_w_infty_failure():
    # rows at the adjacent states 0 and 1 sit at distance 2 from each other
    from entrocon.chain_core import ReversiblePair
    P = np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 0, 1.0]])
    pair = ReversiblePair(np.full(3, 1 / 3), P)
    rep = delta_lower_from_coupling(pair, line_metric(3), [(0, 1), (1, 2)])
    assert rep.estimate is None and rep.w_infty_violations == [(0, 1)]


def test_w_infty_within_agrees_with_value(rng):
    d = line_metric(5)
    for _ in range(10):
        mu, nu = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        r = w_infty(mu, nu, d)
        assert w_infty_within(mu, nu, d, r)
        if r > 0:
            assert not w_infty_within(mu, nu, d, r - 1)
