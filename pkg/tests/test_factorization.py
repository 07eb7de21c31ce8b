from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrocon.chain_core import ReversiblePair, exact_array, validate
from entrocon.factorization import (NonConvergenceError, NotLazyError, block_dynamics_factor,
                                    block_dynamics_kernel, complete_graph_factor,
                                    complete_lazy_kernel, glauber_weights, lazy_factorize,
                                    mix_factorizations, psd_check, sinkhorn)

from conftest import reversible_from_weights

GLAUBER_PI = exact_array([Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)])
# configurations in the order (0,0), (0,1), (1,0), (1,1); each row averages the
# two single-site heat-bath updates, enumerated by hand
GLAUBER_HAND = [
    [Fraction(7, 24), Fraction(1, 3), Fraction(3, 8), Fraction(0)],
    [Fraction(1, 6), Fraction(1, 2), Fraction(0), Fraction(1, 3)],
    [Fraction(1, 8), Fraction(0), Fraction(33, 56), Fraction(2, 7)],
    [Fraction(0), Fraction(1, 6), Fraction(3, 14), Fraction(13, 21)],
]


def rational_lazy_pair(weights):
    """Lazy reversible pair built from integer edge weights, in exact arithmetic."""
    n = len(weights)
    W = exact_array(weights)
    W = W + W.T
    deg = W.sum(axis=1)
    for x in range(n):
        W[x, x] += deg[x] + 1  # holding mass above one half
    deg = W.sum(axis=1)
    pi = deg / deg.sum()
    P = np.array([[W[x, y] / deg[x] for y in range(n)] for x in range(n)], dtype=object)
    return ReversiblePair(pi, P)


@given(st.lists(st.integers(0, 5), min_size=16, max_size=16))
@settings(max_examples=25, deadline=None)
def test_lazy_factorize_is_exact(vals):
    weights = np.array(vals).reshape(4, 4)
    weights[0, 1] += 1
    pair = rational_lazy_pair(weights)
    fac = lazy_factorize(pair)
    assert fac.exact
    assert fac.residual(pair.P) == 0
    assert all(any(fac.K[x, j] != 0 for x in range(4)) for j in range(fac.K.shape[1]))


def test_lazy_factorize_float_input():
    pair = reversible_from_weights(np.array([[3.0, 1.0], [1.0, 5.0]]))
    fac = lazy_factorize(pair)
    assert fac.residual(pair.P) < 1e-15


def test_lazy_factorize_rejects_non_lazy():
    with pytest.raises(NotLazyError):
        lazy_factorize(ReversiblePair(np.array([0.5, 0.5]), np.array([[0.4, 0.6], [0.6, 0.4]])))


def test_psd_check():
    flip = ReversiblePair(np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]))
    ok, low = psd_check(flip)
    assert not ok and low == pytest.approx(-0.5)
    lazy = ReversiblePair(np.array([0.5, 0.5]), np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert psd_check(lazy)[0]


@pytest.mark.parametrize("n,ell", [(3, 2), (4, 2), (4, 3), (4, 4), (6, 3)])
def test_complete_graph_factor_product(n, ell):
    fac = complete_graph_factor(n, ell)
    assert fac.residual(complete_lazy_kernel(n)) == 0


def test_complete_graph_factor_guards():
    with pytest.raises(ValueError):
        complete_graph_factor(4, 5)


def test_mix_factorizations_exact():
    f0 = complete_graph_factor(4, 2)
    f1 = complete_graph_factor(4, 4)
    t = Fraction(1, 3)
    mix = mix_factorizations(f0, f1, t)
    expected = (1 - t) * f0.product() + t * f1.product()
    assert mix.residual(expected) == 0
    with pytest.raises(ValueError):
        mix_factorizations(f0, f1, 2)


def test_factorization_pair_is_reversible():
    fac = complete_graph_factor(5, 3, exact=False)
    assert validate(fac.pair()).ok


@pytest.mark.parametrize("seed", range(5))
def test_sinkhorn_doubly_stochastic(seed):
    A = np.random.default_rng(seed).uniform(0.1, 2.0, size=(4, 4))
    res = sinkhorn(A)
    assert np.allclose(res.matrix.sum(axis=0), 1, atol=1e-10)
    assert np.allclose(res.matrix.sum(axis=1), 1, atol=1e-10)
    assert np.allclose(res.matrix, res.row_scaling[:, None] * A * res.col_scaling[None, :])


def test_sinkhorn_symmetric_scaling_stays_symmetric(rng):
    B = rng.uniform(0.1, 1.0, size=(5, 5))
    A = B @ B.T
    res = sinkhorn(A)
    assert np.allclose(res.matrix, res.matrix.T, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(res.matrix)) > -1e-12


def test_sinkhorn_errors():
    with pytest.raises(ValueError):
        sinkhorn(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(NonConvergenceError):
        sinkhorn(np.array([[1.0, 2.0], [3.0, 4.0]]), max_iter=1)


def test_glauber_kernel_by_hand():
    P = block_dynamics_kernel(GLAUBER_PI, 2, 2, glauber_weights(2))
    assert [list(row) for row in P] == GLAUBER_HAND


def test_block_dynamics_factor_matches_kernel():
    weights = {frozenset([0]): Fraction(1, 4), frozenset([1]): Fraction(1, 4),
               frozenset([0, 1]): Fraction(1, 2)}
    fac = block_dynamics_factor(GLAUBER_PI, 2, 2, weights)
    assert fac.residual(block_dynamics_kernel(GLAUBER_PI, 2, 2, weights)) == 0


def test_block_dynamics_guards():
    with pytest.raises(ValueError):
        block_dynamics_factor(np.full(2**13, 2.0**-13), 2, 13, glauber_weights(13))
    with pytest.raises(ValueError):
        block_dynamics_kernel(GLAUBER_PI, 2, 2, {frozenset([0]): Fraction(1, 2)})
