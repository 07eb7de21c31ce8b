import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from entrocon.chain_core import ReversiblePair, reverse_kernel
from entrocon.spectral import ConstantEstimate, NotReversibleError, eta_chi2, eta_tv, poincare

from conftest import reversible_pairs


@given(reversible_pairs(max_size=6))
@settings(max_examples=40, deadline=None)
def test_poincare_against_plain_eigenvalues(pair):
    evals = np.sort(np.linalg.eigvals(pair.P).real)[::-1]
    assert poincare(pair).value == pytest.approx(1 - evals[1], abs=1e-10)


def test_poincare_reducible_chain():
    P = np.array([[1.0, 0, 0], [0, 0.5, 0.5], [0, 0.5, 0.5]])
    est = poincare(ReversiblePair(np.array([0.5, 0.25, 0.25]), P))
    assert est.value == 0.0 and est.info["reducible"]
    assert sorted(map(sorted, est.info["components"])) == [[0], [1, 2]]


def test_poincare_rejects_nonreversible():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    with pytest.raises(NotReversibleError):
        poincare(ReversiblePair(np.full(3, 1 / 3), P))


@given(reversible_pairs(max_size=5))
@settings(max_examples=30, deadline=None)
def test_eta_chi2_is_squared_second_singular_value(pair):
    pi = pair.pi
    q = pi @ pair.P
    B = np.sqrt(pi)[:, None] * pair.P / np.sqrt(q)[None, :]
    sv = np.linalg.svd(B, compute_uv=False)
    assert eta_chi2(pi, pair.P).value == pytest.approx(sv[1] ** 2, abs=1e-10)


def test_eta_chi2_of_rectangular_channel(rng):
    pi = rng.dirichlet(np.ones(3))
    K = rng.dirichlet(np.ones(5), size=3)
    q = pi @ K
    B = np.sqrt(pi)[:, None] * K / np.sqrt(q)[None, :]
    sv = np.linalg.svd(B, compute_uv=False)
    assert eta_chi2(pi, K).value == pytest.approx(sv[1] ** 2, abs=1e-10)
    # K K* is a reversible kernel with respect to pi
    Q = K @ reverse_kernel(pi, K)
    assert np.allclose(pi[:, None] * Q, (pi[:, None] * Q).T)


@pytest.mark.parametrize("seed", range(5))
def test_eta_tv_brute_force(seed):
    rng = np.random.default_rng(seed)
    K = rng.dirichlet(np.ones(4), size=5)
    pi = np.array([0.2, 0.0, 0.3, 0.25, 0.25])
    charged = [0, 2, 3, 4]
    brute = max(0.5 * np.abs(K[i] - K[j]).sum() for i, j in itertools.combinations(charged, 2))
    est = eta_tv(pi, K)
    assert est.value == pytest.approx(brute, abs=1e-15)
    assert est.info["pair"][0] in charged and est.info["pair"][1] in charged


def test_constant_estimate_validates_labels():
    with pytest.raises(ValueError):
        ConstantEstimate("beta", 1.0, "closed_form")
    with pytest.raises(ValueError):
        ConstantEstimate("rho", 1.0, "guess")
