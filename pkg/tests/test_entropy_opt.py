import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import approx_fprime
from scipy.stats import poisson

from entrocon import entropy_opt as eo
from entrocon.chain_core import ReversiblePair, point_mass
from entrocon.config import OptimizerConfig
from entrocon.functionals import kl
from entrocon.gallery import make_chain
from entrocon.spectral import eta_chi2, eta_tv, poincare

from conftest import reversible_from_weights, reversible_pairs

FAST = OptimizerConfig(starts=8, point_seeds=4)


def random_pair(seed, n=3):
    rng = np.random.default_rng(seed)
    return reversible_from_weights(rng.uniform(0.05, 1.0, size=(n, n)))


@given(reversible_pairs(max_size=4))
@settings(max_examples=10, deadline=None)
def test_eta_kl_bracket_sits_between_chi2_and_tv(pair):
    br = eo.eta_kl_estimate(pair.pi, pair.P, FAST)
    assert eta_chi2(pair.pi, pair.P).value - 1e-12 <= br.lower.value <= br.upper.value + 1e-12
    assert br.upper.value == pytest.approx(max(eta_tv(pair.pi, pair.P).value, br.lower.value))
    if br.witness is not None:
        assert eo.kl_ratio(pair.pi, pair.P, br.witness) == pytest.approx(br.lower.value, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_eta_kl_agrees_with_grid_oracle(seed):
    pair = random_pair(seed)
    oracle, _ = eo.eta_kl_grid_oracle(pair.pi, pair.P)
    est = eo.eta_kl_estimate(pair.pi, pair.P)
    # the oracle only sees lattice points, so it cannot beat the optimizer
    assert est.lower.value >= oracle - 1e-9
    assert est.lower.value == pytest.approx(oracle, abs=1e-4)


def test_kl_ratio_gradient():
    pair = random_pair(7, n=4)
    ratio = eo.KLRatio(pair.pi, pair.P)
    theta = np.array([0.3, -0.2, 1.1, 0.0])
    _, grad = ratio.neg_ratio(theta)
    fd = approx_fprime(theta, lambda th: ratio.neg_ratio(th)[0], 1e-7)
    assert np.allclose(grad, fd, atol=1e-6)


@pytest.mark.parametrize("cls", [eo.LSIRatio, eo.MLSIRatio])
def test_functional_ratio_gradient(cls):
    ratio = cls(random_pair(3, n=4))
    theta = np.array([0.4, -0.7, 0.2, 0.0])
    _, grad = ratio.objective(theta)
    fd = approx_fprime(theta, lambda th: ratio.objective(th)[0], 1e-7)
    assert np.allclose(grad, fd, atol=1e-6)


def test_point_masses_closed_form():
    pair = random_pair(11)
    ratio = eo.KLRatio(pair.pi, pair.P)
    pm = ratio.point_masses()
    for x in range(3):
        assert pm[x] == pytest.approx(eo.kl_ratio(pair.pi, pair.P, point_mass(3, x)), rel=1e-12)


def test_rho_lower_is_continuous_at_half():
    lam = 0.7
    assert eo.rho_lower(lam, 0.5) == lam / 2
    assert eo.rho_lower(lam, 0.5 - 1e-7) == pytest.approx(lam / 2, rel=1e-6)
    with pytest.raises(ValueError):
        eo.rho_lower(lam, 0.6)


def test_two_point_log_sobolev(two_point):
    # for the symmetric two-point chain the log-Sobolev constant is lambda / 2
    br = eo.lsc_estimate(two_point, FAST)
    lam = poincare(two_point).value
    assert br.lower.value == pytest.approx(lam / 2)
    assert br.upper.value == pytest.approx(lam / 2, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_mlsi_agrees_with_grid_oracle(seed):
    pair = random_pair(seed)
    oracle, _ = eo.mlsi_grid_oracle(pair)
    est = eo.mlsc_estimate(pair, factorizable=False)
    assert est.upper.value <= oracle + 1e-9
    assert est.upper.value == pytest.approx(min(oracle, 2 * poincare(pair).value), abs=1e-4)


@pytest.mark.parametrize("seed", range(3))
def test_bound_propagate_chain_on_lazy_pairs(seed):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.05, 1.0, size=(4, 4))
    W = 0.5 * (W + W.T)
    W += np.diag(W.sum(axis=1))  # every diagonal weight at least half the row
    pair = reversible_from_weights(W)
    assert eo.is_lazy(pair.P)
    b = eo.bound_propagate(pair)
    assert b["rho"].value <= b["alpha"].value <= b["delta"].value <= b["rho0"].value
    assert b["delta"].value >= 1 - eta_tv(pair.pi, pair.P).value
    assert b["rho0"].value >= 4 * b["rho"].value
    assert b["rho0"].value <= 2 * b["lambda"].value + 1e-12


def test_bound_propagate_skips_alpha_without_factorization():
    pair = random_pair(5)
    b = eo.bound_propagate(pair, factorizable=False)
    assert "alpha" not in b
    assert b["delta"].value == pytest.approx(1 - eta_tv(pair.pi, pair.P).value)


@pytest.mark.parametrize("n,ell", [(3, 2), (5, 2), (5, 3)])
def test_alpha_of_complete_factor(n, ell):
    ch = make_chain("complete_lazy", n=n, ell=ell)
    br = eo.alpha(ch.factorization.pi, ch.factorization.K)
    assert br.contains(ell * math.log(ell) / (2 * (ell - 1) * math.log(n)), 1e-6)


def test_delta_powers_do_not_shrink():
    pair = make_chain("three_state", M=10).float_pair
    d1 = eo.delta(pair, factorizable=True)
    d2 = eo.delta(pair, m=2, factorizable=True)
    assert d2.upper.value >= d1.lower.value
    assert d2.info["power"] == 2


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_poisson_mixture_tail(t):
    pair = random_pair(2)
    est = eo.poisson_mixture_bound(pair, t, 1, delta_lower=0.5)
    assert est.info["tail"] == pytest.approx(1 - math.exp(-t) * (1 + t), rel=1e-12)
    assert est.value == pytest.approx(0.5 * poisson.sf(1, t))


def test_semigroup_delta_bracket_ordered():
    pair = make_chain("three_state", M=100).float_pair
    br = eo.semigroup_delta(pair, 1.0, FAST)
    assert br.lower.value <= br.upper.value


def test_extremal_residuals_on_three_state():
    pair = make_chain("three_state", M=10).float_pair
    est = eo.mlsc_estimate(pair, factorizable=True)
    rep = eo.extremal_residuals(pair, est.upper)
    assert rep.ok


def test_degenerate_inputs():
    pi = np.array([1.0, 0.0])
    with pytest.raises(eo.DegenerateChainError):
        eo.eta_kl_estimate(pi, np.eye(2))
    reducible = ReversiblePair(np.array([0.5, 0.5]), np.eye(2))
    with pytest.raises(eo.DegenerateChainError):
        eo.mlsc_estimate(reducible)


def test_full_support_condition():
    assert eo.full_support_condition(random_pair(0)) == "strictly_positive"
    cyc = make_chain("lazy_rw_graph", graph="cycle", n=6).float_pair
    assert eo.full_support_condition(cyc) in ("lazy_and_large_eta", "inconclusive")


@pytest.mark.parametrize("k,steps", [(2, 10), (3, 10), (4, 5)])
def test_simplex_grid_counts(k, steps):
    pts = eo.simplex_grid(k, steps)
    assert len(pts) == math.comb(steps + k - 1, k - 1)
    assert np.allclose(pts.sum(axis=1), 1)


def test_kl_ratio_helper_matches_definition():
    pair = random_pair(9)
    nu = np.array([0.6, 0.3, 0.1])
    expected = kl(nu @ pair.P, pair.pi) / kl(nu, pair.pi)
    assert eo.kl_ratio(pair.pi, pair.P, nu) == pytest.approx(expected)
