import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

from entrocon.chain_core import density
from entrocon.functionals import (INF, binary_entropy, binary_kl, chi2_div, dirichlet_entropy,
                                  dirichlet_form, entropy_decay_derivative, entropy_functional,
                                  evolve, f_n, g_n, kl, tv, variance_decay_derivative,
                                  variance_functional)

from conftest import distributions, reversible_pairs


@given(st.data())
@settings(max_examples=40, deadline=None)
def test_kl_matches_scipy(data):
    n = data.draw(st.integers(2, 6))
    nu, mu = data.draw(distributions(n)), data.draw(distributions(n))
    assert kl(nu, mu) == pytest.approx(scipy_entropy(nu, mu), rel=1e-10, abs=1e-14)


def test_divergences_infinite_off_support():
    assert kl([0.5, 0.5], [1.0, 0.0]) == INF
    assert chi2_div([0.5, 0.5], [1.0, 0.0]) == INF


def test_chi2_and_tv_by_hand():
    nu, mu = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    assert chi2_div(nu, mu) == pytest.approx(0.25 / 0.25 + 0.25 / 0.75 - 1)
    assert tv(nu, mu) == pytest.approx(0.25)


@given(st.data())
@settings(max_examples=30, deadline=None)
def test_entropy_functional_is_kl_of_density(data):
    n = data.draw(st.integers(2, 5))
    pi, nu = data.draw(distributions(n)), data.draw(distributions(n))
    f = density(nu, pi)
    assert entropy_functional(pi, f) == pytest.approx(kl(nu, pi), rel=1e-10, abs=1e-14)
    assert entropy_functional(pi, 3.0 * f) == pytest.approx(3.0 * kl(nu, pi), rel=1e-10, abs=1e-13)
    assert variance_functional(pi, f) == pytest.approx(chi2_div(nu, pi), rel=1e-9, abs=1e-13)


@given(reversible_pairs(), st.data())
@settings(max_examples=30, deadline=None)
def test_dirichlet_forms_edgewise(pair, data):
    f = np.array(data.draw(st.lists(st.floats(0.1, 5.0), min_size=pair.n, max_size=pair.n)))
    W = pair.pi[:, None] * pair.P
    edge = 0.5 * np.sum(W * (f[:, None] - f[None, :]) ** 2)
    assert dirichlet_form(pair, f, f) == pytest.approx(edge, rel=1e-9, abs=1e-13)
    lf = np.log(f)
    assert dirichlet_entropy(pair, f) == pytest.approx(dirichlet_form(pair, f, lf), rel=1e-9, abs=1e-13)


def test_dirichlet_entropy_infinite_at_zero(two_point):
    assert dirichlet_entropy(two_point, np.array([0.0, 2.0])) == INF


@pytest.mark.parametrize("t", [0.2, 1.0, 3.0])
def test_decay_derivatives_central_differences(two_point, t):
    nu = np.array([0.9, 0.1])
    h = 1e-5

    def ent(s):
        return entropy_functional(two_point.pi, density(evolve(two_point, nu, s), two_point.pi))

    def var(s):
        return variance_functional(two_point.pi, density(evolve(two_point, nu, s), two_point.pi))

    fd_ent = (ent(t + h) - ent(t - h)) / (2 * h)
    fd_var = (var(t + h) - var(t - h)) / (2 * h)
    assert entropy_decay_derivative(two_point, nu, t) == pytest.approx(fd_ent, rel=1e-6)
    assert variance_decay_derivative(two_point, nu, t) == pytest.approx(fd_var, rel=1e-6)


def test_variance_decay_two_point_closed_form(two_point):
    # the nontrivial eigenvalue of P is 1/2, so Var(f_t) = Var(f_0) exp(-t)
    nu = np.array([1.0, 0.0])
    for t in (0.0, 0.5, 2.0):
        f = density(evolve(two_point, nu, t), two_point.pi)
        assert variance_functional(two_point.pi, f) == pytest.approx(math.exp(-t), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_binary_helpers(x):
    assert binary_entropy(x) == pytest.approx(float(scipy_entropy([x, 1 - x])), abs=1e-15)
    assert binary_kl(x, 0.5) == pytest.approx(math.log(2) - binary_entropy(x), abs=1e-14)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_f_n_is_kl_from_uniform(n):
    for x in (1 / n, 0.6, 1.0):
        law = np.array([x] + [(1 - x) / (n - 1)] * (n - 1))
        assert f_n(x, n) == pytest.approx(kl(law, np.full(n, 1 / n)), abs=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_g_n_identity(n):
    u = np.linspace(0, 1, 11)
    assert np.allclose(f_n(1 - u, n + 1), math.log(n + 1) - g_n(u, n), atol=1e-14)
