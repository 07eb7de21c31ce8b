"""Divergences, entropy and variance functionals, the Dirichlet form and
the scalar helper functions used by the bipartite analysis.

All logarithms are natural and ``0 log 0 = 0``.  Divergences that are
infinite return the module constant :data:`INF` rather than overflowing.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import xlogy

from .chain_core import ReversiblePair, density, semigroup, to_float

INF = math.inf


def _pair(nu, mu):
    nu = to_float(nu)
    mu = to_float(mu)
    if nu.shape != mu.shape:
        raise ValueError("distributions on different spaces")
    return nu, mu


def kl(nu, mu) -> float:
    """KL divergence D(nu || mu); INF when nu is not absolutely continuous."""
    nu, mu = _pair(nu, mu)
    on = nu > 0
    if np.any(mu[on] <= 0):
        return INF
    val = float(np.sum(nu[on] * np.log(nu[on] / mu[on])))
    return max(val, 0.0)


def chi2_div(nu, mu) -> float:
    nu, mu = _pair(nu, mu)
    if np.any((mu <= 0) & (nu > 0)):
        return INF
    on = mu > 0
    return max(float(np.sum(nu[on] ** 2 / mu[on]) - 1.0), 0.0)


def tv(nu, mu) -> float:
    nu, mu = _pair(nu, mu)
    return float(0.5 * np.abs(nu - mu).sum())


def entropy_excess(d):
    """(1+d) log(1+d) - d for d >= -1, with a series near 0 to avoid cancellation."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < 1e-3
    out = xlogy(1 + d, 1 + d) - d
    ds = np.where(small, d, 0.0)
    series = sum((-1) ** k * ds**k / (k * (k - 1)) for k in range(2, 9))
    return np.where(small, series, out)


def entropy_functional(pi, f) -> float:
    """Ent_pi(f) = pi[f log(f / pi[f])] for f >= 0.

    Evaluated as m pi[psi(f/m - 1)] with psi(d) = (1+d) log(1+d) - d, which
    is accurate even when f is within rounding distance of a constant.
    """
    pi = to_float(pi)
    f = np.asarray(f, dtype=float)
    m = float(pi @ f)
    if m <= 0:
        raise ValueError("f vanishes pi-almost everywhere")
    val = m * float(pi @ entropy_excess(f / m - 1.0))
    return max(val, 0.0)


def variance_functional(pi, f) -> float:
    pi = to_float(pi)
    f = np.asarray(f, dtype=float)
    m = float(pi @ f)
    return max(float(pi @ (f - m) ** 2), 0.0)


def dirichlet_form(pair: ReversiblePair, f, g) -> float:
    """E(f, g) = -pi[f (L g)] with L = P - I.

    Written as sum pi(x) P(x,y) f(x) (g(x) - g(y)), and for reversible pairs
    as the symmetric edge sum, so nearly constant f and g lose no precision.
    """
    pi = to_float(pair.pi)
    P = to_float(pair.P)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    w = pi[:, None] * P
    dg = g[:, None] - g[None, :]
    if np.allclose(w, w.T, rtol=0, atol=1e-14 * max(w.max(), 1e-300)):
        return float(0.5 * np.sum(w * (f[:, None] - f[None, :]) * dg))
    return float(np.sum(w * f[:, None] * dg))


def dirichlet_entropy(pair: ReversiblePair, f) -> float:
    """E(f, log f) written edge-wise so that zeros of f give INF, not NaN.

    For reversible pairs E(f, log f) = 1/2 sum pi(x)P(x,y)(f(x)-f(y))(log f(x) - log f(y)).
    """
    pi = to_float(pair.pi)
    P = to_float(pair.P)
    f = np.asarray(f, dtype=float)
    w = pi[:, None] * P
    with np.errstate(divide="ignore", invalid="ignore"):
        lf = np.log(f)
        d = (f[:, None] - f[None, :]) * (lf[:, None] - lf[None, :])
    active = w > 0
    both_zero = (f[:, None] == 0) & (f[None, :] == 0)
    d = np.where(both_zero, 0.0, d)
    vals = d[active]
    if np.any(np.isinf(vals)) or np.any(np.isnan(vals)):
        return INF
    return float(0.5 * np.sum(w[active] * vals))


def evolve(pair: ReversiblePair, nu, t: float) -> np.ndarray:
    return np.asarray(nu, dtype=float) @ semigroup(pair.P, t)


def entropy_decay_derivative(pair: ReversiblePair, nu, t: float, h: float = 1e-4) -> float:
    """d/dt Ent_pi(f_t) = -E(f_t, log f_t) where f_t = d(nu T_t)/d pi.

    When f_t has zeros on the support of pi (only possible at t = 0) the
    derivative is -infinity; a forward difference with step ``h`` is
    returned instead.
    """
    pi = to_float(pair.pi)
    nu_t = evolve(pair, nu, t)
    f = density(nu_t, pi)
    if np.any(f[pi > 0] <= 0):
        ent0 = entropy_functional(pi, f)
        ent1 = entropy_functional(pi, density(evolve(pair, nu, t + h), pi))
        return (ent1 - ent0) / h
    return -dirichlet_entropy(pair, f)


def variance_decay_derivative(pair: ReversiblePair, nu, t: float) -> float:
    """d/dt Var_pi(f_t) = -2 E(f_t, f_t)."""
    pi = to_float(pair.pi)
    f = density(evolve(pair, nu, t), pi)
    return -2.0 * dirichlet_form(pair, f, f)


# ------------------------------------------------------- scalar helpers


def binary_entropy(x):
    """h(x) = -x log x - (1-x) log(1-x)."""
    x = np.asarray(x, dtype=float)
    return -xlogy(x, x) - xlogy(1 - x, 1 - x)


def binary_kl(x, y):
    """d(x || y) between Bernoulli(x) and Bernoulli(y)."""
    x = np.asarray(x, dtype=float)
    return xlogy(x, x / y) + xlogy(1 - x, (1 - x) / (1 - y))


def f_n(x, n: int):
    """KL divergence of (x, (1-x)/(n-1), ...) from the uniform law on n points."""
    x = np.asarray(x, dtype=float)
    return math.log(n) + xlogy(x, x) + xlogy(1 - x, (1 - x) / (n - 1))


def g_n(u, n: int):
    """g_n(u) = -(1-u) log(1-u) - u log(u/n); note f_{n+1}(1-u) = log(n+1) - g_n(u)."""
    u = np.asarray(u, dtype=float)
    return -xlogy(1 - u, 1 - u) - xlogy(u, u / n)
