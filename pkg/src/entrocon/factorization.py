"""Factorizations P = K K* of reversible kernels.

Constructors emit Fraction arrays when given exact input, so the product
identity can be checked with residual exactly zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .chain_core import (ReversiblePair, exact_array, is_exact, reverse_kernel, to_float,
                         uniform)
from .spectral import ConstantEstimate


class NotLazyError(ValueError):
    pass


@dataclass(frozen=True)
class Factorization:
    """Input law ``pi``, forward kernel ``K`` (X -> Y) and its reverse channel."""

    pi: np.ndarray
    K: np.ndarray
    Kstar: np.ndarray
    outputs: tuple
    info: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return is_exact(self.K)

    def product(self) -> np.ndarray:
        return sparse_product(self.K, self.Kstar)

    def residual(self, P) -> float | Fraction:
        """Largest entrywise gap between ``K K*`` and ``P`` (a Fraction when exact)."""
        diff = self.product() - (P if self.exact == is_exact(P) else _like(P, self.exact))
        if self.exact:
            return max(abs(v) for v in diff.ravel())
        return float(np.max(np.abs(diff)))

    def pair(self) -> ReversiblePair:
        return ReversiblePair(self.pi, self.product())


def _like(a, exact):
    return exact_array(a) if exact else to_float(a)


def make_factorization(pi, K, outputs, info=None) -> Factorization:
    return Factorization(pi, K, reverse_kernel(pi, K), tuple(outputs), dict(info or {}))


def sparse_product(K, L) -> np.ndarray:
    """``K @ L`` touching only nonzero entries; exact for Fraction arrays."""
    if not is_exact(K) and not is_exact(L):
        return to_float(K) @ to_float(L)
    n, m = K.shape
    out = np.full((n, L.shape[1]), Fraction(0), dtype=object)
    for z in range(m):
        rows = [i for i in range(n) if K[i, z] != 0]
        if not rows:
            continue
        cols = [j for j in range(L.shape[1]) if L[z, j] != 0]
        for i in rows:
            kz = K[i, z]
            for j in cols:
                out[i, j] += kz * L[z, j]
    return out


def _drop_null_columns(K, outputs):
    keep = [j for j in range(K.shape[1]) if any(K[i, j] != 0 for i in range(K.shape[0]))]
    return K[:, keep], [outputs[j] for j in keep]


def lazy_factorize(pair: ReversiblePair) -> Factorization:
    """Factor a lazy chain through singletons and pairs of states.

    ``K(x, {x}) = 2P(x,x) - 1`` and ``K(x, {x,y}) = 2P(x,y)``; the reverse
    channel of every pair is uniform on it.  Output symbols that no state can
    reach are dropped.
    """
    P = pair.P
    n = pair.n
    exact = pair.exact
    half = Fraction(1, 2) if exact else 0.5
    if any(P[x, x] < half - (0 if exact else 1e-15) for x in range(n)):
        raise NotLazyError("some diagonal entry is below 1/2")
    pi = exact_array(pair.pi) if exact else to_float(pair.pi)
    P = exact_array(P) if exact else to_float(P)
    outputs = [(x,) for x in range(n)] + list(itertools.combinations(range(n), 2))
    zero = Fraction(0) if exact else 0.0
    K = np.full((n, len(outputs)), zero, dtype=object if exact else float)
    for x in range(n):
        K[x, x] = 2 * P[x, x] - 1
    for j, (x, y) in enumerate(outputs[n:], start=n):
        K[x, j] = 2 * P[x, y]
        K[y, j] = 2 * P[y, x]
    if not exact:
        K = np.maximum(K, 0.0)
    K, outputs = _drop_null_columns(K, outputs)
    return make_factorization(pi, K, outputs)


def psd_check(pair: ReversiblePair, tol: float = 1e-10) -> tuple[bool, float]:
    """Whether Diag(pi) P is positive semidefinite, with its smallest eigenvalue.

    A negative answer proves that no factorization exists.
    """
    A = to_float(pair.pi)[:, None] * to_float(pair.P)
    A = 0.5 * (A + A.T)
    lo = float(np.linalg.eigvalsh(A)[0])
    return lo >= -tol, lo


def mix_factorizations(f0: Factorization, f1: Factorization, t) -> Factorization:
    """Factor of (1-t) P0 + t P1 on the disjoint union of the two output alphabets."""
    pi0 = to_float(f0.pi)
    pi1 = to_float(f1.pi)
    if pi0.shape != pi1.shape or np.max(np.abs(pi0 - pi1)) > 1e-12:
        raise ValueError("factorizations have different input laws")
    if not 0 <= t <= 1:
        raise ValueError("mixing weight outside [0, 1]")
    exact = f0.exact and f1.exact and not isinstance(t, float)
    if exact:
        t = Fraction(t)
        K = np.concatenate([(1 - t) * f0.K, t * f1.K], axis=1)
        pi = f0.pi
    else:
        K = np.concatenate([(1 - float(t)) * to_float(f0.K), float(t) * to_float(f1.K)], axis=1)
        pi = pi0
    outputs = [(0, y) for y in f0.outputs] + [(1, y) for y in f1.outputs]
    return make_factorization(pi, K, outputs)


@dataclass(frozen=True)
class SinkhornResult:
    matrix: np.ndarray
    row_scaling: np.ndarray
    col_scaling: np.ndarray
    iterations: int


class NonConvergenceError(RuntimeError):
    pass


def sinkhorn(A, tol: float = 1e-10, max_iter: int = 100_000) -> SinkhornResult:
    """Diagonal scalings making a positive matrix doubly stochastic.

    Symmetric input gets a symmetric scaling ``D A D`` (fixed point of
    ``d <- sqrt(d / (A d))``), which preserves positive semidefiniteness.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    if np.any(A <= 0):
        raise ValueError("entries must be strictly positive")
    n = A.shape[0]
    symmetric = np.allclose(A, A.T, rtol=0, atol=0)

    def done(r, c):
        return max(np.max(np.abs(r.sum(axis=1) - 1)), np.max(np.abs(r.sum(axis=0) - 1))) <= tol

    r, c = np.ones(n), np.ones(n)
    for it in range(max_iter + 1):
        B = r[:, None] * A * c[None, :]
        if done(B, None):
            return SinkhornResult(B, r, c, it)
        if symmetric:
            r = np.sqrt(r / (A @ r))
            c = r
        else:
            r = 1.0 / (A @ c)
            c = 1.0 / (A.T @ r)
    raise NonConvergenceError(f"no convergence after {max_iter} iterations")


def complete_graph_factor(n: int, ell: int, exact: bool = True) -> Factorization:
    """Factor of the lazy complete-graph walk through singletons and ell-subsets.

    The half-step constant of this factor is known in closed form and is
    attached as ``info["alpha"]``.
    """
    if not 2 <= ell <= n:
        raise ValueError("need 2 <= ell <= n")
    one = Fraction(1) if exact else 1.0
    stay = one * (ell - 2) / (2 * (ell - 1))
    move = one * ell / (2 * (ell - 1) * math.comb(n - 1, ell - 1))
    outputs = [(x,) for x in range(n)] + list(itertools.combinations(range(n), ell))
    zero = Fraction(0) if exact else 0.0
    K = np.full((n, len(outputs)), zero, dtype=object if exact else float)
    for x in range(n):
        K[x, x] = stay
    for j, A in enumerate(outputs[n:], start=n):
        for x in A:
            K[x, j] = move
    K, outputs = _drop_null_columns(K, outputs)
    a = ell * math.log(ell) / (2 * (ell - 1) * math.log(n))
    return make_factorization(uniform(n, exact), K, outputs,
                              {"alpha": ConstantEstimate("alpha", a, "closed_form",
                                                         note="l log l / (2 (l-1) log n)")})


def complete_lazy_kernel(n: int, exact: bool = True) -> np.ndarray:
    one = Fraction(1) if exact else 1.0
    P = np.full((n, n), one / (2 * (n - 1)), dtype=object if exact else float)
    for x in range(n):
        P[x, x] = one / 2
    return P


# ----------------------------------------------------------- block dynamics


def _configs(q: int, n: int):
    return list(itertools.product(range(q), repeat=n))


def _check_weights(weights: dict) -> dict:
    total = sum(weights.values())
    if any(w < 0 for w in weights.values()) or abs(float(total) - 1) > 1e-12:
        raise ValueError("block weights must form a distribution")
    return {frozenset(A): w for A, w in weights.items() if w != 0}


def _conditional(pi, configs, sigma, keep):
    """pi(. | agrees with sigma on coordinates ``keep``) as a vector."""
    mask = np.array([all(eta[i] == sigma[i] for i in keep) for eta in configs])
    w = np.where(mask, pi, 0 * pi[0])
    return w / w.sum()


def block_dynamics_kernel(pi, q: int, n: int, weights: dict) -> np.ndarray:
    """P(s, s') = sum_A w_A pi(s' | s off A)."""
    weights = _check_weights(weights)
    configs = _configs(q, n)
    pi = np.asarray(pi, dtype=object) if is_exact(pi) else np.asarray(pi, dtype=float).ravel()
    P = None
    for A, w in weights.items():
        keep = [i for i in range(n) if i not in A]
        rows = np.array([_conditional(pi, configs, s, keep) for s in configs])
        P = w * rows if P is None else P + w * rows
    return P


def glauber_weights(n: int, exact: bool = True) -> dict:
    w = Fraction(1, n) if exact else 1.0 / n
    return {frozenset([i]): w for i in range(n)}


def block_dynamics_factor(pi, q: int, n: int, weights: dict) -> Factorization:
    """Factor through pairs (block, configuration): K(s, (A, eta)) = w_A pi(eta | s off A)."""
    if q ** n > 4096:
        raise ValueError("explicit tables are limited to q**n <= 4096")
    pi = pi if is_exact(pi) else np.asarray(pi, dtype=float).ravel()
    if len(pi) != q ** n:
        raise ValueError("pi table has the wrong size")
    weights = _check_weights(weights)
    configs = _configs(q, n)
    charged = [j for j in range(len(configs)) if pi[j] > 0]
    blocks = sorted(weights, key=lambda A: (len(A), sorted(A)))
    outputs = [(tuple(sorted(A)), configs[j]) for A in blocks for j in charged]
    cols = []
    for A in blocks:
        keep = [i for i in range(n) if i not in A]
        cond = np.array([_conditional(pi, configs, s, keep) for s in configs])
        cols.append(weights[A] * cond[:, charged])
    K = np.concatenate(cols, axis=1)
    return make_factorization(pi, K, outputs)
