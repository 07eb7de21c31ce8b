"""Wasserstein distances on finite metric spaces and coupling lower bounds on delta.

If every pair of rows satisfies ``W_inf(P(x,.), P(y,.)) <= d(x,y)`` and
``W_1(P(x,.), P(y,.)) <= (1 - kappa) d(x,y)``, then ``delta >= kappa``.
For a graph metric both conditions reduce to adjacent pairs, because both
Wasserstein distances are themselves metrics.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp
from scipy.optimize import linprog
from scipy.sparse.csgraph import shortest_path

from .chain_core import ReversiblePair, to_float
from .spectral import ConstantEstimate

MASS_TOL = 1e-12


@dataclass(frozen=True)
class FiniteMetric:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        object.__setattr__(self, "d", d)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("metric must be a square matrix")
        if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
            raise ValueError("metric must be nonnegative, symmetric, zero on the diagonal")
        # d(x,z) <= d(x,y) + d(y,z) for every triple, one x at a time
        for x in range(d.shape[0]):
            if np.max(d[x][None, :] - d[x][:, None] - d) > 1e-12:
                raise ValueError("triangle inequality fails")

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_graph(cls, adjacency) -> "FiniteMetric":
        """Shortest-path metric of a connected graph given by a 0/1 matrix."""
        dist = shortest_path(np.asarray(adjacency, dtype=float), unweighted=True, directed=False)
        if not np.all(np.isfinite(dist)):
            raise ValueError("graph is disconnected")
        return cls(dist)


@dataclass(frozen=True)
class Coupling:
    joint: np.ndarray

    def marginals(self):
        return self.joint.sum(axis=1), self.joint.sum(axis=0)

    def cost(self, d: FiniteMetric) -> float:
        return float(np.sum(self.joint * d.d))

    def couples(self, mu, nu, tol: float = 1e-9) -> bool:
        a, b = self.marginals()
        return bool(np.max(np.abs(a - mu)) <= tol and np.max(np.abs(b - nu)) <= tol
                    and np.all(self.joint >= -tol))


def _check(mu, nu, d: FiniteMetric):
    mu = to_float(mu)
    nu = to_float(nu)
    if mu.shape != nu.shape or mu.shape[0] != d.n:
        raise ValueError("distributions and metric live on different spaces")
    if abs(mu.sum() - nu.sum()) > 1e-9:
        raise ValueError("marginals carry different total mass")
    return mu, nu


def w1(mu, nu, d: FiniteMetric) -> tuple[float, Coupling]:
    """Optimal transport cost and an optimal coupling, by linear programming."""
    mu, nu = _check(mu, nu, d)
    I = np.flatnonzero(mu > MASS_TOL)
    J = np.flatnonzero(nu > MASS_TOL)
    a, b = mu[I], nu[J]
    b = b * (a.sum() / b.sum())
    m, k = len(I), len(J)
    c = d.d[np.ix_(I, J)].ravel()
    rows = np.zeros((m, m * k))
    for i in range(m):
        rows[i, i * k:(i + 1) * k] = 1
    cols = np.zeros((k, m * k))
    for j in range(k):
        cols[j, j::k] = 1
    A = np.vstack([rows, cols])[:-1]  # one equality is redundant
    rhs = np.concatenate([a, b])[:-1]
    res = linprog(c, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    joint = np.zeros((d.n, d.n))
    joint[np.ix_(I, J)] = np.maximum(res.x.reshape(m, k), 0.0)
    return float(res.fun), Coupling(joint)


def _flow_feasible(a, b, allowed) -> bool:
    G = nx.DiGraph()
    for i, w in enumerate(a):
        G.add_edge("s", ("u", i), capacity=float(w))
    for j, w in enumerate(b):
        G.add_edge(("v", j), "t", capacity=float(w))
    for i, j in zip(*np.nonzero(allowed)):
        G.add_edge(("u", int(i)), ("v", int(j)))
    value = nx.maximum_flow_value(G, "s", "t", flow_func=edmonds_karp)
    return value >= a.sum() - 1e-10


def _supports(mu, nu, d: FiniteMetric):
    mu, nu = _check(mu, nu, d)
    I = np.flatnonzero(mu > MASS_TOL)
    J = np.flatnonzero(nu > MASS_TOL)
    return mu[I], nu[J], d.d[np.ix_(I, J)]


def w_infty_within(mu, nu, d: FiniteMetric, radius: float) -> bool:
    """Whether some coupling of mu and nu moves no mass farther than ``radius``."""
    a, b, D = _supports(mu, nu, d)
    return _flow_feasible(a, b, D <= radius + 1e-12)


def w_infty(mu, nu, d: FiniteMetric) -> float:
    """Smallest r admitting a coupling supported on {d <= r}.

    Binary search over the distance values between the two supports, with
    a max-flow feasibility test at each radius.
    """
    a, b, D = _supports(mu, nu, d)
    radii = np.unique(D)
    lo, hi = 0, len(radii) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _flow_feasible(a, b, D <= radii[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(radii[lo])


@dataclass(frozen=True)
class CouplingReport:
    """Outcome of the coupling criterion; ``estimate`` is None when it fails."""

    estimate: ConstantEstimate | None
    worst_pair: tuple | None
    w_infty_violations: list = field(default_factory=list)
    checked_pairs: int = 0


def delta_lower_from_coupling(pair: ReversiblePair, d: FiniteMetric, adjacency,
                              sample: int = 20, seed: int = 0) -> CouplingReport:
    """kappa = 1 - max W_1/d over the supplied pairs, certified when W_inf <= d.

    ``sample`` extra non-adjacent pairs are drawn (deterministically from
    ``seed``) and their W_inf condition is checked as well.
    """
    P = to_float(pair.P)
    pairs = [tuple(e) for e in adjacency]
    worst, worst_pair = 0.0, None
    violations = []
    for x, y in pairs:
        dxy = d.d[x, y]
        if not w_infty_within(P[x], P[y], d, dxy):
            violations.append((x, y))
        cost, _ = w1(P[x], P[y], d)
        if cost / dxy > worst:
            worst, worst_pair = cost / dxy, (x, y)
    rng = np.random.default_rng(seed)
    adjacent = set(pairs) | {(y, x) for x, y in pairs}
    extra = 0
    for _ in range(sample * 5):
        if extra >= sample or pair.n < 3:
            break
        x, y = (int(v) for v in rng.choice(pair.n, size=2, replace=False))
        if (x, y) in adjacent:
            continue
        extra += 1
        if not w_infty_within(P[x], P[y], d, d.d[x, y]):
            violations.append((x, y))
    if violations:
        return CouplingReport(None, worst_pair, violations, len(pairs) + extra)
    kappa = 1.0 - worst
    est = ConstantEstimate("delta", kappa, "certified_lower", tolerance=1e-9,
                           note="W_inf <= d and W_1 <= (1 - kappa) d")
    return CouplingReport(est, worst_pair, [], len(pairs) + extra)


# ------------------------------------------------------ Bernoulli-Laplace


def johnson_states(n: int, k: int) -> list[frozenset]:
    return [frozenset(c) for c in itertools.combinations(range(n), k)]


def johnson_distance(x: frozenset, y: frozenset) -> int:
    return len(x - y)


def johnson_metric(n: int, k: int) -> FiniteMetric:
    states = johnson_states(n, k)
    d = np.array([[johnson_distance(x, y) for y in states] for x in states], dtype=float)
    return FiniteMetric(d)


def johnson_edges(n: int, k: int) -> list[tuple[int, int]]:
    states = johnson_states(n, k)
    return [(i, j) for i, j in itertools.combinations(range(len(states)), 2)
            if johnson_distance(states[i], states[j]) == 1]


def _swap(x: frozenset, i: int, j: int) -> frozenset:
    """Exchange the roles of coordinates i and j of the indicator of x."""
    s = set(x)
    if (i in s) != (j in s):
        s ^= {i, j}
    return frozenset(s)


def bl_row(n: int, k: int, x: frozenset) -> dict:
    """One row of the lazy Bernoulli-Laplace walk, in exact arithmetic."""
    w = Fraction(1, 2 * k * (n - k))
    row = defaultdict(Fraction)
    row[x] += Fraction(1, 2)
    for i in x:
        for j in set(range(n)) - x:
            row[_swap(x, i, j)] += w
    return dict(row)


@dataclass(frozen=True)
class ExplicitCoupling:
    """Sparse coupling: ``mass[(u, v)]`` is the weight put on the pair (u, v)."""

    mass: dict
    part: dict
    expected_distance: Fraction
    max_distance: int


def bernoulli_laplace_coupling(n: int, k: int, x, y) -> ExplicitCoupling:
    """Five-part coupling of the rows at adjacent k-subsets x and y.

    With x = S + {a}, y = S + {b}: shared swaps (i in S, j outside) are
    coupled to themselves, swaps of a against j with swaps of b against j,
    swaps of b into x with swaps of a into y, the a-b swap with the other
    chain's holding move, and the leftover holding masses with each other.
    The marginals are checked exactly against both rows.
    """
    x, y = frozenset(x), frozenset(y)
    if len(x) != k or len(y) != k or johnson_distance(x, y) != 1:
        raise ValueError("x and y must be adjacent k-subsets")
    (a,), (b,) = x - y, y - x
    S = x & y
    outside = set(range(n)) - x - y
    w = Fraction(1, 2 * k * (n - k))
    mass = defaultdict(Fraction)
    part = defaultdict(Fraction)

    def put(u, v, m, label):
        mass[(u, v)] += m
        part[label] += m

    for i in S:
        for j in outside:
            put(_swap(x, i, j), _swap(y, i, j), w, 1)
    for j in outside:
        put(_swap(x, a, j), _swap(y, b, j), w, 2)
    for i in S:
        put(_swap(x, b, i), _swap(y, a, i), w, 3)
    put(_swap(x, a, b), y, w, 4)
    put(x, _swap(y, a, b), w, 4)
    put(x, y, Fraction(1, 2) - w, 5)

    left, right = defaultdict(Fraction), defaultdict(Fraction)
    for (u, v), m in mass.items():
        left[u] += m
        right[v] += m
    if {u: m for u, m in left.items() if m} != bl_row(n, k, x) or \
            {v: m for v, m in right.items() if m} != bl_row(n, k, y):
        raise AssertionError("coupling marginals differ from the transition rows")
    expected = sum((m * johnson_distance(u, v) for (u, v), m in mass.items()), Fraction(0))
    dmax = max(johnson_distance(u, v) for (u, v), m in mass.items() if m)
    return ExplicitCoupling(dict(mass), dict(part), expected, dmax)


def bernoulli_laplace_kappa(n: int, k: int) -> Fraction:
    """Exact kappa from the explicit coupling at one adjacent pair (all pairs are alike)."""
    x = frozenset(range(k))
    y = frozenset(list(range(k - 1)) + [k])
    c = bernoulli_laplace_coupling(n, k, x, y)
    return 1 - c.expected_distance
