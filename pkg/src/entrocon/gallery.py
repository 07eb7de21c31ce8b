"""Constructors for the example chains, their known constants and separation sweeps."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

from . import entropy_opt as eo
from .chain_core import ReversiblePair, dumps_chain, exact_array, power, reverse_kernel, to_float
from .config import OptimizerConfig
from .factorization import (Factorization, NotLazyError, complete_graph_factor,
                            complete_lazy_kernel, lazy_factorize, make_factorization)
from .functionals import binary_entropy
from .spectral import ConstantEstimate, eta_tv, poincare
from .transport import bernoulli_laplace_kappa, johnson_distance, johnson_states

FAMILIES = ("one_step", "one_to_k", "bernoulli_laplace", "three_state", "birth_death",
            "complete_lazy", "complete_nonlazy", "complete_bipartite", "random_transposition",
            "lazy_rw_graph", "random_regular")

EXACT_LIMIT = 300  # largest state space built in Fraction arithmetic


class GuardError(ValueError):
    """Parameters outside the supported range or size guard."""


@dataclass(frozen=True)
class ChainSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GuardError(f"unknown family {self.family!r}")

    def get(self, key, default=None):
        return self.params.get(key, default)

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"


@dataclass(frozen=True)
class KnownConstant:
    """A constant with a formula value.

    ``relation`` says how the value relates to the true constant: "exact",
    "lower", "upper", "order" (asymptotic order only, the value is the order
    expression evaluated without constants) or "conjecture".
    """

    name: str
    value: float
    relation: str
    source: str
    kernel: str = "P"

    @property
    def exact(self) -> bool:
        return self.relation == "exact"


@dataclass(frozen=True)
class GalleryChain:
    spec: ChainSpec
    pair: ReversiblePair
    factorization: Factorization | None
    known: tuple
    factorizable: bool
    channel: tuple | None = None  # (pi, K) whose eta_KL is the headline quantity

    @property
    def float_pair(self) -> ReversiblePair:
        return self.pair.as_float()

    def known_value(self, name: str, relation: str | None = None):
        for c in self.known:
            if c.name == name and (relation is None or c.relation == relation):
                return c
        return None


def _frac(v) -> Fraction:
    return Fraction(v) if not isinstance(v, float) else Fraction(repr(v))


def _int(spec, key, lo=None, hi=None, default=None):
    v = spec.get(key, default)
    if v is None:
        raise GuardError(f"{spec.family} needs parameter {key}")
    if isinstance(v, float):
        if not v.is_integer():
            raise GuardError(f"{key} must be an integer")
        v = int(v)
    if lo is not None and v < lo or hi is not None and v > hi:
        raise GuardError(f"{key}={v} outside [{lo}, {hi}]")
    return int(v)


def _lazy_walk(n: int, edges, exact: bool):
    """Lazy walk on a d-regular graph and its edge factorization."""
    deg = np.zeros(n, dtype=int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    d = int(deg[0])
    if np.any(deg != d) or d == 0:
        raise GuardError("graph must be regular with positive degree")
    one = Fraction(1) if exact else 1.0
    zero = one * 0
    dtype = object if exact else float
    P = np.full((n, n), zero, dtype=dtype)
    K = np.full((n, len(edges)), zero, dtype=dtype)
    for x in range(n):
        P[x, x] = one / 2
    for j, (u, v) in enumerate(edges):
        P[u, v] += one / (2 * d)
        P[v, u] += one / (2 * d)
        K[u, j] = one / d
        K[v, j] = one / d
    pi = np.array([one / n] * n, dtype=dtype)
    fac = make_factorization(pi, K, [tuple(e) for e in edges])
    return pi, P, fac, d


def _graph_spectral_gap(n, edges):
    pi, P, _, _ = _lazy_walk(n, edges, exact=False)
    return poincare(ReversiblePair(pi, P)).value


# ------------------------------------------------------------- families


def _one_step(spec):
    n = _int(spec, "n", 2, 10_000, default=3)
    ps = _frac(spec.get("pi_star", Fraction(1, n)))
    if not 0 < ps <= Fraction(1, n):
        raise GuardError("pi_star must lie in (0, 1/n]")
    rest = (1 - ps) / (n - 1)
    pi = exact_array([ps] + [rest] * (n - 1))
    K = exact_array([[1]] * n)
    P = np.array([list(pi) for _ in range(n)], dtype=object)
    fac = make_factorization(pi, K, [("*",)])
    p = float(ps)
    rho = 0.5 if p == 0.5 else (1 - 2 * p) / math.log(1 / p - 1)
    known = (KnownConstant("rho", rho, "exact", "(1 - 2 pi_*) / log(1/pi_* - 1)"),
             KnownConstant("alpha", 1.0, "exact", "single output symbol", "K"),
             KnownConstant("delta", 1.0, "exact", "one step reaches pi"))
    return ReversiblePair(pi, P, tuple(range(n))), fac, known, True, None


def _one_to_k(spec):
    n = _int(spec, "n", 2)
    k = _int(spec, "k", 1)
    if k * n ** k > 1_000_000:
        raise GuardError("one_to_k needs k * n**k <= 1e6")
    outputs = list(itertools.product(range(n), repeat=k))
    exact = len(outputs) * n <= 20_000
    one = Fraction(1) if exact else 1.0
    dtype = object if exact else float
    K = np.full((n, len(outputs)), one * 0, dtype=dtype)
    for j, y in enumerate(outputs):
        for x in set(y):
            K[x, j] = one * y.count(x) / (k * n ** (k - 1))
    pi = np.array([one / n] * n, dtype=dtype)
    P = np.full((n, n), one * (k - 1) / (k * n), dtype=dtype)
    for x in range(n):
        P[x, x] = one / k + one * (k - 1) / (k * n)
    fac = Factorization(pi, K, reverse_kernel(pi, K), tuple("".join(map(str, y)) for y in outputs))
    # point mass: D(nu K || pi K) = log n - sum_i C(k-1,i-1) (n-1)^(k-i) / n^(k-1) log(k/i)
    loss = sum(math.comb(k - 1, i - 1) * (n - 1) ** (k - i) / n ** (k - 1) * math.log(k / i)
               for i in range(1, k + 1))
    known = (KnownConstant("delta", 1 - 1 / k, "lower", "entropy of one uniform coordinate"),
             KnownConstant("alpha", loss / math.log(n), "upper", "point-mass ratio", "K"))
    return ReversiblePair(pi, P, tuple(range(n))), fac, known, True, (pi, K)


def _bernoulli_laplace(spec):
    n = _int(spec, "n", 2)
    k = _int(spec, "k", 1, n - 1)
    N = math.comb(n, k)
    if N > 5000:
        raise GuardError("bernoulli_laplace needs C(n,k) <= 5000")
    states = johnson_states(n, k)
    index = {s: i for i, s in enumerate(states)}
    edges = [(index[x], index[y]) for x in states for y in states
             if index[x] < index[y] and johnson_distance(x, y) == 1]
    pi, P, fac, d = _lazy_walk(N, edges, exact=N <= EXACT_LIMIT)
    labels = tuple("".join("1" if i in s else "0" for i in range(n)) for s in states)
    cb = math.log(N)
    known = [KnownConstant("alpha", math.log(2) / cb, "exact", "log 2 / log C(n,k)", "K"),
             KnownConstant("delta", float(bernoulli_laplace_kappa(n, k)), "lower",
                           "explicit coupling, n / (2k(n-k))"),
             KnownConstant("delta", math.log(2 * n * (n - k)) / (2 * cb), "upper",
                           "point-mass ratio")]
    return ReversiblePair(pi, P, labels), fac, tuple(known), True, (pi, fac.K)


def three_state_kernel(M) -> tuple[np.ndarray, np.ndarray]:
    M = _frac(M)
    pi = np.array([M / (M + 2), 1 / (M + 2), 1 / (M + 2)], dtype=object)
    q = 1 / (4 * M)
    P = np.array([[1 - q, q, Fraction(0)],
                  [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)],
                  [Fraction(0), Fraction(1, 4), Fraction(3, 4)]], dtype=object)
    return pi, P


def _three_state(spec):
    M = spec.get("M", 100)
    if not M > 0:
        raise GuardError("three_state needs M > 0")
    pi, P = three_state_kernel(M)
    M = float(M)
    h = float(binary_entropy(0.25))
    known = (KnownConstant("delta", h / math.log(M + 2), "upper", "point mass at the third state"),
             KnownConstant("rho0", math.log(math.log(M)) / math.log(M) if M > math.e else math.nan,
                           "order", "log log M / log M"))
    return ReversiblePair(pi, P, (1, 2, 3)), None, known, True, None


def birth_death_kernel(m: int, M) -> tuple[np.ndarray, np.ndarray]:
    M = _frac(M)
    size = m + 2
    pi = np.array([1 / (M + m + 1)] * size, dtype=object)
    pi[0] = M / (M + m + 1)
    z = Fraction(0)
    P = np.full((size, size), z, dtype=object)
    P[0, 1] = 1 / (4 * M)
    for x in range(1, size):
        P[x, x - 1] = Fraction(1, 4)
        if x < size - 1:
            P[x, x + 1] = Fraction(1, 4)
    for x in range(size):
        P[x, x] = 1 - sum(P[x, y] for y in range(size) if y != x)
    return pi, P


def _birth_death(spec):
    m = _int(spec, "m", 1)
    M = spec.get("M", 100)
    if not M > 0:
        raise GuardError("birth_death needs M > 0")
    pi, P = birth_death_kernel(m, M)
    row = power(P, m)[m + 1]
    c = np.array([float(v) for v in row[1:]])
    H = float(-np.sum(c * np.log(c)))
    known = (KnownConstant("delta", H / math.log(float(M) + m + 1), "upper",
                           f"point mass at the last state, {m} steps", f"P^{m}"),)
    return ReversiblePair(pi, P, tuple(range(1, m + 3))), None, known, True, None


def _complete_lazy(spec):
    n = _int(spec, "n", 3, 2000)
    ell = _int(spec, "ell", 2, n, default=2)
    exact = n <= 40
    fac = complete_graph_factor(n, ell, exact=exact) if math.comb(n, ell) <= 20_000 else None
    P = complete_lazy_kernel(n, exact)
    pi = fac.pi if fac is not None else np.full(n, 1.0 / n)
    known = [KnownConstant("rho", (n - 2) / (2 * (n - 1) * math.log(n - 1)), "exact",
                           "(n-2) / (2 (n-1) log(n-1))"),
             KnownConstant("lambda", n / (2 * (n - 1)), "exact", "n / (2 (n-1))"),
             KnownConstant("alpha", ell * math.log(ell) / (2 * (ell - 1) * math.log(n)), "exact",
                           "l log l / (2 (l-1) log n) for the l-subset factor", "K")]
    return (ReversiblePair(pi, P, tuple(range(n))), fac, tuple(known), True,
            (fac.pi, fac.K) if fac is not None else None)


def _complete_nonlazy(spec):
    n = _int(spec, "n", 3, 2000)
    one = Fraction(1)
    K = np.full((n, n), one / (n - 1), dtype=object)
    for x in range(n):
        K[x, x] = Fraction(0)
    pi = np.array([one / n] * n, dtype=object)
    eta = (math.log(n) - math.log(n - 1)) / math.log(n)
    known = (KnownConstant("eta_kl", eta, "exact", "(log n - log(n-1)) / log n", "K"),)
    return ReversiblePair(pi, K, tuple(range(n))), None, known, False, (pi, K)


def _complete_bipartite(spec):
    n = _int(spec, "n", 2, 60)
    d = _int(spec, "d", n, n, default=n)
    edges = [(i, n + j) for i in range(n) for j in range(n)]
    pi, P, fac, _ = _lazy_walk(2 * n, edges, exact=True)
    labels = tuple([f"L{i}" for i in range(n)] + [f"R{j}" for j in range(n)])
    eta = math.log(n) / (2 * math.log(2 * n))
    known = (KnownConstant("eta_kl", eta, "exact" if n == 3 else "conjecture",
                           "log n / (2 log 2n), point-mass extremizers"),)
    return ReversiblePair(pi, P, labels), fac, known, True, None


def _random_transposition(spec):
    n = _int(spec, "n", 2, 5)
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    edges = []
    for p in perms:
        for i, j in itertools.combinations(range(n), 2):
            q = list(p)
            q[i], q[j] = q[j], q[i]
            a, b = index[p], index[tuple(q)]
            if a < b:
                edges.append((a, b))
    pi, P, fac, _ = _lazy_walk(len(perms), edges, exact=len(perms) <= EXACT_LIMIT)
    labels = tuple("".join(map(str, p)) for p in perms)
    known = (KnownConstant("alpha", math.log(2) / math.log(math.factorial(n)), "exact",
                           "log 2 / log n!", "K"),
             KnownConstant("rho0", 1 / n, "order", "1/n"))
    return ReversiblePair(pi, P, labels), fac, known, True, (pi, fac.K)


_NAMED_GRAPHS = {
    "cycle": lambda n: nx.cycle_graph(n),
    "complete": lambda n: nx.complete_graph(n),
    "hypercube": lambda n: nx.convert_node_labels_to_integers(nx.hypercube_graph(n)),
    "petersen": lambda n: nx.petersen_graph(),
}


def _lazy_rw_graph(spec):
    name = spec.get("graph", "cycle")
    if "edges" in spec.params:
        edges = [tuple(sorted(map(int, e))) for e in spec.get("edges")]
        n = 1 + max(max(e) for e in edges)
    else:
        if name not in _NAMED_GRAPHS:
            raise GuardError(f"unknown graph {name!r}")
        G = _NAMED_GRAPHS[name](_int(spec, "n", 1, 4096, default=5))
        n = G.number_of_nodes()
        edges = sorted(tuple(sorted(e)) for e in G.edges())
    pi, P, fac, d = _lazy_walk(n, edges, exact=n <= EXACT_LIMIT)
    return ReversiblePair(pi, P, tuple(range(n))), fac, (), True, (pi, fac.K)


def random_regular_edges(n: int, d: int, seed: int, min_gap: float = 0.1, tries: int = 100):
    """Edges of the first seeded random d-regular graph whose lazy walk has gap >= min_gap."""
    for attempt in range(tries):
        G = nx.random_regular_graph(d, n, seed=seed + attempt)
        if not nx.is_connected(G):
            continue
        edges = sorted(tuple(sorted(e)) for e in G.edges())
        if _graph_spectral_gap(n, edges) >= min_gap:
            return edges, seed + attempt
    raise GuardError("no random regular graph passed the spectral-gap filter")


def _random_regular(spec):
    n = _int(spec, "n", 4, 4096, default=16)
    d = _int(spec, "d", 3, n - 1, default=3)
    if n * d % 2:
        raise GuardError("n * d must be even")
    seed = _int(spec, "seed", 0, default=0)
    edges, _ = random_regular_edges(n, d, seed)
    pi, P, fac, _ = _lazy_walk(n, edges, exact=n <= EXACT_LIMIT)
    known = (KnownConstant("rho0", 1 / math.log(n), "order", "1 / log |V|"),)
    return ReversiblePair(pi, P, tuple(range(n))), fac, known, True, (pi, fac.K)


_BUILDERS = {
    "one_step": _one_step, "one_to_k": _one_to_k, "bernoulli_laplace": _bernoulli_laplace,
    "three_state": _three_state, "birth_death": _birth_death, "complete_lazy": _complete_lazy,
    "complete_nonlazy": _complete_nonlazy, "complete_bipartite": _complete_bipartite,
    "random_transposition": _random_transposition, "lazy_rw_graph": _lazy_rw_graph,
    "random_regular": _random_regular,
}


def make_chain(spec: ChainSpec | str, **params) -> GalleryChain:
    if isinstance(spec, str):
        spec = ChainSpec(spec, params)
    pair, fac, known, factorizable, channel = _BUILDERS[spec.family](spec)
    if fac is None and factorizable:
        try:
            fac = lazy_factorize(pair)
        except NotLazyError:
            pass
    return GalleryChain(spec, pair, fac, tuple(known), factorizable, channel)


def known_constants(spec: ChainSpec | str, **params) -> list[KnownConstant]:
    return list(make_chain(spec, **params).known)


def emit_chain(chain: GalleryChain) -> str:
    """Chain-description JSON for the gallery pair."""
    return dumps_chain(chain.pair.pi, chain.pair.P, chain.pair.states)


def emit_factorization(chain: GalleryChain) -> str:
    f = chain.factorization
    if f is None:
        raise ValueError("chain has no attached factorization")
    return dumps_chain(f.pi, f.K, chain.pair.states, [_out_label(y) for y in f.outputs])


def _out_label(y):
    if isinstance(y, tuple):
        return "-".join(_out_label(v) for v in y)
    return str(y)


# ------------------------------------------------------------ brackets


def constant_brackets(chain: GalleryChain, cfg: OptimizerConfig | None = None,
                      which=("rho", "alpha", "delta", "rho0", "lambda")) -> dict:
    """Brackets for the requested constants of a gallery chain.

    alpha uses the attached factorization's kernel; it is skipped when no
    factorization is available.
    """
    cfg = cfg or OptimizerConfig()
    pair = chain.float_pair
    out = {}
    if "lambda" in which:
        out["lambda"] = poincare(pair)
    if "eta_tv" in which:
        out["eta_tv"] = eta_tv(pair.pi, pair.P)
    if "eta_chi2" in which:
        from .spectral import eta_chi2
        out["eta_chi2"] = eta_chi2(pair.pi, pair.P)
    fz = chain.factorizable
    if "rho" in which:
        out["rho"] = eo.lsc_estimate(pair, cfg, fz)
    if "alpha" in which and chain.factorization is not None:
        out["alpha"] = eo.alpha(chain.factorization.pi, chain.factorization.K, cfg)
    if "delta" in which:
        out["delta"] = eo.delta(pair, cfg, factorizable=fz)
    if "rho0" in which:
        out["rho0"] = eo.mlsc_estimate(pair, cfg, fz)
    return out


ORDER = ("rho", "alpha", "delta", "rho0", "2lambda")


def ordering_violations(brackets: dict, tol: float = 0.0) -> list[tuple[str, str, float, float]]:
    """Adjacent pairs of rho <= alpha <= delta <= rho0 <= 2 lambda where the
    certified lower bound of the left constant exceeds the upper bound of
    the right one."""
    def lower(name):
        if name == "2lambda":
            return 2 * brackets["lambda"].value
        return brackets[name].lower.value

    def upper(name):
        if name == "2lambda":
            return 2 * brackets["lambda"].value
        return brackets[name].upper.value

    present = [c for c in ORDER if c in brackets or (c == "2lambda" and "lambda" in brackets)]
    bad = []
    for a, b in zip(present, present[1:]):
        if lower(a) > upper(b) + tol:
            bad.append((a, b, lower(a), upper(b)))
    return bad


# ------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepRow:
    family: str
    parameter: str
    value: float
    numerator: str
    num_lower: float
    num_upper: float
    denominator: str
    den_lower: float
    den_upper: float

    @property
    def certified_ratio(self) -> float:
        """Lower bound on numerator / denominator."""
        return self.num_lower / self.den_upper

    def as_list(self):
        return [self.family, self.parameter, repr(float(self.value)), self.numerator,
                repr(self.num_lower), repr(self.num_upper), self.denominator,
                repr(self.den_lower), repr(self.den_upper), repr(self.certified_ratio)]


SWEEP_HEADER = ["family", "parameter", "value", "numerator", "num_lower", "num_upper",
                "denominator", "den_lower", "den_upper", "certified_ratio"]

SWEEP_DEFAULTS = {
    "three_state": ("M", [1e2, 1e4, 1e6]),
    "three_state_rho0": ("M", [1e2, 1e4, 1e6]),
    "birth_death": ("M", [1e2, 1e4, 1e6]),
    "one_to_k": ("n", [4, 16, 64]),
    "bernoulli_laplace": ("n", [6, 8, 10]),
    "random_transposition": ("n", [3, 4, 5]),
}


def _sweep_point(family, value, fixed, cfg):
    if family in ("three_state", "three_state_rho0"):
        ch = make_chain("three_state", M=value)
        pair = ch.float_pair
        d1 = eo.delta(pair, cfg, factorizable=True)
        if family == "three_state":
            lo2 = 1 - eta_tv(pair.pi, power(pair.P, 2)).value
            d2 = eo.delta(pair, cfg, m=2, factorizable=True)
            return ("M", "delta(P^2)", lo2, d2.upper.value, "delta(P)", d1.lower.value, d1.upper.value)
        r0 = eo.mlsc_estimate(pair, cfg, True)
        return ("M", "rho0", r0.lower.value, r0.upper.value, "delta(P)", d1.lower.value, d1.upper.value)
    if family == "birth_death":
        m = int(fixed.get("m", 1))
        ch = make_chain("birth_death", m=m, M=value)
        pair = ch.float_pair
        dm = eo.delta(pair, cfg, m=m, factorizable=True)
        lo1 = 1 - eta_tv(pair.pi, power(pair.P, m + 1)).value
        d1 = eo.delta(pair, cfg, m=m + 1, factorizable=True)
        return ("M", f"delta(P^{m + 1})", lo1, d1.upper.value, f"delta(P^{m})",
                dm.lower.value, dm.upper.value)
    if family == "one_to_k":
        k = int(fixed.get("k", 2))
        ch = make_chain("one_to_k", n=int(value), k=k)
        pair = ch.float_pair
        d = eo.delta(pair, cfg, factorizable=True)
        a = eo.alpha(ch.channel[0], ch.channel[1], cfg)
        lo = max(d.lower.value, 1 - 1 / k)
        return ("n", "delta", lo, d.upper.value, "alpha", a.lower.value, a.upper.value)
    if family == "bernoulli_laplace":
        k = int(fixed.get("k", 2))
        ch = make_chain("bernoulli_laplace", n=int(value), k=k)
        pair = ch.float_pair
        d = eo.delta(pair, cfg, factorizable=True)
        a = eo.alpha(ch.channel[0], ch.channel[1], cfg)
        lo = max(d.lower.value, float(bernoulli_laplace_kappa(int(value), k)))
        return ("n", "delta", lo, d.upper.value, "alpha", a.lower.value, a.upper.value)
    if family == "random_transposition":
        ch = make_chain("random_transposition", n=int(value))
        pair = ch.float_pair
        r0 = eo.mlsc_estimate(pair, cfg, True)
        a = eo.alpha(ch.channel[0], ch.channel[1], cfg)
        return ("n", "rho0", r0.lower.value, r0.upper.value, "alpha", a.lower.value, a.upper.value)
    raise GuardError(f"no sweep defined for {family!r}")


def separation_sweep(family: str, grid=None, cfg: OptimizerConfig | None = None,
                     **fixed) -> list[SweepRow]:
    """Bracket two constants along a parameter grid.

    Grid points run one after another; within each point the optimizer may
    use ``cfg.threads`` workers, and its reductions do not depend on the
    worker count, so rows are reproducible for a fixed seed.
    """
    cfg = cfg or OptimizerConfig()
    if grid is None:
        if family not in SWEEP_DEFAULTS:
            raise GuardError(f"no sweep defined for {family!r}")
        grid = SWEEP_DEFAULTS[family][1]
    rows = []
    for v in grid:
        param, nname, nlo, nhi, dname, dlo, dhi = _sweep_point(family, v, fixed, cfg)
        rows.append(SweepRow(family, param, float(v), nname, float(nlo), float(nhi),
                             dname, float(dlo), float(dhi)))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()
