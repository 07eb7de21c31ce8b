"""Finite distributions, Markov kernels, reverse channels and the semigroup.

Distributions and kernels are plain numpy arrays.  Float arrays are the
default; object arrays holding :class:`fractions.Fraction` entries are
accepted everywhere a product or a reverse channel is formed, which keeps
factorization identities such as ``K K* = P`` exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import TOL


class DimensionError(ValueError):
    pass


class SupportError(ValueError):
    """Raised when absolute continuity fails."""


def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def to_float(a) -> np.ndarray:
    return np.asarray(a, dtype=float) if not is_exact(a) else a.astype(float)


def exact_array(a) -> np.ndarray:
    """Convert numbers (ints, Fractions, decimal strings) to a Fraction array."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = Fraction(v) if not isinstance(v, float) else Fraction(repr(v))
    return out


def as_distribution(pi, tol: float = TOL.sum_to_one) -> np.ndarray:
    arr = pi if is_exact(pi) else np.asarray(pi, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError("a distribution is a non-empty vector")
    if np.any(to_float(arr) < -TOL.nonneg):
        raise ValueError("negative probability")
    total = arr.sum()
    if abs(float(total - 1)) > tol:
        raise ValueError(f"weights sum to {float(total)!r}, not 1")
    return arr


def as_kernel(K, tol: float = TOL.sum_to_one) -> np.ndarray:
    arr = K if is_exact(K) else np.asarray(K, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError("a kernel is a non-empty matrix")
    if np.any(to_float(arr) < -TOL.nonneg):
        raise ValueError("negative transition probability")
    rows = to_float(arr.sum(axis=1))
    if np.max(np.abs(rows - 1.0)) > tol:
        raise ValueError("kernel rows do not sum to 1")
    return arr


def support(pi) -> np.ndarray:
    """Indices with strictly positive mass."""
    return np.flatnonzero(to_float(pi) > 0)


def pi_min(pi) -> float:
    p = to_float(pi)
    return float(p[p > 0].min())


def p_min(P) -> float:
    p = to_float(P)
    return float(p[p > 0].min())


def point_mass(n: int, x: int) -> np.ndarray:
    e = np.zeros(n)
    e[x] = 1.0
    return e


def uniform(n: int, exact: bool = False) -> np.ndarray:
    if exact:
        return np.array([Fraction(1, n)] * n, dtype=object)
    return np.full(n, 1.0 / n)


def reverse_kernel(pi, K) -> np.ndarray:
    """Reverse channel of ``K`` with respect to input law ``pi``.

    Rows of output states with zero mass under ``pi K`` are set to ``pi``.
    """
    if len(pi) != K.shape[0]:
        raise DimensionError(f"pi has {len(pi)} states, K has {K.shape[0]} rows")
    exact = is_exact(pi) or is_exact(K)
    if exact:
        pi = exact_array(pi) if not is_exact(pi) else pi
        K = exact_array(K) if not is_exact(K) else K
    out_mass = pi @ K
    joint = pi[:, None] * K  # joint[x, y] = pi(x) K(x, y)
    Kstar = np.empty((K.shape[1], K.shape[0]), dtype=object if exact else float)
    for y in range(K.shape[1]):
        if out_mass[y] > 0:
            Kstar[y] = joint[:, y] / out_mass[y]
        else:
            Kstar[y] = pi
    return Kstar


def compose(K, L) -> np.ndarray:
    if K.shape[1] != L.shape[0]:
        raise DimensionError(f"cannot compose {K.shape} with {L.shape}")
    if is_exact(K) != is_exact(L):
        K = exact_array(K) if not is_exact(K) else K
        L = exact_array(L) if not is_exact(L) else L
    return K @ L


def identity(n: int, exact: bool = False) -> np.ndarray:
    if exact:
        eye = np.full((n, n), Fraction(0), dtype=object)
        for i in range(n):
            eye[i, i] = Fraction(1)
        return eye
    return np.eye(n)


def power(P, m: int) -> np.ndarray:
    """``P`` to the ``m``-th power by repeated squaring."""
    if P.shape[0] != P.shape[1]:
        raise DimensionError("power needs a square kernel")
    if m < 0:
        raise ValueError("power must be nonnegative")
    result = identity(P.shape[0], exact=is_exact(P))
    base = P
    while m:
        if m & 1:
            result = result @ base
        m >>= 1
        if m:
            base = base @ base
    return result


def semigroup(P, t: float) -> np.ndarray:
    """Continuous-time kernel ``exp(t (P - I))``.

    Uniformization: ``exp(tau (P - I)) = sum_k Pois(tau)(k) P^k`` with
    nonnegative terms, evaluated at ``tau = t / 2**s <= 1`` and squared ``s``
    times.  The series is cut once the Poisson tail is below
    ``TOL.semigroup_truncation / 2**s``, so the total truncation error in the
    row-sum norm stays under ``TOL.semigroup_truncation`` (1e-13 < 1e-12).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    P = to_float(P)
    n = P.shape[0]
    if P.shape != (n, n):
        raise DimensionError("semigroup needs a square kernel")
    if t == 0:
        return np.eye(n)
    s = max(0, math.ceil(math.log2(t))) if t > 1 else 0
    tau = t / 2**s
    budget = TOL.semigroup_truncation / 2**s
    weight = math.exp(-tau)
    term = np.eye(n)
    T = weight * term
    mass = weight
    k = 0
    while 1.0 - mass > budget and k < 200:
        k += 1
        weight *= tau / k
        term = term @ P
        T += weight * term
        mass += weight
    for _ in range(s):
        T = T @ T
    return T


@dataclass(frozen=True)
class ReversiblePair:
    """A stationary law together with a kernel on the same state space."""

    pi: np.ndarray
    P: np.ndarray
    states: tuple = field(default=None)

    def __post_init__(self):
        if self.P.shape != (len(self.pi), len(self.pi)):
            raise DimensionError("P must be square and match pi")
        if self.states is None:
            object.__setattr__(self, "states", tuple(range(len(self.pi))))

    @property
    def n(self) -> int:
        return len(self.pi)

    @property
    def exact(self) -> bool:
        return is_exact(self.pi) or is_exact(self.P)

    def as_float(self) -> "ReversiblePair":
        return ReversiblePair(to_float(self.pi), to_float(self.P), self.states)

    def generator(self) -> np.ndarray:
        return to_float(self.P) - np.eye(self.n)


@dataclass(frozen=True)
class Diagnostics:
    pi_sum: float
    pi_negative: float
    row_sum: float
    P_negative: float
    stationarity: float
    detailed_balance: float

    @property
    def is_distribution(self) -> bool:
        return self.pi_sum <= TOL.sum_to_one and self.pi_negative == 0

    @property
    def is_kernel(self) -> bool:
        return self.row_sum <= TOL.sum_to_one and self.P_negative == 0

    @property
    def stationary(self) -> bool:
        return self.stationarity <= TOL.stationarity

    @property
    def reversible(self) -> bool:
        return self.detailed_balance <= TOL.detailed_balance

    @property
    def ok(self) -> bool:
        return self.is_distribution and self.is_kernel and self.stationary and self.reversible


def validate(pair: ReversiblePair) -> Diagnostics:
    """Residuals of every pair invariant; never raises."""
    pi, P = pair.pi, pair.P

    def fmax(a):
        a = np.abs(a)
        return float(a.max()) if a.size else 0.0

    flow = pi[:, None] * P
    return Diagnostics(
        pi_sum=float(abs(pi.sum() - 1)),
        pi_negative=float(max(0, -to_float(pi).min())),
        row_sum=fmax(P.sum(axis=1) - 1),
        P_negative=float(max(0, -to_float(P).min())),
        stationarity=fmax(pi @ P - pi),
        detailed_balance=fmax(flow - flow.T),
    )


def density(nu, pi) -> np.ndarray:
    """Relative density of ``nu`` with respect to ``pi`` (zero off the support)."""
    nu = np.asarray(nu, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if nu.shape != pi.shape:
        raise DimensionError("nu and pi live on different spaces")
    off = (pi <= 0) & (nu > 0)
    if np.any(off):
        raise SupportError(f"nu charges states {np.flatnonzero(off).tolist()} outside supp(pi)")
    f = np.zeros_like(nu)
    on = pi > 0
    f[on] = nu[on] / pi[on]
    return f


# ---------------------------------------------------------------- JSON files

def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    return float(v)


def chain_to_dict(pi, K, states=None, output_states=None) -> dict:
    states = list(states) if states is not None else list(range(len(pi)))
    doc = {
        "states": [_label(s) for s in states],
        "pi": [_num(v) for v in pi],
        "P": [[_num(v) for v in row] for row in K],
    }
    if output_states is not None:
        doc["output_states"] = [_label(s) for s in output_states]
    return doc


def _label(s):
    if isinstance(s, (str, int)) and not isinstance(s, bool):
        return s
    if isinstance(s, np.integer):
        return int(s)
    return str(s)


def dumps_chain(pi, K, states=None, output_states=None) -> str:
    return json.dumps(chain_to_dict(pi, K, states, output_states), indent=1) + "\n"


def chain_from_dict(doc: dict):
    """Return ``(pi, K, states, output_states)``; ``output_states`` is None for square chains."""
    try:
        pi = np.asarray(doc["pi"], dtype=float)
        K = np.asarray(doc["P"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"chain file lacks {exc.args[0]!r}") from None
    states = doc.get("states", list(range(len(pi))))
    output_states = doc.get("output_states")
    if len(states) != len(pi) or K.ndim != 2 or K.shape[0] != len(pi):
        raise DimensionError("states, pi and P disagree in size")
    if output_states is not None and len(output_states) != K.shape[1]:
        raise DimensionError("output_states and P disagree in size")
    if output_states is None and K.shape[0] != K.shape[1]:
        raise DimensionError("a non-square kernel needs output_states")
    as_distribution(pi)
    as_kernel(K)
    return pi, K, states, output_states


def load_chain(path) -> ReversiblePair:
    pi, K, states, output_states = chain_from_dict(json.loads(Path(path).read_text()))
    if output_states is not None:
        raise DimensionError("expected a chain on one state space")
    return ReversiblePair(pi, K, tuple(states))
