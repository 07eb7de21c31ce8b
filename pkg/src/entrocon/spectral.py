"""Spectral constants: the Poincare constant, chi-square contraction and
Dobrushin's coefficient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .chain_core import ReversiblePair, reverse_kernel, support, to_float, validate

CONSTANT_NAMES = ("rho", "rho0", "alpha", "delta", "lambda", "eta_tv", "eta_chi2", "eta_kl")
KINDS = ("closed_form", "eigen_exact", "optimizer_upper", "certified_lower", "oracle_grid")


class NotReversibleError(ValueError):
    pass


@dataclass(frozen=True)
class ConstantEstimate:
    """One number for one constant, labelled with how it was obtained.

    ``kind`` says what the value means for the true constant: an
    ``optimizer_upper`` bounds it from above, a ``certified_lower`` from
    below, the other kinds are exact up to ``tolerance``.
    """

    name: str
    value: float
    kind: str
    witness: np.ndarray | None = None
    tolerance: float = 0.0
    note: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in CONSTANT_NAMES:
            raise ValueError(f"unknown constant {self.name!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimate kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"name": self.name, "value": self.value, "kind": self.kind,
             "tolerance": self.tolerance, "note": self.note}
        if self.witness is not None:
            w = np.asarray(self.witness, dtype=float)
            d["witness_support"] = np.flatnonzero(w > 0).tolist()
            d["witness"] = w.tolist()
        return d


def _components(P: np.ndarray) -> list[list[int]]:
    ncomp, labels = connected_components(P > 0, directed=True, connection="strong")
    return [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]


def poincare(pair: ReversiblePair) -> ConstantEstimate:
    """Spectral gap 1 - (second largest eigenvalue of P) via the symmetrized kernel.

    Reducible chains yield 0 with the strongly connected components listed
    in ``info["components"]``.
    """
    diag = validate(pair)
    if not diag.reversible:
        raise NotReversibleError(f"detailed balance residual {diag.detailed_balance:.3g}")
    pi = to_float(pair.pi)
    P = to_float(pair.P)
    supp = support(pi)
    if len(supp) < 2:
        raise ValueError("the Poincare constant needs at least two charged states")
    Ps = P[np.ix_(supp, supp)]
    comps = _components(Ps)
    if len(comps) > 1:
        return ConstantEstimate("lambda", 0.0, "eigen_exact",
                                note="reducible chain",
                                info={"reducible": True,
                                      "components": [[int(supp[i]) for i in c] for c in comps]})
    r = np.sqrt(pi[supp])
    S = r[:, None] * Ps / r[None, :]
    S = 0.5 * (S + S.T)
    evals, evecs = np.linalg.eigh(S)
    lam = float(1.0 - evals[-2])
    f = np.zeros(len(pi))
    f[supp] = evecs[:, -2] / r
    return ConstantEstimate("lambda", lam, "eigen_exact", witness=f, tolerance=1e-12,
                            info={"reducible": False, "spectrum": evals[::-1].tolist()})


def eta_chi2(pi, K) -> ConstantEstimate:
    """chi-square contraction coefficient as 1 - lambda(pi, K K*)."""
    pi = to_float(pi)
    K = to_float(K)
    Q = K @ reverse_kernel(pi, K)
    gap = poincare(ReversiblePair(pi, Q))
    return ConstantEstimate("eta_chi2", float(min(1.0, max(0.0, 1.0 - gap.value))),
                            "eigen_exact", tolerance=1e-12,
                            note="1 - lambda(pi, K K*)", info=gap.info)


def eta_tv(pi, K) -> ConstantEstimate:
    """Dobrushin coefficient: largest TV distance between rows charged by pi."""
    K = to_float(K)
    rows = K[support(pi)]
    best, arg = 0.0, None
    for i in range(len(rows) - 1):
        d = 0.5 * np.abs(rows[i + 1:] - rows[i]).sum(axis=1)
        j = int(np.argmax(d))
        if d[j] > best:
            best, arg = float(d[j]), (i, i + 1 + j)
    info = {}
    if arg is not None:
        s = support(pi)
        info["pair"] = (int(s[arg[0]]), int(s[arg[1]]))
    return ConstantEstimate("eta_tv", min(best, 1.0), "closed_form", info=info)
