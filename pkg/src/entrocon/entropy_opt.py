"""Two-sided bounds on the entropy constants rho, rho0, eta_KL, alpha, delta.

Upper bounds on infima (rho, rho0, alpha, delta) come from evaluating the
defining ratio at explicit witnesses found by multi-start L-BFGS over the
simplex; lower bounds come from certified inequalities (Dobrushin, the
pi_min log-Sobolev bound and the comparison chain).  Optimizer outputs are
never labelled exact.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import xlogy
from scipy.stats import poisson

from .chain_core import ReversiblePair, power, semigroup, support, to_float
from .config import OptimizerConfig
from .functionals import (dirichlet_entropy, dirichlet_form, entropy_excess, entropy_functional,
                          kl)
from .spectral import ConstantEstimate, eta_chi2, eta_tv, poincare


# Ratios this close to the spectral limit are reported as the limit itself.  The
# limit is always a valid upper bound, and ratios at nearly constant f carry
# rounding noise of this relative size.
NEAR_LIMIT = 1e-7


class DegenerateChainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundBracket:
    """Certified interval ``[lower.value, upper.value]`` for one constant.

    ``estimate`` is the optimizer's best value and ``witness`` the point
    attaining it (None when the best value is a limit along nu -> pi).
    """

    name: str
    lower: ConstantEstimate
    upper: ConstantEstimate
    estimate: float
    witness: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower.value - tol <= value <= self.upper.value + tol

    @property
    def width(self) -> float:
        return self.upper.value - self.lower.value

    def to_dict(self) -> dict:
        d = {"name": self.name, "lower": self.lower.to_dict(), "upper": self.upper.to_dict(),
             "estimate": self.estimate}
        if self.witness is not None:
            w = np.asarray(self.witness, dtype=float)
            d["witness_support"] = np.flatnonzero(w > 0).tolist()
        return d


# ------------------------------------------------------------ multi-start


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _descend(objective, theta0, cfg: OptimizerConfig):
    b = cfg.theta_bound
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   bounds=[(-b, b)] * len(theta0),
                   options={"maxiter": cfg.max_iters, "gtol": cfg.gtol, "ftol": cfg.ftol})
    return float(res.fun), np.asarray(res.x)


def _dirichlet_starts(k: int, count: int, rng) -> list[np.ndarray]:
    return [rng.dirichlet(np.ones(k)) for _ in range(count)]


# ----------------------------------------------------------- eta_KL core


class KLRatio:
    """nu -> D(nu K || pi K) / D(nu || pi), restricted to supp(pi).

    Parameterized by ``nu = softmax(theta + log pi)`` so that positivity and
    normalization are implicit.
    """

    def __init__(self, pi, K):
        pi = to_float(pi)
        K = to_float(K)
        self.n = len(pi)
        self.supp = support(pi)
        self.pi = pi[self.supp]
        self.K = K[self.supp]
        self.q = pi @ K
        cols = self.q > 0
        self.cols = np.flatnonzero(cols)
        self.Kc = self.K[:, cols]
        self.qc = self.q[cols]
        self.logpi = np.log(self.pi)

    def full(self, nu_s: np.ndarray) -> np.ndarray:
        nu = np.zeros(self.n)
        nu[self.supp] = nu_s
        return nu

    def value(self, nu_s: np.ndarray) -> float:
        """Exact ratio with 0 log 0 = 0; NaN when D(nu || pi) = 0."""
        den = float(np.sum(xlogy(nu_s, nu_s / self.pi)))
        if den <= 1e-300:
            return math.nan
        out = nu_s @ self.Kc
        num = float(np.sum(xlogy(out, out / self.qc)))
        return max(num, 0.0) / den

    def point_masses(self) -> np.ndarray:
        """Ratio at every point mass of supp(pi), computed in closed form."""
        num = np.sum(xlogy(self.Kc, self.Kc / self.qc), axis=1)
        den = -self.logpi
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / den, np.nan)
        return r

    def nu_of(self, theta):
        z = theta + self.logpi
        z = z - z.max()
        w = np.exp(z)
        return w / w.sum()

    def theta_of(self, nu_s):
        with np.errstate(divide="ignore"):
            th = np.log(nu_s) - self.logpi
        th = np.where(np.isfinite(th), th, -np.inf)
        th = th - th[np.isfinite(th)].max()
        return th

    def neg_ratio(self, theta):
        nu = self.nu_of(theta)
        den = float(np.sum(xlogy(nu, nu / self.pi)))
        if den < 1e-14:
            return 0.0, np.zeros_like(theta)
        out = nu @ self.Kc
        lo = np.log(np.maximum(out, 1e-300) / self.qc)
        num = float(out @ lo)
        R = num / den
        g_nu = (self.Kc @ lo - R * np.log(np.maximum(nu, 1e-300) / self.pi)) / den
        g_theta = nu * (g_nu - nu @ g_nu)
        return -R, -g_theta


def _snap(nu_s, tol):
    nu = np.where(nu_s > tol * nu_s.max(), nu_s, 0.0)
    return nu / nu.sum()


def _kl_search(ratio: KLRatio, cfg: OptimizerConfig):
    """Best ratio over point masses and local ascents; returns (value, nu_s)."""
    k = len(ratio.supp)
    pm = ratio.point_masses()
    order = [int(i) for i in np.argsort(-np.nan_to_num(pm, nan=-1.0), kind="stable")]
    best_val, best_nu = -math.inf, None
    for i in order:
        if np.isfinite(pm[i]):
            best_val = float(pm[i])
            best_nu = np.eye(k)[i]
            break
    if k == 1:
        return best_val, best_nu
    rng = np.random.default_rng(cfg.seed)
    starts = []
    for i in order[: cfg.point_seeds]:
        nu0 = 0.999 * np.eye(k)[i] + 0.001 * ratio.pi
        starts.append(ratio.theta_of(nu0))
    starts += [ratio.theta_of(nu) for nu in _dirichlet_starts(k, cfg.starts, rng)]
    starts = [np.clip(s, -cfg.theta_bound, cfg.theta_bound) for s in starts]
    results = _map(lambda th: _descend(ratio.neg_ratio, th, cfg), starts, cfg.threads)
    for _, theta in results:
        nu = ratio.nu_of(theta)
        for cand in (nu, _snap(nu, cfg.snap)):
            v = ratio.value(cand)
            if not np.isfinite(v):
                continue
            better = v > best_val + 1e-13
            tie = abs(v - best_val) <= 1e-13 and best_nu is not None and \
                np.count_nonzero(cand) < np.count_nonzero(best_nu)
            if better or tie:
                best_val, best_nu = v, cand
    return best_val, best_nu


def eta_kl_estimate(pi, K, cfg: OptimizerConfig | None = None) -> BoundBracket:
    """Bracket eta_chi2 v (best ratio) <= eta_KL <= eta_TV.

    The lower end is attained (at ``witness``, or in the limit nu -> pi when
    eta_chi2 wins), so it is a certified lower bound on the supremum.
    """
    cfg = cfg or OptimizerConfig()
    ratio = KLRatio(pi, K)
    if len(ratio.supp) < 2:
        raise DegenerateChainError("every nu << pi equals pi; eta_KL is undefined")
    best, nu_s = _kl_search(ratio, cfg)
    chi2 = eta_chi2(pi, K).value
    tv_ = eta_tv(pi, K).value
    if nu_s is not None and best >= chi2 - 1e-12:  # ties keep the explicit witness
        value, witness, note = max(best, chi2), ratio.full(nu_s), "ratio at witness"
    else:
        value, witness, note = chi2, None, "local limit nu -> pi (eta_chi2)"
    lower = ConstantEstimate("eta_kl", value, "certified_lower", witness=witness, note=note)
    upper = ConstantEstimate("eta_kl", max(tv_, value), "closed_form", note="Dobrushin eta_TV")
    return BoundBracket("eta_kl", lower, upper, value, witness,
                        info={"eta_chi2": chi2, "eta_tv": tv_, "best_ratio": best})


# ----------------------------------------------------- certified lowers


def rho_lower(lam: float, pim: float) -> float:
    """(1 - 2 pi_min) lambda / log(1/pi_min - 1), continued by lambda/2 at pi_min = 1/2."""
    if pim > 0.5:
        raise ValueError("pi_min > 1/2")
    if abs(pim - 0.5) < 1e-12:
        return lam / 2
    return (1 - 2 * pim) * lam / math.log(1 / pim - 1)


def is_lazy(P) -> bool:
    return bool(np.all(np.diag(to_float(P)) >= 0.5 - 1e-15))


def bound_propagate(pair: ReversiblePair, factorizable: bool | None = None) -> dict:
    """Certified lower bounds on rho, alpha, delta, rho0 (and exact lambda).

    ``factorizable`` enables rho <= alpha <= delta; when None it is decided
    by laziness, which is sufficient for a factorization.
    """
    if factorizable is None:
        factorizable = is_lazy(pair.P)
    pi = to_float(pair.pi)
    P = to_float(pair.P)
    gap = poincare(pair)
    lam = gap.value
    out = {"lambda": gap}
    pim = float(pi[pi > 0].min())
    dob = eta_tv(pi, P).value
    delta_tv = 1.0 - dob
    if pim <= 0.5:
        r = rho_lower(lam, pim)
        out["rho"] = ConstantEstimate("rho", r, "certified_lower",
                                      note="(1-2pi_min) lambda / log(1/pi_min - 1)")
    else:
        r = 0.0
    if factorizable and "rho" in out:
        out["alpha"] = ConstantEstimate("alpha", r, "certified_lower", note="rho <= alpha")
        if r > delta_tv:
            out["delta"] = ConstantEstimate("delta", r, "certified_lower", note="rho <= alpha <= delta")
        else:
            out["delta"] = ConstantEstimate("delta", delta_tv, "certified_lower", note="1 - eta_TV(P)")
    else:
        out["delta"] = ConstantEstimate("delta", delta_tv, "certified_lower", note="1 - eta_TV(P)")
    d = out["delta"].value
    if 4 * r >= d:
        out["rho0"] = ConstantEstimate("rho0", 4 * r, "certified_lower", note="4 rho <= rho0")
    else:
        out["rho0"] = ConstantEstimate("rho0", d, "certified_lower", note="delta <= rho0")
    return out


# ------------------------------------------------------ alpha and delta


def alpha(pi, K, cfg: OptimizerConfig | None = None) -> BoundBracket:
    """Half-step entropy contraction 1 - eta_KL(pi, K)."""
    eta = eta_kl_estimate(pi, K, cfg)
    pi_f = to_float(pi)
    K_f = to_float(K)
    from .chain_core import reverse_kernel  # local: avoid widening the public namespace
    P = K_f @ reverse_kernel(pi_f, K_f)
    lows = [(1.0 - eta.info["eta_tv"], "1 - eta_TV(K)")]
    supp = support(pi_f)
    if len(supp) >= 2:
        sub = ReversiblePair(pi_f[supp], P[np.ix_(supp, supp)])
        bp = bound_propagate(sub, factorizable=True)
        if "alpha" in bp:
            lows.append((bp["alpha"].value, "rho(pi, K K*) lower bound"))
    lo_val, lo_note = max(lows)
    lower = ConstantEstimate("alpha", lo_val, "certified_lower", note=lo_note)
    upper = ConstantEstimate("alpha", 1.0 - eta.lower.value, "optimizer_upper",
                             witness=eta.witness, note=eta.lower.note)
    return BoundBracket("alpha", lower, upper, upper.value, eta.witness, info=eta.info)


def delta(pair: ReversiblePair, cfg: OptimizerConfig | None = None, m: int = 1,
          factorizable: bool | None = None) -> BoundBracket:
    """Full-step entropy contraction of ``P**m``."""
    Pm = power(to_float(pair.P), m)
    eta = eta_kl_estimate(pair.pi, Pm, cfg)
    lows = [(1.0 - eta.info["eta_tv"], f"1 - eta_TV(P^{m})")]
    bp = bound_propagate(pair, factorizable)
    if "alpha" in bp:  # factorizable: delta(P^m) >= delta(P) >= rho
        lows.append((bp["alpha"].value, "rho lower bound"))
    lo_val, lo_note = max(lows)
    lower = ConstantEstimate("delta", lo_val, "certified_lower", note=lo_note)
    upper = ConstantEstimate("delta", 1.0 - eta.lower.value, "optimizer_upper",
                             witness=eta.witness, note=eta.lower.note)
    return BoundBracket("delta", lower, upper, upper.value, eta.witness,
                        info={**eta.info, "power": m})


# ----------------------------------------------------- rho and rho0


class _FunctionalRatio:
    """Shared plumbing for E(.)/Ent(f) with f = exp(theta) on supp(pi)."""

    def __init__(self, pair: ReversiblePair):
        pi = to_float(pair.pi)
        P = to_float(pair.P)
        self.n = len(pi)
        self.supp = support(pi)
        self.pi = pi[self.supp]
        self.P = P[np.ix_(self.supp, self.supp)]
        self.L = self.P - np.eye(len(self.supp))
        self.pair = ReversiblePair(self.pi, self.P)

    def full(self, f_s):
        f = np.zeros(self.n)
        f[self.supp] = f_s
        return f

    def f_of(self, theta):
        f = np.exp(theta - theta.max())
        return f / (self.pi @ f)

    def ent(self, f):
        m = self.pi @ f
        return float(m * (self.pi @ entropy_excess(f / m - 1.0))), m


class LSIRatio(_FunctionalRatio):
    def value(self, f):
        ent, _ = self.ent(f)
        if ent <= 1e-300:
            return math.nan
        g = np.sqrt(f)
        return dirichlet_form(self.pair, g, g) / ent

    def objective(self, theta):
        f = self.f_of(theta)
        ent, m = self.ent(f)
        if ent < 1e-14:
            return math.inf, np.zeros_like(theta)
        g = np.sqrt(f)
        Lg = self.L @ g
        E = dirichlet_form(self.pair, g, g)
        R = E / ent
        dE = -self.pi * Lg * g
        dEnt = self.pi * f * np.log(f / m)
        return R, (dE - R * dEnt) / ent

    def residual(self, f, rho):
        f = f / (self.pi @ f)
        g = np.sqrt(f)
        lhs = -(self.L @ g)
        rhs = rho * g * np.log(f)
        return lhs - rhs, rhs


class MLSIRatio(_FunctionalRatio):
    def value(self, f):
        ent, _ = self.ent(f)
        if ent <= 1e-300:
            return math.nan
        return dirichlet_entropy(self.pair, f) / ent

    def objective(self, theta):
        f = self.f_of(theta)
        ent, m = self.ent(f)
        if ent < 1e-14:
            return math.inf, np.zeros_like(theta)
        th = np.log(f)
        Lth = self.L @ th
        Lf = self.L @ f
        E = dirichlet_entropy(self.pair, f)
        R = E / ent
        dE = -self.pi * (f * Lth + Lf)
        dEnt = self.pi * f * np.log(f / m)
        return R, (dE - R * dEnt) / ent

    def residual(self, f, rho0):
        f = f / (self.pi @ f)
        lf = np.log(f)
        lhs = -(self.L @ f) - f * (self.L @ lf)
        rhs = rho0 * f * lf
        return lhs - rhs, rhs


def _relative_residual(ratio, f, value) -> float:
    r, rhs = ratio.residual(f, value)
    scale = np.max(np.abs(rhs))
    return float(np.max(np.abs(r)) / scale) if scale > 0 else math.inf


def _polish(ratio, theta, cfg):
    """Newton-type refinement of the Euler-Lagrange system at a candidate."""
    k = len(theta)
    pin = int(np.argmax(theta))

    def full(z):
        th = np.empty(k)
        th[pin] = 0.0
        th[np.arange(k) != pin] = z
        return th

    def resid(z):
        f = ratio.f_of(full(z))
        val = ratio.value(f)
        if not np.isfinite(val):
            return np.full(k, 1e3)
        r, _ = ratio.residual(f, val)
        return r

    z0 = (theta - theta[pin])[np.arange(k) != pin]
    try:
        sol = least_squares(resid, z0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * k)
    except ValueError:
        return theta
    return full(sol.x)


def _functional_search(ratio, cfg: OptimizerConfig, limit: float):
    k = len(ratio.supp)
    rng = np.random.default_rng(cfg.seed)
    starts = [np.log(nu / ratio.pi) for nu in _dirichlet_starts(k, cfg.starts, rng)]
    # one-hot-ish seeds: mass concentrated near each state and away from it
    for i in range(min(k, cfg.point_seeds)):
        for w in (0.9, 0.05):
            nu = np.full(k, (1 - w) / (k - 1))
            nu[i] = w
            starts.append(np.log(nu / ratio.pi))
    starts = [np.clip(s - s.max(), -cfg.theta_bound, cfg.theta_bound) for s in starts]
    results = _map(lambda th: _descend(ratio.objective, th, cfg), starts, cfg.threads)
    best_val, best_theta = math.inf, None
    for val, th in results:
        f = ratio.f_of(th)
        v = ratio.value(f)
        if np.isfinite(v) and v < best_val:
            best_val, best_theta = v, th
    witness = None
    if best_theta is not None and best_val < limit:
        th = _polish(ratio, best_theta, cfg)
        f = ratio.f_of(th)
        v = ratio.value(f)
        if np.isfinite(v) and v <= best_val + 1e-10 and \
                _relative_residual(ratio, f, v) <= _relative_residual(ratio, ratio.f_of(best_theta), best_val):
            best_val, best_theta = min(v, best_val) if v <= best_val else v, th
        witness = ratio.full(ratio.f_of(best_theta))
        best_val = ratio.value(ratio.f_of(best_theta))
    return best_val, witness


def _check_irreducible(pair):
    gap = poincare(pair)
    if gap.info.get("reducible"):
        raise DegenerateChainError("chain is reducible")
    return gap


def lsc_estimate(pair: ReversiblePair, cfg: OptimizerConfig | None = None,
                 factorizable: bool | None = None) -> BoundBracket:
    """Log-Sobolev constant: min E(sqrt f, sqrt f) / Ent(f), capped by lambda/2."""
    cfg = cfg or OptimizerConfig()
    ratio = LSIRatio(pair)
    if len(ratio.supp) < 2:
        raise DegenerateChainError("need two charged states")
    gap = _check_irreducible(ratio.pair)
    limit = gap.value / 2
    best, witness = _functional_search(ratio, cfg, limit)
    if witness is not None and best < limit * (1 - NEAR_LIMIT):
        upper = ConstantEstimate("rho", best, "optimizer_upper", witness=witness,
                                 note="ratio at witness")
    else:
        upper = ConstantEstimate("rho", limit, "optimizer_upper", note="lambda/2 (f -> 1 limit)")
        witness = None
    lower = bound_propagate(pair, factorizable).get(
        "rho", ConstantEstimate("rho", 0.0, "certified_lower", note="trivial"))
    return BoundBracket("rho", lower, upper, upper.value, witness,
                        info={"lambda": gap.value, "best_ratio": best})


def mlsc_estimate(pair: ReversiblePair, cfg: OptimizerConfig | None = None,
                  factorizable: bool | None = None) -> BoundBracket:
    """Modified log-Sobolev constant: min E(f, log f) / Ent(f), capped by 2 lambda."""
    cfg = cfg or OptimizerConfig()
    ratio = MLSIRatio(pair)
    if len(ratio.supp) < 2:
        raise DegenerateChainError("need two charged states")
    gap = _check_irreducible(ratio.pair)
    limit = 2 * gap.value
    best, witness = _functional_search(ratio, cfg, limit)
    if witness is not None and best < limit * (1 - NEAR_LIMIT):
        upper = ConstantEstimate("rho0", best, "optimizer_upper", witness=witness,
                                 note="ratio at witness")
        residual = _relative_residual(ratio, witness[ratio.supp], best)
    else:
        upper = ConstantEstimate("rho0", limit, "optimizer_upper", note="2 lambda (f -> 1 limit)")
        witness, residual = None, None
    lower = bound_propagate(pair, factorizable)["rho0"]
    return BoundBracket("rho0", lower, upper, upper.value, witness,
                        info={"lambda": gap.value, "best_ratio": best, "residual": residual})


def mlsi_ratio(pair: ReversiblePair, f) -> float:
    """E(f, log f) / Ent(f) at a given positive f."""
    return dirichlet_entropy(pair, f) / entropy_functional(pair.pi, f)


def lsi_ratio(pair: ReversiblePair, f) -> float:
    g = np.sqrt(np.asarray(f, dtype=float))
    return dirichlet_form(pair, g, g) / entropy_functional(pair.pi, f)


def kl_ratio(pi, K, nu) -> float:
    pi = to_float(pi)
    K = to_float(K)
    return kl(np.asarray(nu) @ K, pi @ K) / kl(nu, pi)


# ------------------------------------------------------ extremizer checks


@dataclass(frozen=True)
class ResidualReport:
    name: str
    branch: str
    ok: bool
    max_relative_residual: float | None = None
    detail: str = ""


def extremal_residuals(pair: ReversiblePair, estimate: ConstantEstimate, tol: float = 1e-4,
                       limit_tol: float = 1e-6, K=None) -> ResidualReport:
    """Check the Euler-Lagrange equation at a witness, or the dichotomy branch.

    rho0: -Lf - f L(log f) = rho0 f log f, else rho0 = 2 lambda.
    rho:  -L sqrt f = rho sqrt f log f, else rho = lambda / 2.
    eta_kl (kernel ``K``, default ``pair.P``): ratio at witness equals the
    estimate, else the estimate equals eta_chi2.
    """
    name = estimate.name
    if name in ("rho0", "rho"):
        lam = poincare(pair).value
        limit = 2 * lam if name == "rho0" else lam / 2
        if estimate.witness is None:
            if abs(estimate.value - limit) <= limit_tol:
                return ResidualReport(name, "limit", True, None, f"value equals {limit:.12g}")
            raise ValueError("estimate carries no witness and is not the spectral limit")
        ratio = (MLSIRatio if name == "rho0" else LSIRatio)(pair)
        f = np.asarray(estimate.witness, dtype=float)[ratio.supp]
        res = _relative_residual(ratio, f, estimate.value)
        if res <= tol:
            return ResidualReport(name, "witness", True, res)
        if abs(estimate.value - limit) <= limit_tol:
            return ResidualReport(name, "limit", True, res, "residual large but value is the limit")
        return ResidualReport(name, "witness", False, res)
    if name in ("eta_kl", "alpha", "delta"):
        K = pair.P if K is None else K
        eta_val = estimate.value if name == "eta_kl" else 1.0 - estimate.value
        chi2 = eta_chi2(pair.pi, K).value
        if estimate.witness is not None:
            r = kl_ratio(pair.pi, K, estimate.witness)
            ok = abs(r - eta_val) <= tol
            return ResidualReport(name, "witness", ok, abs(r - eta_val),
                                  f"support size {np.count_nonzero(estimate.witness)}")
        ok = abs(eta_val - chi2) <= limit_tol
        return ResidualReport(name, "chi2", ok, abs(eta_val - chi2))
    raise ValueError(f"no extremal equation for {name!r}")


def full_support_condition(pair: ReversiblePair, bracket: BoundBracket | None = None,
                           cfg: OptimizerConfig | None = None) -> str:
    """Which sufficient condition for full-support eta_KL extremizers holds."""
    P = to_float(pair.P)
    if poincare(pair).info.get("reducible"):
        return "inconclusive"
    if np.all(P > 0):
        return "strictly_positive"
    if is_lazy(P):
        if bracket is None:
            bracket = eta_kl_estimate(pair.pi, P, cfg)
        if bracket.lower.value > 0.5:
            return "lazy_and_large_eta"
    return "inconclusive"


def poisson_mixture_bound(pair: ReversiblePair, t: float, m: int,
                          delta_lower: float | None = None) -> ConstantEstimate:
    """delta(pi, T_t) >= P[Pois(t) >= m+1] * delta(pi, P^{m+1})."""
    if delta_lower is None:
        delta_lower = 1.0 - eta_tv(pair.pi, power(to_float(pair.P), m + 1)).value
    tail = float(poisson.sf(m, t)) if t > 0 else 0.0
    return ConstantEstimate("delta", tail * delta_lower, "certified_lower",
                            note=f"P[Pois({t:g}) >= {m + 1}] * delta(P^{m + 1}) lower",
                            info={"tail": tail, "delta_lower": delta_lower, "t": t, "m": m})


def semigroup_delta(pair: ReversiblePair, t: float, cfg: OptimizerConfig | None = None) -> BoundBracket:
    """delta(pi, T_t) bracket for the continuous-time kernel."""
    T = semigroup(pair.P, t)
    eta = eta_kl_estimate(pair.pi, T, cfg)
    pmb = poisson_mixture_bound(pair, t, 1)
    lo = max(1.0 - eta.info["eta_tv"], pmb.value)
    lower = ConstantEstimate("delta", lo, "certified_lower")
    upper = ConstantEstimate("delta", 1.0 - eta.lower.value, "optimizer_upper", witness=eta.witness)
    return BoundBracket("delta", lower, upper, upper.value, eta.witness, info=eta.info)


# ------------------------------------------------------ grid oracle


def simplex_grid(k: int, steps: int) -> np.ndarray:
    """All points of the simplex in R^k with coordinates in (1/steps) Z."""
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        a = np.arange(steps + 1) / steps
        return np.stack([a, 1 - a], axis=1)
    if k == 3:
        i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
        keep = i + j <= steps
        i, j = i[keep], j[keep]
        return np.stack([i, j, steps - i - j], axis=1) / steps
    pts = [c for c in itertools.product(range(steps + 1), repeat=k - 1) if sum(c) <= steps]
    arr = np.array([list(c) + [steps - sum(c)] for c in pts], dtype=float)
    return arr / steps


def _zoom_grid(center, halfwidth, steps):
    k = len(center)
    offs = np.linspace(-halfwidth, halfwidth, steps + 1)
    grids = np.meshgrid(*([offs] * (k - 1)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    full = np.empty((len(pts), k))
    full[:, :-1] = center[:-1] + pts
    full[:, -1] = 1.0 - full[:, :-1].sum(axis=1)
    keep = np.all(full >= -1e-15, axis=1)
    return np.clip(full[keep], 0.0, 1.0)


def _oracle(values_fn, k, resolution, maximize, rounds=5):
    steps = int(round(1.0 / resolution))
    pts = simplex_grid(k, steps)
    vals = values_fn(pts)
    sign = 1.0 if maximize else -1.0
    score = np.where(np.isfinite(vals), sign * vals, -np.inf)
    idx = int(np.argmax(score))
    best, arg = vals[idx], pts[idx]
    hw = resolution
    for _ in range(rounds):
        cand = _zoom_grid(arg, hw, 20)
        v = values_fn(cand)
        s = np.where(np.isfinite(v), sign * v, -np.inf)
        j = int(np.argmax(s))
        if s[j] > sign * best:
            best, arg = v[j], cand[j]
        hw /= 10
    return float(best), arg


def eta_kl_grid_oracle(pi, K, resolution: float = 1e-3) -> tuple[float, np.ndarray]:
    """Brute-force supremum of the KL ratio on a simplex lattice (|X| <= 3)
    followed by nested zoom grids around the best lattice point."""
    pi = to_float(pi)
    K = to_float(K)
    k = len(pi)
    if k > 3:
        raise ValueError("grid oracle is for at most three states")
    q = pi @ K

    def values(nus):
        out = nus @ K
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.sum(xlogy(out, out / np.where(q > 0, q, 1.0)), axis=1)
            den = np.sum(xlogy(nus, nus / pi), axis=1)
            r = num / den
        return np.where(den > 1e-12, r, np.nan)

    return _oracle(values, k, resolution, maximize=True)


def mlsi_grid_oracle(pair: ReversiblePair, resolution: float = 1e-3) -> tuple[float, np.ndarray]:
    """Brute-force infimum of E(f, log f)/Ent(f) over nu = pi f on a lattice (|X| <= 3)."""
    pi = to_float(pair.pi)
    W = pi[:, None] * to_float(pair.P)
    k = len(pi)
    if k > 3:
        raise ValueError("grid oracle is for at most three states")

    def values(nus):
        f = nus / pi
        with np.errstate(divide="ignore", invalid="ignore"):
            lf = np.log(f)
            E = np.zeros(len(nus))
            for x in range(k):
                for y in range(k):
                    if x != y and W[x, y] > 0:
                        E += 0.5 * W[x, y] * (f[:, x] - f[:, y]) * (lf[:, x] - lf[:, y])
            ent = np.sum(xlogy(nus, f), axis=1)
            r = E / ent
        bad = (ent < 1e-9) | np.any(nus <= 0, axis=1)
        return np.where(bad, np.nan, r)

    return _oracle(values, k, resolution, maximize=False)
