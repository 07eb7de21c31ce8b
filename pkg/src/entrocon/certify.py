"""Grid certificates for two-variable inequalities and the complete-bipartite pipeline.

A lattice certificate for ``G < 0`` on a region ``A`` checks three things:
``G < -margin`` on every lattice point, every point of ``A`` lies within
``spacing`` (sup-norm) of a lattice point, and ``G`` varies by less than
``margin`` over any sup-norm step of ``spacing`` inside ``A``.  Floats are
used throughout with a fixed safety slack instead of interval arithmetic.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import default_threads
from .functionals import f_n, g_n

SLACK = 1e-9
MODULUS_INFLATION = 1.01
DEFAULT_BUDGET = 5_000_000_000


class ResourceCapExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------- G_n


def _cn(n: int) -> float:
    return math.log(2 * n) / math.log(n)


def g_bipartite(t, x, n: int = 3):
    """(log 2n / log n) f_n(t x + (1-t)/n) - f_2(t) - t f_n(x)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any((t <= 0) | (t > 1)) or np.any((x < 1 / n - 1e-15) | (x > 1)):
        raise ValueError("need t in (0, 1] and x in [1/n, 1]")
    u = t * x + (1 - t) / n
    return _cn(n) * f_n(u, n) - f_n(t, 2) - t * f_n(x, n)


def g3(t, x):
    return g_bipartite(t, x, 3)


def modulus_bound(spacing: float, n: int = 3) -> float:
    """Largest change of G_n over one sup-norm step of ``spacing`` on t >= 1/2.

    Both ``f_n(t x + (1-t)/n)`` and ``f_2(t) + t f_n(x)`` are nondecreasing
    in t and x there, so a step in one coordinate moves G by at most the
    larger of the two moves.  By convexity the largest move of ``f_n`` over a
    step sits at the right end of the interval.  The result is inflated by 1%.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    h = min(spacing, 0.5)
    dn = float(f_n(1.0, n) - f_n(1.0 - h, n))
    d2 = float(f_n(1.0, 2) - f_n(1.0 - h, 2))
    c = _cn(n)
    x_step = max(c * dn, dn)
    t_step = max(c * dn, d2 + h * math.log(n))
    return (x_step + t_step) * MODULUS_INFLATION


# ------------------------------------------------------------ lattice


@dataclass(frozen=True)
class Box:
    t_lo: float
    t_hi: float
    x_lo: float
    x_hi: float


@dataclass(frozen=True)
class GridRequest:
    """Region ``box`` minus closed ``excluded`` boxes, lattice anchored at the lower corner."""

    box: Box
    spacing: float
    margin: float
    modulus: float
    excluded: tuple = ()
    budget: int = DEFAULT_BUDGET

    def axis(self, lo, hi) -> np.ndarray:
        h = self.spacing
        count = int(math.floor((hi - lo) / h + 1e-9)) + 1
        pts = lo + h * np.arange(count)
        if pts[-1] < hi - 1e-12:
            pts = np.append(pts, hi)
        else:
            pts[-1] = hi
        return pts

    def axes(self):
        b = self.box
        return self.axis(b.t_lo, b.t_hi), self.axis(b.x_lo, b.x_hi)


@dataclass(frozen=True)
class GridCertificate:
    box: dict
    excluded: list
    spacing: float
    margin: float
    modulus: float
    points: int
    max_value: float
    worst_point: tuple
    passed: bool
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["worst_point"] = list(self.worst_point)
        return json.dumps(d, indent=1, sort_keys=True) + "\n"


def _excluded_mask(t, xs, excluded):
    mask = np.zeros(len(xs), dtype=bool)
    for e in excluded:
        if e.t_lo <= t <= e.t_hi:
            mask |= (xs >= e.x_lo) & (xs <= e.x_hi)
    return mask


def _rows_generic(fn, ts, xs, excluded, threads, chunk):
    def work(block):
        out = []
        for t in block:
            v = np.asarray(fn(t, xs), dtype=float)
            v = np.where(_excluded_mask(t, xs, excluded), -np.inf, v)
            j = int(np.argmax(v))
            out.append((float(v[j]), j))
        return out

    blocks = [ts[i:i + chunk] for i in range(0, len(ts), chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    flat = [r for p in parts for r in p]
    return np.array([r[0] for r in flat]), np.array([r[1] for r in flat], dtype=np.int64)


def grid_certify(fn, request: GridRequest, threads: int | None = None,
                 chunk: int = 256) -> GridCertificate:
    """Evaluate ``fn(t, xs)`` row by row on the lattice and decide the certificate.

    ``fn`` takes a scalar t and an array of x values.  Rows are reduced
    independently and the first maximum in row-major order is reported, so
    the outcome does not depend on ``chunk`` or ``threads``.
    """
    threads = threads or default_threads()
    ts, xs = request.axes()
    npts = len(ts) * len(xs)
    if npts > request.budget:
        raise ResourceCapExceeded(f"{npts} lattice points exceed the budget {request.budget}")
    start = time.perf_counter()
    kernel = getattr(fn, "row_kernel", None)
    if kernel is not None:
        best, arg = kernel(ts, xs, request.excluded, threads)
    else:
        best, arg = _rows_generic(fn, ts, xs, request.excluded, threads, chunk)
    i = int(np.argmax(best))
    vmax = float(best[i])
    worst = (float(ts[i]), float(xs[arg[i]]) if arg[i] >= 0 else math.nan)
    passed = vmax < -(request.margin + SLACK) and request.modulus < request.margin
    excluded_pts = sum(int(_excluded_mask(t, xs, request.excluded).sum()) for t in ts
                       if any(e.t_lo <= t <= e.t_hi for e in request.excluded))
    return GridCertificate(asdict(request.box), [asdict(e) for e in request.excluded],
                           request.spacing, request.margin, request.modulus, npts - excluded_pts,
                           vmax, worst, bool(passed), time.perf_counter() - start)


# ------------------------------------------------------- numba fast path


_NUMBA_KERNEL = None


def _numba_kernel():
    global _NUMBA_KERNEL
    if _NUMBA_KERNEL is not None:
        return _NUMBA_KERNEL
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from numba import njit, prange

    @njit(cache=True)
    def fq(u, logq, qm1):
        r = logq
        if u > 0:
            r += u * math.log(u)
        if u < 1:
            r += (1 - u) * math.log((1 - u) / qm1)
        return r

    @njit(parallel=True, cache=True)
    def rows(ts, xs, n, ex):
        logn = math.log(n)
        c = math.log(2.0 * n) / logn
        log2 = math.log(2.0)
        nt, nx = ts.shape[0], xs.shape[0]
        fx = np.empty(nx)
        for j in range(nx):
            fx[j] = fq(xs[j], logn, n - 1.0)
        best = np.empty(nt)
        arg = np.empty(nt, np.int64)
        for i in prange(nt):
            t = ts[i]
            base = fq(t, log2, 1.0)
            b = -np.inf
            a = -1
            for j in range(nx):
                x = xs[j]
                skip = False
                for k in range(ex.shape[0]):
                    if ex[k, 0] <= t <= ex[k, 1] and ex[k, 2] <= x <= ex[k, 3]:
                        skip = True
                if skip:
                    continue
                g = c * fq(t * x + (1 - t) / n, logn, n - 1.0) - base - t * fx[j]
                if g > b:
                    b = g
                    a = j
            best[i] = b
            arg[i] = a
        return best, arg

    _NUMBA_KERNEL = rows
    return rows


class BipartiteG:
    """G_n as a lattice function, with a compiled row kernel when numba is usable."""

    def __init__(self, n: int = 3, use_numba: bool = True):
        self.n = n
        self.use_numba = use_numba

    def __call__(self, t, xs):
        return g_bipartite(t, xs, self.n)

    def row_kernel(self, ts, xs, excluded, threads):
        ex = np.array([[e.t_lo, e.t_hi, e.x_lo, e.x_hi] for e in excluded] or
                      np.zeros((0, 4)), dtype=float).reshape(-1, 4)
        if self.use_numba:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    import numba
                    kern = _numba_kernel()
                    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
                    return kern(np.ascontiguousarray(ts), np.ascontiguousarray(xs), float(self.n), ex)
            except ImportError:
                pass
        return _rows_generic(self, ts, xs, excluded, threads, 256)


# ------------------------------------------------ complete bipartite pipeline


def t_star_threshold(n: int = 3) -> float:
    """exp(log n * log(log n / log 2n)): below it the one-sided ratio stays under log n / log 2n."""
    return math.exp(math.log(n) * math.log(math.log(n) / math.log(2 * n)))


def bipartite_ratio(t, x, y, n: int = 3):
    """F_n(t, x, y): the KL ratio of the bipartite walk on the symmetric family of laws."""
    num = f_n(t * x + (1 - t) / n, n) + f_n((1 - t) * y + t / n, n)
    den = f_n(t, 2) + t * f_n(x, n) + (1 - t) * f_n(y, n)
    return 0.5 * num / den


def _corner_check(n: int, spacing: float, side: float):
    """G_n < 0 on [1-side, 1]^2 without (1,1), evaluated in the cancellation-free form
    G(1-a, 1-b) = g_n(a) + (1-a) g_{n-1}(b) - c g_{n-1}(2a/3 + b - ab) (here for n = 3)."""
    c = _cn(n)
    a = spacing * np.arange(int(round(side / spacing)) + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    cc = (n - 1) / n * A + B - A * B
    G = g_n(A, n) + (1 - A) * g_n(B, n - 1) - c * g_n(cc, n - 1)
    G[0, 0] = -np.inf
    i, j = np.unravel_index(int(np.argmax(G)), G.shape)
    # the chain of elementary bounds used for the analytic argument
    u = a[1:]
    h = lambda v: v * (0.999 + np.log(2 / v))  # noqa: E731
    # G <= g_3(a) + g_2(b) - c h(c'), so each piece is compared against c h / 2
    bound_a = bool(np.all(u * np.log(3 * math.e / u) < 0.5 * c * h(4 * u / 3)))
    bound_b = bool(np.all(u * np.log(2 * math.e / u) <= 0.5 * c * h(1.998 * u)))
    w = u
    sandwich = bool(np.all((0.999 * w <= -(1 - w) * np.log1p(-w)) & (-(1 - w) * np.log1p(-w) <= w)))
    return {"max_value": float(G[i, j]), "worst_point": [1 - float(a[i]), 1 - float(a[j])],
            "negative": bool(G[i, j] < 0), "elementary_bounds": bound_a and bound_b and sandwich,
            "points": int(G.size) - 1}


def _reduction_check(n: int, t_star: float, steps: int = 60):
    """On a coarse grid with t > t*, F(t,x,y) >= target implies F(t,x,y) <= F(t,x,1/n)."""
    target = math.log(n) / (2 * math.log(2 * n))
    ts = np.linspace(t_star, 1, steps + 1)[1:-1]
    xs = np.linspace(1 / n, 1, steps + 1)
    T, X, Y = np.meshgrid(ts, xs, xs, indexing="ij")
    F = bipartite_ratio(T, X, Y, n)
    F0 = bipartite_ratio(T, X, np.full_like(Y, 1 / n), n)
    bad = (F >= target) & (F > F0 + 1e-12)
    # one-sided ratio bound f(tx + (1-t)/n) / (t f(x)) <= t^(1/log n)
    tt = np.linspace(0.01, 1, steps + 1)[:, None]
    xx = np.linspace(1 / n, 1, steps + 1)[None, 1:]
    one_sided = f_n(tt * xx + (1 - tt) / n, n) / (tt * f_n(xx, n))
    ok_lemma = bool(np.all(one_sided <= tt ** (1 / math.log(n)) + 1e-12))
    return {"violations": int(bad.sum()), "max_F": float(F.max()), "one_sided_bound": ok_lemma,
            "points": int(F.size)}


def bipartite_certificate(n: int = 3, spacing: float = 1e-5, margin: float = 0.00078,
                          t_star: float = 0.58, corner: float = 0.999,
                          corner_spacing: float = 1e-6, threads: int | None = None,
                          budget: int = DEFAULT_BUDGET, use_numba: bool = True) -> dict:
    """Run the full pipeline proving eta_KL = log n / (2 log 2n) for the K_{n,n} walk.

    Stages: threshold check on t*, the y = 1/n reduction on a coarse grid,
    the lattice certificate for G_n < 0 off the corner, and a fine-grid
    validation of the corner (numerical, not symbolic).  Only n = 3 carries a
    supported verdict; other n report stage results without one.
    """
    report = {"n": n, "inputs": {"spacing": spacing, "margin": margin, "t_star": t_star,
                                 "corner": corner, "corner_spacing": corner_spacing},
              "stages": {}}
    thr = t_star_threshold(n)
    report["stages"]["threshold"] = {"value": thr, "passed": bool(t_star < thr and t_star > 0.5)}
    red = _reduction_check(n, t_star)
    report["stages"]["reduction"] = {**red, "passed": red["violations"] == 0 and red["one_sided_bound"]}
    req = GridRequest(Box(t_star, 1.0, 1 / n, 1.0), spacing, margin, modulus_bound(spacing, n),
                      (Box(corner, 1.0, corner, 1.0),), budget)
    cert = grid_certify(BipartiteG(n, use_numba), req, threads)
    report["stages"]["grid"] = {**json.loads(cert.to_json()), "passed": cert.passed}
    cor = _corner_check(n, corner_spacing, 1 - corner) if n == 3 else {"negative": False,
                                                                        "note": "corner bounds are specific to n = 3"}
    report["stages"]["corner"] = {**cor, "passed": bool(cor.get("negative") and cor.get("elementary_bounds", False))}
    limit = float(bipartite_ratio(1 - 1e-9, 1.0, 1 / n, n))
    target = math.log(n) / (2 * math.log(2 * n))
    report["stages"]["limit"] = {"F_near_1": limit, "target": target,
                                 "passed": abs(limit - target) < 1e-6}
    all_ok = all(s["passed"] for s in report["stages"].values())
    if n != 3:
        report["verdict"] = None
        report["note"] = "only n = 3 carries a supported verdict; larger n is a conjecture"
    else:
        report["verdict"] = "pass" if all_ok else None
        if all_ok:
            report["claim"] = {"eta_kl": target, "extremizers": "point masses only"}
    report["passed"] = bool(all_ok and n == 3)
    return report
