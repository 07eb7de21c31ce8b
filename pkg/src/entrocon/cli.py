"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 failed certificate or envelope
or ordering check, 4 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import entropy_opt as eo
from .certify import ResourceCapExceeded, bipartite_certificate
from .chain_core import (ReversiblePair, SupportError, chain_from_dict, density,
                         point_mass, to_float, validate)
from .config import OptimizerConfig, default_threads
from .factorization import NotLazyError, lazy_factorize, psd_check
from .functionals import (entropy_decay_derivative, entropy_functional, evolve,
                          variance_decay_derivative, variance_functional)
from .gallery import (FAMILIES, SWEEP_DEFAULTS, GalleryChain, GuardError, constant_brackets,
                      emit_chain, emit_factorization, make_chain, ordering_violations,
                      separation_sweep, sweep_csv)
from .spectral import NotReversibleError, eta_chi2, eta_tv
from .transport import (bernoulli_laplace_coupling, bernoulli_laplace_kappa,
                        delta_lower_from_coupling, johnson_edges, johnson_metric)

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_CAP = 0, 2, 3, 4
ALL_CONSTANTS = ("rho", "alpha", "delta", "rho0", "lambda", "eta_tv", "eta_chi2")
DEFAULT_CONSTANTS = ("rho", "alpha", "delta", "rho0", "lambda")
FAMILY_PARAMS = ("n", "k", "ell", "M", "m", "d", "pi_star", "graph")


class UsageError(ValueError):
    """Input that the command cannot act on."""


@dataclass
class RunManifest:
    """What was run, on what, with which overrides; written next to outputs."""

    command: str
    source: str
    overrides: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    seed: int = 0


# ------------------------------------------------------------ helpers


def _number(text: str):
    """Integers stay integers so exact chain builders see exact input."""
    v = float(text)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def _add_source(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gallery", choices=FAMILIES, help="build a chain from the gallery")
    src.add_argument("--file", type=Path, help="chain JSON file")
    for name in ("n", "k", "ell", "m", "d"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--M", type=_number)
    p.add_argument("--pi-star", dest="pi_star", type=float)
    p.add_argument("--graph", help="named graph for lazy_rw_graph")


def _add_common(p: argparse.ArgumentParser, out_help="output path (default: stdout)"):
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: ENTROCON_THREADS or 1)")
    p.add_argument("--out", type=Path, help=out_help)
    p.add_argument("--manifest", type=Path, help="write a run manifest JSON here")


def _config(args) -> OptimizerConfig:
    threads = args.threads if args.threads is not None else default_threads()
    return OptimizerConfig(seed=args.seed, threads=max(1, threads))


def _family_params(args) -> dict:
    params = {k: getattr(args, k) for k in FAMILY_PARAMS if getattr(args, k, None) is not None}
    if args.gallery == "random_regular":
        params["seed"] = args.seed
    return params


def _chain_from_pair(pair: ReversiblePair) -> GalleryChain:
    """Wrap a file chain; laziness is the only factorizability test applied."""
    lazy = eo.is_lazy(pair.P)
    fac = lazy_factorize(_exact_if_possible(pair)) if lazy else None
    return GalleryChain(None, pair, fac, (), lazy)


def _exact_if_possible(pair: ReversiblePair) -> ReversiblePair:
    """Binary-exact Fraction copy when detailed balance holds with no rounding."""
    pi = np.array([Fraction(float(v)) for v in pair.pi], dtype=object)
    P = np.array([[Fraction(float(v)) for v in row] for row in pair.P], dtype=object)
    flow = pi[:, None] * P
    if sum(pi) == 1 and all(sum(row) == 1 for row in P) and np.all(flow == flow.T):
        return ReversiblePair(pi, P, pair.states)
    return pair


def _load(args) -> tuple[GalleryChain, str]:
    if args.file is not None:
        try:
            doc = json.loads(args.file.read_text())
            pi, P, states, outputs = chain_from_dict(doc)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read chain file: {exc}") from None
        if outputs is not None:
            raise UsageError("expected a chain on one state space, got a channel")
        return _chain_from_pair(ReversiblePair(pi, P, tuple(states))), str(args.file)
    params = _family_params(args)
    chain = make_chain(args.gallery, **params)
    return chain, chain.spec.label()


def _write(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, Fraction):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _finish(args, manifest: RunManifest):
    if args.out is not None:
        manifest.outputs.append(str(args.out))
    if args.manifest is not None:
        args.manifest.write_text(_dump(asdict(manifest)))


def _bracket_dict(value) -> dict:
    if isinstance(value, eo.BoundBracket):
        return value.to_dict()
    est = value.to_dict()
    return {"name": value.name, "lower": est, "upper": est, "estimate": value.value}


# ------------------------------------------------------------ commands


def cmd_constants(args) -> int:
    which = tuple(w.strip() for w in args.which.split(",")) if args.which else DEFAULT_CONSTANTS
    unknown = [w for w in which if w not in ALL_CONSTANTS]
    if unknown:
        raise UsageError(f"unknown constants {unknown}; choose from {ALL_CONSTANTS}")
    chain, source = _load(args)
    cfg = _config(args)
    diag = validate(chain.float_pair)
    report = {"command": "constants", "source": source, "seed": args.seed,
              "reversible": diag.reversible and diag.stationary, "brackets": {}}
    code = EXIT_OK
    if not report["reversible"]:
        # only the channel-level coefficients make sense without reversibility
        pair = chain.float_pair
        skipped = [w for w in which if w not in ("eta_tv", "eta_chi2")]
        if "eta_tv" in which:
            report["brackets"]["eta_tv"] = _bracket_dict(eta_tv(pair.pi, pair.P))
        if "eta_chi2" in which:
            report["brackets"]["eta_chi2"] = _bracket_dict(eta_chi2(pair.pi, pair.P))
        report["aborted"] = skipped
        report["error"] = "chain is not reversible with respect to pi"
        code = EXIT_INVALID
    else:
        brackets = constant_brackets(chain, cfg, which)
        report["factorizable"] = chain.factorizable
        report["brackets"] = {k: _bracket_dict(v) for k, v in brackets.items()}
        if "alpha" in which and "alpha" not in brackets:
            report["skipped"] = ["alpha: no factorization available"]
        bad = ordering_violations(brackets, tol=1e-9)
        report["ordering"] = {"checked": [c for c in ("rho", "alpha", "delta", "rho0", "lambda")
                                          if c in brackets],
                              "violations": [list(b) for b in bad], "consistent": not bad}
        if chain.known:
            report["known"] = [asdict(c) for c in chain.known]
        if bad:
            code = EXIT_FAILED
    _write(_dump(report), args.out)
    _finish(args, RunManifest("constants", source, {"which": list(which)}, seed=args.seed))
    return code


def cmd_separation(args) -> int:
    cfg = _config(args)
    grid = [_number(v) for v in args.grid.split(",")] if args.grid else None
    fixed = {k: getattr(args, k) for k in ("k", "m") if getattr(args, k) is not None}
    rows = separation_sweep(args.family, grid, cfg, **fixed)
    _write(sweep_csv(rows), args.out)
    _finish(args, RunManifest("separation", args.family, {"grid": grid, **fixed}, seed=args.seed))
    return EXIT_OK


TRAJECTORY_HEADER = ["mode", "time", "entropy", "variance", "entropy_derivative",
                     "variance_derivative", "entropy_envelope", "variance_envelope"]


def _initial_law(spec: str, pair: ReversiblePair) -> np.ndarray:
    pi = to_float(pair.pi)
    if spec == "pi":
        return pi.copy()
    if "," in spec:
        nu = np.array([float(v) for v in spec.split(",")])
        if nu.shape != pi.shape or np.any(nu < 0) or not math.isclose(nu.sum(), 1, abs_tol=1e-12):
            raise UsageError("initial law must be a distribution on the state space")
        return nu
    x = int(spec)
    if not 0 <= x < pair.n:
        raise UsageError(f"state {x} outside 0..{pair.n - 1}")
    return point_mass(pair.n, x)


def trajectory_rows(pair: ReversiblePair, nu0, times, steps: int, factorizable=None):
    """Decay table for the continuous semigroup and the discrete chain.

    Envelopes use the certified lower bounds on rho0 and delta, exact lambda
    and eta_chi2 (for the discrete variance).  Returns the rows and the
    list of envelope violations.
    """
    pair = pair.as_float()
    pi = pair.pi
    density(nu0, pi)  # raises when nu0 is not absolutely continuous
    bounds = eo.bound_propagate(pair, factorizable)
    rho0_lo, delta_lo, lam = bounds["rho0"].value, bounds["delta"].value, bounds["lambda"].value
    contraction = eta_chi2(pi, pair.P).value
    ent0 = entropy_functional(pi, density(nu0, pi))
    var0 = variance_functional(pi, density(nu0, pi))
    if np.array_equal(np.asarray(nu0, dtype=float), pi):  # invariant law: exact zeros
        ent0 = var0 = 0.0
    rows, violations = [], []
    stationary = var0 == 0.0

    def check(mode, t, ent, var, env_e, env_v):
        if ent > env_e * (1 + 1e-9) + 1e-12 or var > env_v * (1 + 1e-9) + 1e-12:
            violations.append((mode, t))

    for t in times:
        f = density(evolve(pair, nu0, t), pi)
        ent, var = entropy_functional(pi, f), variance_functional(pi, f)
        env_e, env_v = math.exp(-rho0_lo * t) * ent0, math.exp(-2 * lam * t) * var0
        d_ent = entropy_decay_derivative(pair, nu0, t) if ent0 > 0 else 0.0
        d_var = variance_decay_derivative(pair, nu0, t)
        if stationary:
            ent = var = d_ent = d_var = 0.0
        rows.append(["continuous", t, ent, var, d_ent, d_var, env_e, env_v])
        check("continuous", t, ent, var, env_e, env_v)
    nu = np.asarray(nu0, dtype=float)
    for m in range(steps + 1):
        f = density(nu, pi)
        ent, var = entropy_functional(pi, f), variance_functional(pi, f)
        env_e, env_v = (1 - delta_lo) ** m * ent0, contraction ** m * var0
        if stationary:
            ent = var = 0.0
        rows.append(["discrete", m, ent, var, "", "", env_e, env_v])
        check("discrete", m, ent, var, env_e, env_v)
        nu = nu @ pair.P
    return rows, violations


def cmd_trajectory(args) -> int:
    chain, source = _load(args)
    pair = chain.float_pair
    nu0 = _initial_law(args.nu0 if args.nu0 is not None else str(pair.n - 1), pair)
    times = np.linspace(0.0, args.t_max, args.points).tolist()
    rows, violations = trajectory_rows(pair, nu0, times, args.steps, chain.factorizable)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for r in rows:
        w.writerow([r[0], repr(float(r[1])) if r[0] == "continuous" else str(r[1])]
                   + [repr(float(v)) if v != "" else "" for v in r[2:]])
    _write(buf.getvalue(), args.out)
    one_step = entropy_functional(pair.pi, density(nu0 @ pair.P, pair.pi))
    at_one = entropy_functional(pair.pi, density(evolve(pair, nu0, 1.0), pair.pi))
    print(f"entropy after one discrete step {one_step!r}; continuous at t=1 {at_one!r}",
          file=sys.stderr)
    _finish(args, RunManifest("trajectory", source, {"nu0": args.nu0, "t_max": args.t_max,
                                                     "points": args.points, "steps": args.steps},
                              seed=args.seed))
    if violations:
        print(f"envelope violated at {violations}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_certify(args) -> int:
    threads = args.threads if args.threads is not None else default_threads()
    start = time.perf_counter()
    report = bipartite_certificate(n=args.n, spacing=args.spacing, margin=args.margin,
                                   t_star=args.t_star, threads=threads, budget=args.budget)
    report["runtime_seconds"] = round(time.perf_counter() - start, 3)
    _write(_dump(report), args.out)
    print(f"verdict {report['verdict']} in {report['runtime_seconds']} s", file=sys.stderr)
    _finish(args, RunManifest("certify", "bipartite", {"n": args.n, "spacing": args.spacing,
                                                       "margin": args.margin, "t_star": args.t_star},
                              seed=args.seed))
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_factorize(args) -> int:
    chain, source = _load(args)
    fac = chain.factorization
    if fac is None:
        ok, low = psd_check(chain.float_pair)
        if not ok:
            raise UsageError(f"Diag(pi) P has eigenvalue {low:.3e} < 0, so no factorization exists")
        raise UsageError("chain is not lazy and no explicit factorization is known")
    residual = fac.residual(chain.pair.P if fac.exact == chain.pair.exact else chain.float_pair.P)
    _write(emit_factorization(chain), args.out)
    print(f"product residual {residual}", file=sys.stderr)
    _finish(args, RunManifest("factorize", source, seed=args.seed))
    return EXIT_OK


def cmd_coupling(args) -> int:
    n, k = args.n, args.k
    if not (2 <= n and 1 <= k <= n - 1):
        raise UsageError("need n >= 2 and 1 <= k <= n - 1")
    x = frozenset(range(k))
    y = frozenset(list(range(k - 1)) + [k])
    c = bernoulli_laplace_coupling(n, k, x, y)
    kappa = bernoulli_laplace_kappa(n, k)
    report = {"command": "coupling", "family": "bernoulli_laplace", "n": n, "k": k,
              "validated": True, "expected_distance": str(c.expected_distance),
              "max_distance": c.max_distance, "parts": {str(p): str(m) for p, m in sorted(c.part.items())},
              "kappa": str(kappa), "kappa_float": float(kappa)}
    if args.lp:
        pair = make_chain("bernoulli_laplace", n=n, k=k).float_pair
        rep = delta_lower_from_coupling(pair, johnson_metric(n, k), johnson_edges(n, k), seed=args.seed)
        report["transport"] = {"kappa": None if rep.estimate is None else rep.estimate.value,
                               "w_infty_violations": rep.w_infty_violations,
                               "checked_pairs": rep.checked_pairs}
    _write(_dump(report), args.out)
    _finish(args, RunManifest("coupling", "bernoulli_laplace", {"n": n, "k": k}, seed=args.seed))
    return EXIT_OK


def cmd_emit(args) -> int:
    chain, source = _load(args)
    if args.factorization:
        if chain.factorization is None:
            raise UsageError("chain has no factorization to emit")
        text = emit_factorization(chain)
    else:
        text = emit_chain(chain)
    _write(text, args.out)
    _finish(args, RunManifest("emit", source, seed=args.seed))
    return EXIT_OK


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entrocon",
                                     description="Entropy contraction constants of finite Markov chains")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="bracket contraction constants of one chain")
    _add_source(p)
    _add_common(p)
    p.add_argument("--which", help=f"comma list from {','.join(ALL_CONSTANTS)}")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("separation", help="sweep a family and bracket two constants")
    p.add_argument("family", choices=sorted(SWEEP_DEFAULTS))
    p.add_argument("--grid", help="comma list of parameter values")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    _add_common(p, "CSV path (default: stdout)")
    p.set_defaults(func=cmd_separation)

    p = sub.add_parser("trajectory", help="entropy and variance decay table")
    _add_source(p)
    _add_common(p, "CSV path (default: stdout)")
    p.add_argument("--nu0", help="'pi', a state index, or a comma list of weights "
                                 "(default: the last state)")
    p.add_argument("--t-max", dest="t_max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--steps", type=int, default=10, help="discrete steps")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("certify", help="grid certificate for the complete bipartite walk")
    p.add_argument("target", choices=["bipartite"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--spacing", type=float, default=1e-5)
    p.add_argument("--margin", type=float, default=0.00078)
    p.add_argument("--t-star", dest="t_star", type=float, default=0.58)
    p.add_argument("--budget", type=float, default=5e9, help="largest number of lattice points")
    _add_common(p, "JSON report path (default: stdout)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("factorize", help="emit a factorization kernel K with P = K K*")
    _add_source(p)
    _add_common(p)
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("coupling", help="explicit coupling for the Bernoulli-Laplace walk")
    p.add_argument("target", choices=["bernoulli_laplace"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lp", action="store_true", help="also solve the transport LPs")
    _add_common(p)
    p.set_defaults(func=cmd_coupling)

    p = sub.add_parser("emit", help="write a chain (or its factorization) as JSON")
    _add_source(p)
    _add_common(p)
    p.add_argument("--factorization", action="store_true")
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResourceCapExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, GuardError, SupportError, NotLazyError, NotReversibleError,
            eo.DegenerateChainError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
