"""Survey where the optimizers put their witnesses across small gallery chains.

For each chain, print the bracket of every constant, whether the witness is a
point mass, and the residual of the stationarity equation for rho and rho0.
"""

import argparse

import numpy as np

from entrocon import entropy_opt as eo
from entrocon.config import OptimizerConfig
from entrocon.gallery import constant_brackets, make_chain

CHAINS = [
    ("three_state", {"M": 100}),
    ("birth_death", {"m": 2, "M": 100}),
    ("complete_lazy", {"n": 5}),
    ("complete_bipartite", {"n": 3}),
    ("bernoulli_laplace", {"n": 5, "k": 2}),
    ("one_to_k", {"n": 4, "k": 2}),
    ("random_transposition", {"n": 4}),
]


def describe(witness):
    if witness is None:
        return "none"
    support = np.count_nonzero(np.asarray(witness) > 1e-9)
    return "point mass" if support == 1 else f"support {support}"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = OptimizerConfig(seed=args.seed)
    for family, params in CHAINS:
        chain = make_chain(family, **params)
        brackets = constant_brackets(chain, cfg)
        print(f"{family} {params}")
        print(f"  lambda  {brackets.pop('lambda').value:.6f}")
        for name, br in brackets.items():
            line = f"  {name:7s} [{br.lower.value:.6f}, {br.upper.value:.6f}]"
            line += f"  witness {describe(br.witness)}"
            if name in ("rho", "rho0") and br.witness is not None:
                rep = eo.extremal_residuals(chain.float_pair, br.upper)
                if rep.max_relative_residual is not None:
                    line += f"  {rep.branch} residual {rep.max_relative_residual:.2e}"
                else:
                    line += f"  {rep.branch} branch"
            print(line)


if __name__ == "__main__":
    main()
