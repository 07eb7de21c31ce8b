"""Central numeric tolerances and optimizer settings."""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Tolerances:
    # distributions / kernels
    sum_to_one: float = 1e-12
    nonneg: float = 1e-15
    # reversible pairs
    stationarity: float = 1e-10
    detailed_balance: float = 1e-10
    # semigroup row sums and composition
    semigroup: float = 1e-10
    semigroup_truncation: float = 1e-13
    # PSD test for Diag(pi) P
    psd: float = 1e-10
    # coupling marginals
    coupling: float = 1e-9


TOL = Tolerances()


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the multi-start ratio optimizers.

    ``starts`` counts the Dirichlet-random interior starts; point masses are
    always evaluated on top of these.
    """

    starts: int = 32
    max_iters: int = 500
    gtol: float = 1e-12
    ftol: float = 1e-15
    # largest number of point masses used as local-ascent seeds
    point_seeds: int = 12
    # log-weight box for the softmax parameterization
    theta_bound: float = 60.0
    # entries below this are snapped to zero when polishing witnesses
    snap: float = 1e-12
    grid_resolution: float = 1e-3
    seed: int = 0
    threads: int = field(default_factory=lambda: default_threads())

    def __post_init__(self):
        if self.starts < 8:
            raise ValueError("need at least 8 random starts")
        if not 0 < self.grid_resolution <= 0.5:
            raise ValueError("grid_resolution must lie in (0, 0.5]")


def default_threads() -> int:
    env = os.environ.get("ENTROCON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1
