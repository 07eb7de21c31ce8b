import numpy as np
import pytest
from hypothesis import strategies as st

from entrocon.chain_core import ReversiblePair


def reversible_from_weights(W) -> ReversiblePair:
    """Random-walk pair of a symmetric nonnegative weight matrix."""
    W = np.asarray(W, dtype=float)
    W = 0.5 * (W + W.T)
    deg = W.sum(axis=1)
    return ReversiblePair(deg / deg.sum(), W / deg[:, None])


@st.composite
def reversible_pairs(draw, min_size=2, max_size=5, positive=True):
    n = draw(st.integers(min_size, max_size))
    lo = 0.05 if positive else 0.0
    vals = draw(st.lists(st.floats(lo, 1.0), min_size=n * n, max_size=n * n))
    W = np.array(vals).reshape(n, n) + np.eye(n) * 0.05
    return reversible_from_weights(W)


@st.composite
def distributions(draw, n):
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_point():
    """Symmetric two-state chain flipping with probability 1/4."""
    return ReversiblePair(np.array([0.5, 0.5]), np.array([[0.75, 0.25], [0.25, 0.75]]))


# ------------------------------------------------------------ acceptance report

ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """Store one PASS/FAIL line per acceptance criterion and assert it."""

    def _record(key, ok: bool, detail: str):
        key = str(key)
        ACCEPTANCE_LINES[key] = f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[key])
        assert ok, detail

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        def order(key):
            digits = "".join(c for c in key if c.isdigit())
            return int(digits), key
        for key in sorted(ACCEPTANCE_LINES, key=order):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
