"""Large-N recursion for the moments S_p(n) = E Tr B_n^p / N.

One step adds delta_n / N times a sum over the nonzero binary strings
x_1..x_p. A string contributes (-1)^(number of ones) times the product of
S_d over the cyclic gaps d between consecutive ones. Terms depend only on the
multiset of gaps, so the 2^p - 1 strings collapse to one term per integer
partition of p with multiplicity

    (-1)^k  k! / prod_j m_j!  p / k

for a partition with k parts and part multiplicities m_j (number of cyclic
compositions of p with those parts, each counted once per rotation).
"""

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from ._validation import check_count, check_dimension, check_order, check_truncation
from .exceptions import ConsistencyError, InvalidParameterError

P_MAX = 24
UNDERFLOW = 1e-300
_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class GapTerm:
    bits: str
    sign: int
    gaps: tuple


def _gaps(bits):
    p = len(bits)
    ones = [i for i, b in enumerate(bits) if b == "1"]
    # Gap from each set bit to the next one strictly ahead, cyclically.
    return tuple((ones[(j + 1) % len(ones)] - i - 1) % p + 1 for j, i in enumerate(ones))


def gap_terms(p):
    """Yield one GapTerm per nonzero binary string of length p (2^p - 1 of them)."""
    p = check_order(p, P_MAX)
    for code in range(1, 2 ** p):
        bits = format(code, f"0{p}b")
        gaps = _gaps(bits)
        yield GapTerm(bits, (-1) ** len(gaps), gaps)


def _partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


@lru_cache(maxsize=None)
def gap_multiplicities(p):
    """Signed count of bit strings per gap multiset, keyed by sorted gap tuples."""
    p = check_order(p, P_MAX)
    out = {}
    for parts in _partitions(p):
        k = len(parts)
        arrangements = factorial(k)
        for m in Counter(parts).values():
            arrangements //= factorial(m)
        out[parts] = (-1) ** k * arrangements * p // k
    return out


@lru_cache(maxsize=None)
def _term_table(p_max):
    tables = []
    for p in range(1, p_max + 1):
        mult = gap_multiplicities(p)
        exponents = np.zeros((len(mult), p_max), dtype=int)
        coeffs = np.empty(len(mult))
        for row, (parts, count) in enumerate(mult.items()):
            for d in parts:
                exponents[row, d - 1] += 1
            coeffs[row] = count
        exponents.setflags(write=False)
        coeffs.setflags(write=False)
        tables.append((exponents, coeffs))
    return tuple(tables)


@lru_cache(maxsize=None)
def _cancellation_bound(p_max):
    return np.array([np.abs(c).sum() for _, c in _term_table(p_max)])


@dataclass(frozen=True)
class MomentState:
    n: int
    values: np.ndarray
    ratio: float

    @classmethod
    def initial(cls, p_max, ratio):
        p_max = check_order(p_max, P_MAX)
        if not 0 < ratio <= 1:
            raise InvalidParameterError(f"ratio delta_n/N must be in (0, 1], got {ratio}")
        return cls(0, np.ones(p_max), float(ratio))

    @property
    def p_max(self):
        return self.values.size


def _increment(values, tables):
    out = np.empty(len(tables))
    for i, (exponents, coeffs) in enumerate(tables):
        out[i] = coeffs @ np.prod(values[None, :] ** exponents, axis=1)
    return out


def recursion_step(state):
    """Advance one step; raises ConsistencyError if S_p stops being non-increasing in p."""
    tables = _term_table(state.p_max)
    values = state.values + state.ratio * _increment(state.values, tables)
    # High orders cancel sums of size up to 2^p, so allow for that roundoff.
    slack = _MONOTONE_SLACK + 8 * np.finfo(float).eps * state.ratio * _cancellation_bound(state.p_max)
    if np.any(np.diff(values) > slack[1:]) or np.any(values < -slack) or np.any(values > 1 + slack):
        raise ConsistencyError(f"moments left the monotone [0, 1] range at step {state.n + 1}: {values}")
    return MomentState(state.n + 1, values, state.ratio)


@dataclass(frozen=True)
class RecursionTable:
    """S_p(n) for n = 0..L (rows) and p = 1..p_max (columns)."""

    n: int
    delta_n: int
    values: np.ndarray
    underflow: np.ndarray

    @property
    def steps(self):
        return self.values.shape[0] - 1

    @property
    def tau(self):
        return self.steps * self.delta_n / self.n

    def column(self, p):
        return self.values[:, p - 1]


def solve_recursion(n, delta_n, steps, p_max):
    """Iterate the recursion from S_p(0) = 1 for ``steps`` steps."""
    n = check_dimension(n)
    delta_n = check_truncation(delta_n, n, allow_zero=False)
    steps = check_count(steps, "steps", minimum=0)
    state = MomentState.initial(p_max, delta_n / n)
    rows = [state.values]
    for _ in range(steps):
        state = recursion_step(state)
        rows.append(state.values)
    values = np.array(rows)
    # S_1 is geometric; use the closed form to avoid accumulated rounding.
    values[:, 0] = (1 - delta_n / n) ** np.arange(steps + 1)
    underflow = np.abs(values) < UNDERFLOW
    values.setflags(write=False)
    underflow.setflags(write=False)
    return RecursionTable(n, delta_n, values, underflow)
