"""Shared fixtures: the two worked systems and independent test oracles."""

import heapq

import pytest

from tnbpa.model import BpaSystem, is_silent, parse_system, transitions_of
from tnbpa.normalization import standardize

# The two-process system where every action matches yet the silent step on
# one side is a genuine change of state.
EX1_TEXT = """\
constants: X X' Y Y'
X -b-> eps
X -tau-> X'
X' -a-> eps
X -a-> eps
Y -b-> eps
Y -tau-> Y'
Y' -a-> eps
"""

# A pair of norm-1 constants related through a state-preserving silent step,
# plus a norm-2 constant that decomposes as a product.
SYSB_TEXT = """\
constants: A B X Y
X -a-> Y
Y -a-> eps
Y -tau-> X
A -a-> eps
A -tau-> B
B -a-> eps
"""


@pytest.fixture(scope="session")
def ex1_sys() -> BpaSystem:
    return parse_system(EX1_TEXT)


@pytest.fixture(scope="session")
def ex1_std(ex1_sys):
    return standardize(ex1_sys)


@pytest.fixture(scope="session")
def sysb_sys() -> BpaSystem:
    return parse_system(SYSB_TEXT)


@pytest.fixture(scope="session")
def sysb_std(sysb_sys):
    return standardize(sysb_sys)


def brute_force_norm(sys: BpaSystem, cid: int, cap: int = 10_000) -> float:
    """Independent norm oracle: Dijkstra over process strings.

    Visible steps cost one, silent steps cost zero; the value is the cheapest
    path from the single-constant process to eps.  Exponential in the worst
    case, fine at fixture scale.
    """
    start = (cid,)
    dist = {start: 0}
    heap = [(0, start)]
    popped = 0
    while heap:
        d, p = heapq.heappop(heap)
        popped += 1
        assert popped < cap, "brute-force norm oracle exhausted its budget"
        if p == ():
            return d
        if d > dist.get(p, float("inf")):
            continue
        for label, q in transitions_of(sys, p):
            nd = d + (0 if is_silent(label) else 1)
            if nd < dist.get(q, float("inf")):
                dist[q] = nd
                heapq.heappush(heap, (nd, q))
    return float("inf")


def naive_norm_values(sys: BpaSystem) -> list[float]:
    """Second independent norm oracle: plain rounds of Bellman relaxation.

    No worklist, no priorities; just sweep every rule until nothing improves.
    Converges because each value only ever decreases and is bounded below.
    """
    values = [float("inf")] * sys.n
    changed = True
    while changed:
        changed = False
        for r in sys.rules:
            cand = (0 if is_silent(r.label) else 1) + sum(values[c] for c in r.rhs)
            if cand < values[r.lhs]:
                values[r.lhs] = cand
                changed = True
    return values


def names_of(std, ids) -> list[str]:
    return [std.sys.name(c) for c in ids]


def base_as_names(std, base) -> tuple[set[str], dict[str, tuple[str, ...]]]:
    """Render a decomposition base with constant names for readable asserts."""
    primes = {std.sys.name(i) for i in base.primes}
    equations = {
        std.sys.name(i): tuple(std.sys.name(c) for c in rhs.ids)
        for i, rhs in base.equations.items()
    }
    return primes, equations
