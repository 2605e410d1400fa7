"""Random inputs shared by the property tests."""

from __future__ import annotations

import random
from fractions import Fraction

from hypothesis import strategies as st

from transexp.monomials import GMonomial, HMonomial, LogMonomial
from transexp.series import LogESum

small_exponents = st.fractions(min_value=-3, max_value=3, max_denominator=3)
int_exponents = st.integers(min_value=-3, max_value=3).map(Fraction)

h_keys = st.tuples(st.integers(0, 3), st.integers(0, 2), st.integers(0, 1))
h_monomials = st.dictionaries(h_keys, small_exponents, max_size=5).map(HMonomial)

g_keys = st.tuples(st.integers(0, 3), st.just(0), st.integers(0, 1))
g_monomials = st.dictionaries(g_keys, int_exponents, max_size=4).map(GMonomial)


def same_profile_pair(rng: random.Random, var) -> tuple[GMonomial, GMonomial]:
    """Two G monomials in ``var`` whose sigma images share the leading E0 and E1 exponents.

    Differences between such monomials only show up deep in the expansion,
    which is what makes them good tests for the sign search.
    """
    a = {d: rng.randint(-2, 2) for d in range(4)}
    b = dict(a)
    moves = [({0: 1, 2: 1}, {1: 2}), ({1: 1, 3: 1}, {2: 2}), ({0: 1, 3: 1}, {1: 1, 2: 1})]
    p, q = rng.choice(moves)
    if rng.random() < 0.5:
        p, q = q, p
    for d, e in p.items():
        b[d] = b.get(d, 0) + e
    for d, e in q.items():
        b[d] = b.get(d, 0) - e
    g1 = GMonomial({(d, 0, var): e for d, e in a.items()})
    g2 = GMonomial({(d, 0, var): e for d, e in b.items()})
    return g1, g2


def random_log_esum(rng: random.Random, max_terms: int = 4, variables: int = 2) -> LogESum:
    """A nonzero sum of at most ``max_terms`` terms, derivative order at most 3."""
    while True:
        pairs = [same_profile_pair(rng, v) for v in range(variables)]
        terms: dict = {}
        for _ in range(rng.randint(1, max_terms)):
            g = rng.choice(pairs[0])
            if variables > 1 and rng.random() < 0.6:
                g = g * rng.choice(pairs[1])
            ell = LogMonomial({(0, v): rng.randint(-1, 2) for v in range(variables) if rng.random() < 0.3})
            key = (g, ell)
            terms[key] = terms.get(key, Fraction(0)) + Fraction(rng.choice([-2, -1, 1, 2, 3]))
        s = LogESum(terms)
        if not s.is_zero():
            return s


def random_integer_esum(rng: random.Random, max_terms: int = 3) -> LogESum:
    """A G-sum in one variable at shift 0 with integer exponents."""
    terms: dict = {}
    for _ in range(rng.randint(1, max_terms)):
        g = GMonomial({(d, 0, 0): rng.randint(-2, 2) for d in range(rng.randint(1, 3))})
        terms[(g, LogMonomial.one())] = Fraction(rng.choice([-2, -1, 1, 3]))
    return LogESum(terms)
