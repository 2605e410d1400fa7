from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from generators import g_monomials, h_monomials
from transexp.algebra import VarContext
from transexp.monomials import (
    ContextMismatch,
    Gamma0Monomial,
    GMonomial,
    HMonomial,
    LogMonomial,
    Order,
    cmp_Gamma0,
    cmp_H,
    is_in_TX,
    is_small,
    log_hat,
)
from transexp.series import LogESum

x, y = 0, 1


def E(d, shift=0, var=x, exp=1):
    return HMonomial.gen(d, shift, var, exp)


def reference_cmp(h1: HMonomial, h2: HMonomial) -> int:
    """Lexicographic order written out directly: E0 before E1 before E2, lower shift first, larger variable first."""
    diff = {}
    for key, e in h1.items():
        diff[key] = diff.get(key, 0) + e
    for key, e in h2.items():
        diff[key] = diff.get(key, 0) - e
    for key in sorted(diff, key=lambda k: (k[0], k[1], k[2])):
        if diff[key] != 0:
            return 1 if diff[key] > 0 else -1
    return 0


def test_cmp_H_examples():
    assert cmp_H(E(0), E(1, exp=7)) is Order.GREATER
    h = E(0, exp=2) * E(2, exp=-1)
    assert cmp_H(h, h) is Order.EQUAL
    assert cmp_H(E(0, var=y, exp=100), E(0, var=x)) is Order.LESS


def test_cmp_H_rejects_mismatched_contexts():
    with pytest.raises(ContextMismatch):
        cmp_H(E(0), E(1), VarContext.named(["x"]), VarContext.named(["x", "y"]))


@given(h_monomials, h_monomials)
def test_cmp_H_matches_reference(h1, h2):
    assert h1.cmp(h2) == reference_cmp(h1, h2)


@given(h_monomials, h_monomials, h_monomials)
def test_cmp_H_is_a_total_order_compatible_with_products(a, b, c):
    assert a.cmp(b) == -b.cmp(a)
    assert (a.cmp(b) == 0) == (a == b)
    if a.cmp(b) > 0 and b.cmp(c) > 0:
        assert a.cmp(c) > 0
    if a.cmp(b) > 0:
        assert (a * c).cmp(b * c) > 0


@given(h_monomials, h_monomials)
def test_group_laws(a, b):
    assert a * b == b * a
    assert a * a.inverse() == HMonomial.one()
    assert (a * b).inverse() == a.inverse() * b.inverse()


def test_canonical_form_drops_zero_exponents():
    assert HMonomial({(0, 0, 0): 0}) == HMonomial.one()
    assert E(1) * E(1, exp=-1) == HMonomial.one()


def test_is_small_examples():
    assert is_small(GMonomial({(2, 0, x): 1, (1, 0, x): -1}))
    assert not is_small(GMonomial({(1, 0, x): 1, (0, 0, x): -2}))
    assert is_small(GMonomial.one())


@given(g_monomials, g_monomials)
def test_small_monomials_form_a_subgroup(g1, g2):
    assume(is_small(g1) and is_small(g2))
    assert is_small(g1 * g2)
    assert is_small(g1.inverse())


def test_is_in_TX_examples():
    assert is_in_TX(LogESum.E(2) * LogESum.E(1, exp=-1))
    assert not is_in_TX(LogESum.constant(3))
    assert not is_in_TX(LogESum.log_ep() * 2)


def test_log_hat_examples():
    assert log_hat((GMonomial({(0, 0, x): 2, (1, 0, x): 1}), LogMonomial.one())) == LogESum.E(0, 1) * 3
    assert log_hat((GMonomial({(2, 0, x): 1, (1, 0, x): -1}), LogMonomial.one())).is_zero()
    assert log_hat((GMonomial.one(), LogMonomial.gen(0, x))).is_zero()


def test_cmp_Gamma0_examples():
    t = LogESum.E(2) * LogESum.E(1, exp=-1) - LogESum.E(1) * LogESum.E(0, exp=-1)
    assert cmp_Gamma0(Gamma0Monomial.of(t=t), Gamma0Monomial.of(g=GMonomial.gen(0))) is Order.LESS
    t = LogESum.E(1) * LogESum.E(0, exp=-1)
    assert cmp_Gamma0(Gamma0Monomial.of(t=t), Gamma0Monomial.of(g=GMonomial.gen(0, exp=5))) is Order.GREATER
    m = Gamma0Monomial.of(g=GMonomial.gen(2), t=t)
    assert cmp_Gamma0(m, m) is Order.EQUAL


SMALL_G = [
    GMonomial({(2, 0, x): 1, (1, 0, x): -1}),
    GMonomial({(3, 0, x): 1, (1, 0, x): -1}),
    GMonomial({(2, 0, x): 2, (1, 0, x): -2}),
    GMonomial({(3, 0, x): 1, (2, 0, x): -1}),
]
CANDIDATES = SMALL_G + [
    GMonomial.gen(0),
    GMonomial.gen(1),
    GMonomial({(0, 0, x): 1, (1, 0, x): -1}),
    GMonomial({(2, 0, x): 1, (0, 0, x): -1}),
]


@pytest.mark.parametrize("g", SMALL_G)
@pytest.mark.parametrize("m", CANDIDATES)
def test_small_class_is_convex(g, m):
    one = Gamma0Monomial.of()
    upper = Gamma0Monomial.of(g=g)
    mid = Gamma0Monomial.of(g=m)
    if cmp_Gamma0(upper, one) is Order.LESS:
        upper = upper.inverse()
    if cmp_Gamma0(one, mid) is Order.LESS and cmp_Gamma0(mid, upper) is Order.LESS:
        assert mid.is_small_class()


@pytest.mark.parametrize(
    "t",
    [
        LogESum.E(2) * LogESum.E(1, exp=-1),
        LogESum.E(3) * LogESum.E(1, exp=-1),
        LogESum.E(2, exp=2) * LogESum.E(1, exp=-2),
        LogESum.E(2) * LogESum.E(3) * LogESum.E(1, exp=-2) - LogESum.E(2) * LogESum.E(1, exp=-1),
        LogESum.E(3) * LogESum.E(1, exp=-1) * 2 + LogESum.E(2) * LogESum.E(1, exp=-1) * LogESum.log_ep(),
    ],
)
def test_tx_elements_lead_with_a_positive_E0_power(t):
    from transexp.rewrite import sign_witness

    assert is_in_TX(t)
    w = sign_witness(t)
    k = w.monomial.exponent((0, 1, x))
    assert k > 0
    assert w.monomial != HMonomial.gen(0, 1, x, k)
