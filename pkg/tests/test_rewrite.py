import random
from fractions import Fraction

import pytest
import sympy

from generators import random_log_esum
from transexp.monomials import GMonomial, HMonomial, LogMonomial
from transexp.rewrite import (
    ZERO,
    Sign,
    bell,
    epsilon,
    init_profile,
    nu,
    nu0,
    oracle_leading_term,
    phi_generator,
    phi_sigma,
    rho0,
    sigma0,
    sign,
    sign_witness,
)
from transexp.series import LogESum, Series, leading_term, truncate, work_budget

x, y = 0, 1


def H(exponents: dict) -> HMonomial:
    """``{(d, shift): exp}`` in the variable x."""
    return HMonomial({(d, m, x): Fraction(e) for (d, m), e in exponents.items()})


def E(d, shift=0, var=x, exp=1):
    return LogESum.E(d, shift, var, exp)


def finite(series: Series) -> dict:
    """All terms of a series known to be finite."""
    out = {}
    i = 0
    while (t := series.term(i)) is not None:
        out[t[0]] = t[1]
        i += 1
    return out


# -- Bell polynomials ---------------------------------------------------------


def _sympy_bell(d: int) -> dict[GMonomial, Fraction]:
    """``d``-th derivative of ``exp(f)`` divided by ``exp(f)``, as a polynomial in f', f'', ..."""
    t = sympy.Symbol("t")
    f = sympy.Function("f")(t)
    expr = sympy.expand(sympy.simplify(sympy.diff(sympy.exp(f), t, d) / sympy.exp(f)))
    derivs = [sympy.diff(f, t, k) for k in range(1, d + 1)]
    symbols = sympy.symbols(f"f1:{d + 1}")
    poly = sympy.Poly(expr.subs(dict(zip(reversed(derivs), reversed(symbols)))), *symbols)
    out = {}
    for powers, c in poly.terms():
        g = GMonomial({(k + 1, 0, x): p for k, p in enumerate(powers) if p})
        out[g] = Fraction(int(c))
    return out


@pytest.mark.parametrize("d", range(1, 7))
def test_bell_matches_faa_di_bruno(d):
    got = {g: c for (g, _ell), c in bell(d).terms.items()}
    assert got == _sympy_bell(d)


def test_bell_small_cases():
    assert bell(1) == E(1)
    assert bell(2) == E(1, exp=2) + E(2)
    assert bell(3) == E(1, exp=3) + E(1) * E(2) * 3 + E(3)


# -- sigma0 -------------------------------------------------------------------


def _brute_force_sigma(d: int) -> dict[HMonomial, Fraction]:
    """Differentiate E0 ``d`` times with the rule ``E_k' = E_k E_{k+1}``."""
    es = sympy.symbols(f"e0:{d + 2}")

    def D(expr):
        return sympy.expand(sum(sympy.diff(expr, es[k]) * es[k] * es[k + 1] for k in range(d + 1)))

    expr = es[0]
    for _ in range(d):
        expr = D(expr)
    out = {}
    for powers, c in sympy.Poly(expr, *es).terms():
        out[H({(k, 0): p for k, p in enumerate(powers) if p})] = Fraction(int(c))
    return out


def test_sigma0_base_cases():
    assert finite(sigma0(E(1))) == {H({(0, 0): 1, (1, 0): 1}): 1}
    assert finite(sigma0(E(2))) == {H({(0, 0): 1, (1, 0): 2}): 1, H({(0, 0): 1, (1, 0): 1, (2, 0): 1}): 1}


@pytest.mark.parametrize("d", range(1, 6))
def test_sigma0_matches_brute_force_differentiation(d):
    assert finite(sigma0(E(d))) == _brute_force_sigma(d)


def test_sigma0_of_a_fractional_power():
    half = Fraction(1, 2)
    assert truncate(sigma0(E(2, exp=half)), 2) == {
        H({(0, 0): half, (1, 0): 1}): 1,
        H({(0, 0): half, (2, 0): 1}): half,
    }


# -- epsilon ------------------------------------------------------------------


def test_epsilon_closed_forms():
    assert finite(epsilon(2).body) == {H({(2, 1): 1, (1, 1): -1}): 1}
    # (E3 - E2) / (E1 + E2) at x-1, expanded with a geometric tail
    numerator = Series.finite({H({(3, 1): 1, (1, 1): -1}): Fraction(1), H({(2, 1): 1, (1, 1): -1}): Fraction(-1)})
    from transexp.series import BinomialTail, mul

    closed = mul(numerator, BinomialTail(-1, Series.finite({H({(2, 1): 1, (1, 1): -1}): Fraction(1)})))
    assert truncate(epsilon(3).body, 12) == truncate(closed, 12)
    assert epsilon(3).leading_term() == (-1, H({(2, 1): 1, (1, 1): -1}))


@pytest.mark.parametrize("d", range(2, 7))
def test_epsilon_structural_invariants(d):
    for mono, _c in truncate(epsilon(d).body, 10).items():
        assert mono.exponent((d, 1, x)) in (0, 1)
        assert all(k[0] <= d for k in mono.keys())
        assert sum(e for _k, e in mono.items()) == 0


# -- nu and rho ---------------------------------------------------------------


@pytest.mark.parametrize("a", [Fraction(1), Fraction(-2), Fraction(3, 2)])
def test_nu0_on_single_generators(a):
    assert finite(nu0(Series.finite({H({(1, 0): a}): Fraction(1)}))) == {H({(0, 1): a, (1, 1): a}): 1}
    assert finite(nu0(Series.finite({H({(0, 0): a}): Fraction(1)}))) == {H({(0, 0): a}): 1}


def test_nu0_of_E2():
    assert finite(nu0(Series.finite({H({(2, 0): 1}): Fraction(1)}))) == {H({(1, 1): 1}): 1, H({(2, 1): 1}): 1}


def test_rho0_examples():
    assert finite(rho0(LogESum.log_ep())) == {H({(0, 1): 1}): 1, H({(1, 1): 1}): 1}
    assert finite(rho0(E(0, exp=Fraction(5, 2)))) == {H({(0, 0): Fraction(5, 2)}): 1}
    half = Fraction(1, 2)
    assert truncate(rho0(LogESum.log_ep(exp=half)), 2) == {
        H({(0, 1): half}): 1,
        H({(0, 1): -half, (1, 1): 1}): half,
    }


@pytest.mark.parametrize("d", [2, 3, 4])
def test_repeated_nu_of_the_problematic_quotient(d):
    s = Series.finite({H({(d - 1, 1): 1, (d, 1): -1}): Fraction(1)})
    for level in range(1, d + 1):
        s = nu(s, level)
    assert leading_term(s) == (1, H({(0, d): 1}))


def test_order_preservation_under_nu():
    rng = random.Random(5)
    checked = 0
    while checked < 100:
        h1, h2 = (
            HMonomial({(d, 0, v): rng.randint(-2, 2) for d in range(4) for v in range(2) if rng.random() < 0.4})
            for _ in range(2)
        )
        c = h1.cmp(h2)
        if c == 0:
            continue
        if c < 0:
            h1, h2 = h2, h1
        l1 = leading_term(nu0(Series.finite({h1: Fraction(1)})))[1]
        l2 = leading_term(nu0(Series.finite({h2: Fraction(1)})))[1]
        assert l1.cmp(l2) > 0
        checked += 1


# -- Init and the sign witness ------------------------------------------------


def test_init_profile_examples():
    s = E(0) * E(2) - E(1, exp=2)
    profile = init_profile(s)
    assert profile.subsums == {LogMonomial.one(): {H({(0, 0): 2, (1, 0): 1, (2, 0): 1}): 1}}

    p = init_profile(E(2) * E(0, exp=3) * 4)
    assert list(p.subsums.values()) == [{H({(0, 0): 4, (1, 0): 2}): 4}]

    p = init_profile(LogESum.log_ep() - 1)
    assert p.indices == [LogMonomial.gen(0, x)]
    assert p.log_leads[LogMonomial.gen(0, x)] == H({(0, 1): 1})


def test_sign_witness_examples():
    w = sign_witness(E(0) * E(2) - E(1, exp=2))
    assert (w.coefficient, w.monomial) == (1, H({(0, 0): 2, (0, 1): 1, (1, 1): 2}))
    assert sign_witness(LogESum.zero()) is ZERO
    assert sign_witness(E(2) * E(1, exp=-1) - E(1) * E(0, exp=-1)).sign is Sign.POSITIVE


def test_sign_examples():
    assert sign(E(1) - E(0)) is Sign.POSITIVE
    assert sign(E(3) - E(0, exp=2)) is Sign.NEGATIVE
    logs = LogESum.log_ep(0, x, 2) * LogESum.log_ep(0, y, -5) - 1
    assert sign(logs) is Sign.POSITIVE
    assert sign(LogESum.log_ep(0, x, -1) * LogESum.log_ep(0, y, 3) - 1) is Sign.NEGATIVE


def test_functionally_zero_mixed_shift_sum():
    # E'(x) = E(x) E'(x-1) holds as functions although the formal sums differ
    s = E(1) - E(0) * E(1, 1)
    assert not s.is_zero()
    assert sign_witness(s) is ZERO


@pytest.mark.parametrize("seed", range(4))
def test_sign_witness_agrees_with_truncation_oracle(seed):
    rng = random.Random(seed)
    for _ in range(25):
        s = random_log_esum(rng)
        w = sign_witness(s)
        with work_budget(200_000):
            assert (w.coefficient, w.monomial) == oracle_leading_term(s)


# -- generator images one shift down -------------------------------------------


def test_phi_generator_examples():
    img = phi_generator("G", (0, 0, x), 3)
    assert img.exp_arg == E(0, 1) * 3 and img.prefactor == LogESum.constant(1)
    img = phi_generator("L", (0, x))
    assert img.exp_arg.is_zero() and img.prefactor == E(0, 1) + LogESum.log_ep(1)
    img = phi_generator("G", (2, 0, x))
    assert img.exp_arg == E(0, 1)
    assert img.prefactor == E(1, 1, exp=2)
    assert img.power == 1 and img.tail == E(2, 1) * E(1, 1, exp=-2)


@pytest.mark.parametrize(
    "t",
    [
        E(2) * E(1, exp=-1),
        E(3) * E(1, exp=-1),
        E(2, exp=2) * E(1, exp=-2) + E(3) * E(1, exp=-1),
        E(2) * E(3) * E(1, exp=-2) - E(2) * E(1, exp=-1) * 2,
    ],
)
def test_phi_commutes_with_sigma_and_nu(t):
    assert truncate(phi_sigma(t), 8) == truncate(nu(sigma0(t), 0), 8)
