"""Formal derivatives on log-E-sums and on H-series.

``d_esum`` differentiates a finite log-E-sum in ``x``: every argument ``v - m``
moves with ``x``, so ``E^(d)(v-m)' = E^(d+1)(v-m)`` and
``(log E'(v-m))' = E''(v-m) / E'(v-m)``.

``d_hseries`` applies ``E_d' = E_d E_{d+1}`` (and its level-shifted form on
lower ``E_0`` factors) to a lazy series in one of two ways.  The structural
route pushes the product rule through the expansion nodes.  The termwise
route differentiates the emitted terms one by one and releases a result term
once no later input can reach it.  Products such as ``(1/E')' * (1/E'')``
are finite although both factors are infinite; the structural route then
waits forever for a next term, while the termwise route never forms them.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Iterator

from .monomials import LX_INDEX, X_INDEX, GMonomial, HMonomial, LogMonomial
from .series import LogESum, Series, _Desc, derive_monomial, truncate


def _require_integer(exp: Fraction, what: str) -> None:
    if exp.denominator != 1:
        raise ValueError(f"{what} has the non-integer exponent {exp}; differentiate it in the term layer")


def d_monomial(g: GMonomial, ell: LogMonomial) -> LogESum:
    """Derivative of one product ``g * ell`` by the Leibniz rule."""
    out = LogESum.zero()
    for key, a in g.items():
        d, shift, var = key
        _require_integer(a, "a G generator")
        if d == LX_INDEX:
            raise ValueError("the derivative of L(x) is 1/E'(L(x)), outside the log-E-sums")
        rest = g * GMonomial({key: -1})
        if d == X_INDEX:
            out = out + LogESum.monomial(rest, a, ell)
            continue
        out = out + LogESum.monomial(rest * GMonomial.gen(d + 1, shift, var), a, ell)
    for key, b in ell.items():
        shift, var = key
        _require_integer(b, "a log E' factor")
        rest = ell * LogMonomial({key: -1})
        ratio = GMonomial({(2, shift, var): 1, (1, shift, var): -1})
        out = out + LogESum.monomial(g * ratio, b, rest)
    return out


def d_esum(s: LogESum) -> LogESum:
    """``d/dx`` of a finite log-E-sum with integer exponents."""
    out = LogESum.zero()
    for (g, ell), c in s.terms.items():
        out = out + d_monomial(g, ell) * c
    return out


class _IntegerChecked(Series):
    """Pass-through that rejects terms with non-integer exponents."""

    def __init__(self, base: Series):
        super().__init__()
        self.base = base

    def _generate(self) -> Iterator:
        for m, c in self.base:
            for _key, e in m.items():
                _require_integer(e, f"the H monomial {m.render()}")
            yield m, c


class _TermwiseDerivative(Series):
    """``d/dx`` of a decreasing stream, term by term.

    Every generator derivative multiplies a monomial by a factor below
    ``bound = prod_v E_0(v-1) ... E_0(v-level) E_1(v-level)``, so once the
    input has reached ``m`` no later term contributes above ``m * bound``.
    """

    def __init__(self, base: Series, level: int, variables):
        super().__init__()
        self.base, self.level = base, level
        keys = {}
        for v in variables:
            keys[(1, level, v)] = 1
            for shift in range(1, level + 1):
                keys[(0, shift, v)] = 1
        self.bound = HMonomial(keys)

    def _generate(self) -> Iterator:
        pending: dict[HMonomial, Fraction] = {}
        heap: list = []
        source = iter(self.base)
        current = next(source, None)
        while current is not None:
            m, c = current
            for dm, dc in derive_monomial(m, self.level).items():
                if dm not in pending:
                    pending[dm] = Fraction(0)
                    heapq.heappush(heap, _Desc(dm))
                pending[dm] += c * dc
            current = next(source, None)
            limit = None if current is None else current[0] * self.bound
            while heap and (limit is None or heap[0].m.cmp(limit) > 0):
                top = heapq.heappop(heap).m
                coef = pending.pop(top)
                if coef:
                    yield top, coef


def d_hseries(s: Series, level: int = 0, variables=None) -> Series:
    """``partial_level`` on a lazily expanded series with integer exponents.

    ``level`` is the shift carried by the ``E_d`` (``d >= 1``) factors; lower
    ``E_0`` factors are differentiated through their chain down to that level.
    With ``variables`` (every variable the series can mention) the termwise
    route is used, otherwise the product rule is pushed through the nodes.
    """
    if variables is None:
        return _IntegerChecked(s.derivative(level))
    return _IntegerChecked(_TermwiseDerivative(s, level, variables))


def check_sigma_commutes(s: LogESum, order: int) -> bool:
    """``sigma0(d s)`` and ``partial(sigma0(s))`` agree on their first ``order`` terms."""
    from .rewrite import sigma0

    shifts = s.shifts()
    if len(shifts) > 1:
        raise ValueError("check_sigma_commutes needs a single shift")
    level = next(iter(shifts)) if shifts else 0
    left = truncate(sigma0(d_esum(s)), order)
    right = truncate(d_hseries(sigma0(s), level, s.variables()), order)
    return left == right


__all__ = ["d_monomial", "d_esum", "d_hseries", "check_sigma_commutes"]
