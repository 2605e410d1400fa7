"""Formal monomial groups and their orders.

Three kinds of monomials share one sparse representation (a sorted tuple of
``(key, exponent)`` pairs with no zero exponents):

* :class:`GMonomial` -- products of ``E^(d)(v - m)^a``; key ``(d, m, v)``.
* :class:`LogMonomial` -- products of ``log E'(v - m)^b``; key ``(m, v)``.
* :class:`HMonomial` -- products of logarithmic-derivative generators
  ``E_d(v - m)^a``; key ``(d, m, v)``.

Variable ids sort ascending from the largest variable, so sorting H keys as
plain tuples lists every ``E_0`` first (highest argument first), then every
``E_1``, then ``E_2`` and so on.  Reading exponents in that order is exactly the
lexicographic sequence that defines the order on H monomials.

Two "slow" atoms, ``x`` itself and ``L(x)``, may ride along in G and H
monomials; their keys sort after every ``E_d`` key, which places them below all
nontrivial ``E``-monomials.  They are only produced by the term language.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from functools import cmp_to_key
from typing import TYPE_CHECKING, Callable, Iterable, Iterator, Mapping

from .algebra import DEFAULT_CONTEXT, VarContext, as_rational, context_for

if TYPE_CHECKING:  # pragma: no cover
    from .series import LogESum

X_INDEX = 10**6
LX_INDEX = 10**6 + 1
SLOW_INDICES = (X_INDEX, LX_INDEX)


class Order(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1

    @property
    def symbol(self) -> str:
        return {-1: "<", 0: "=", 1: ">"}[int(self)]


class ContextMismatch(ValueError):
    """Raised when two monomials built over different variable contexts meet."""


class TieError(AssertionError):
    """The log-hat comparison met the tie case that the theory rules out."""


class ExponentMap:
    """Immutable sparse map from generator keys to nonzero rational exponents."""

    __slots__ = ("items", "_hash", "_dict")

    def __init__(self, items: Iterable[tuple[tuple, Fraction]] | Mapping[tuple, Fraction] = ()):
        if isinstance(items, Mapping):
            items = items.items()
        merged: dict[tuple, Fraction] = {}
        for key, exp in items:
            merged[key] = merged.get(key, Fraction(0)) + as_rational(exp)
        self.items: tuple[tuple[tuple, Fraction], ...] = tuple(
            sorted((k, e) for k, e in merged.items() if e != 0)
        )
        self._hash = hash(self.items)
        self._dict = None

    @classmethod
    def _trusted(cls, items: tuple) -> "ExponentMap":
        obj = cls.__new__(cls)
        obj.items = items
        obj._hash = hash(items)
        obj._dict = None
        return obj

    def as_dict(self) -> dict[tuple, Fraction]:
        if self._dict is None:
            self._dict = dict(self.items)
        return self._dict

    def get(self, key: tuple) -> Fraction:
        return self.as_dict().get(key, Fraction(0))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExponentMap) and self.items == other.items

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[tuple, Fraction]]:
        return iter(self.items)

    def combine(self, other: "ExponentMap", sign: int = 1) -> "ExponentMap":
        a, b = self.items, other.items
        if not b:
            return self
        if not a and sign == 1:
            return other
        i = j = 0
        out = []
        while i < len(a) and j < len(b):
            ka, kb = a[i][0], b[j][0]
            if ka == kb:
                e = a[i][1] + sign * b[j][1]
                if e != 0:
                    out.append((ka, e))
                i += 1
                j += 1
            elif ka < kb:
                out.append(a[i])
                i += 1
            else:
                out.append((kb, sign * b[j][1]))
                j += 1
        out.extend(a[i:])
        out.extend((k, sign * e) for k, e in b[j:])
        return ExponentMap._trusted(tuple(out))

    def scaled(self, factor: Fraction) -> "ExponentMap":
        factor = as_rational(factor)
        if factor == 0:
            return ExponentMap._trusted(())
        return ExponentMap._trusted(tuple((k, e * factor) for k, e in self.items))

    def map_keys(self, fn: Callable[[tuple], tuple]) -> "ExponentMap":
        return ExponentMap((fn(k), e) for k, e in self.items)


class _Monomial:
    """Shared group operations; subclasses only differ in key meaning and order."""

    __slots__ = ("exps",)
    kind = "monomial"

    def __init__(self, exps: ExponentMap | Mapping | Iterable = ()):
        self.exps = exps if isinstance(exps, ExponentMap) else ExponentMap(exps)

    @classmethod
    def one(cls):
        return cls(ExponentMap._trusted(()))

    def __hash__(self) -> int:
        return hash((self.kind, self.exps._hash))

    def __eq__(self, other: object) -> bool:
        return type(other) is type(self) and self.exps == other.exps

    def __mul__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self)(self.exps.combine(other.exps))

    def __truediv__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self)(self.exps.combine(other.exps, -1))

    def __pow__(self, power) -> "_Monomial":
        return type(self)(self.exps.scaled(as_rational(power)))

    def inverse(self):
        return self ** -1

    def is_one(self) -> bool:
        return not self.exps.items

    def exponent(self, key: tuple) -> Fraction:
        return self.exps.get(key)

    def items(self) -> tuple[tuple[tuple, Fraction], ...]:
        return self.exps.items

    def keys(self) -> list[tuple]:
        return [k for k, _ in self.exps.items]

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.render()})"

    def variables(self) -> set:
        raise NotImplementedError

    def render(self, context: VarContext | None = None, sep: str = "*") -> str:
        raise NotImplementedError


def _power_text(base: str, exp: Fraction) -> str:
    if exp == 1:
        return base
    text = str(exp)
    if "/" in text:
        text = f"({text})"
    return f"{base}^{text}"


def _slow_name(d: int) -> str:
    return "x" if d == X_INDEX else "L(x)"


def _display_context(variables: set, context: VarContext | None) -> VarContext:
    if context is not None:
        return context
    if not variables:
        return DEFAULT_CONTEXT
    return context_for(variables)


class GMonomial(_Monomial):
    """Products ``prod E^(d)(v - m)^a``; key ``(d, m, v)``."""

    __slots__ = ()
    kind = "G"

    @classmethod
    def gen(cls, d: int = 0, shift: int = 0, var=0, exp=1) -> "GMonomial":
        return cls({(d, shift, var): as_rational(exp)})

    @classmethod
    def x(cls, exp=1) -> "GMonomial":
        return cls({(X_INDEX, 0, 0): as_rational(exp)})

    @classmethod
    def lx(cls, exp=1) -> "GMonomial":
        return cls({(LX_INDEX, 0, 0): as_rational(exp)})

    def variables(self) -> set:
        return {k[2] for k, _ in self.exps.items if k[0] not in SLOW_INDICES}

    def shifts(self) -> set[int]:
        return {k[1] for k, _ in self.exps.items if k[0] not in SLOW_INDICES}

    def max_derivative(self) -> int:
        return max((k[0] for k, _ in self.exps.items if k[0] not in SLOW_INDICES), default=0)

    def has_slow(self) -> bool:
        return any(k[0] in SLOW_INDICES for k, _ in self.exps.items)

    def restrict(self, var) -> "GMonomial":
        return GMonomial(ExponentMap._trusted(tuple((k, e) for k, e in self.exps.items if k[2] == var and k[0] not in SLOW_INDICES)))

    def render(self, context: VarContext | None = None, sep: str = "*") -> str:
        if self.is_one():
            return "1"
        ctx = _display_context(self.variables(), context)
        parts = []
        for (d, m, v), e in self.exps.items:
            if d in SLOW_INDICES:
                parts.append(_power_text(_slow_name(d), e))
                continue
            name = "E" + "'" * d if d <= 3 else f"E^({d})"
            parts.append(_power_text(f"{name}({ctx.argument(v, m)})", e))
        return sep.join(parts)


class LogMonomial(_Monomial):
    """Products ``prod log E'(v - m)^b``; key ``(m, v)``."""

    __slots__ = ()
    kind = "Lambda"

    @classmethod
    def gen(cls, shift: int = 0, var=0, exp=1) -> "LogMonomial":
        return cls({(shift, var): as_rational(exp)})

    def variables(self) -> set:
        return {k[1] for k, _ in self.exps.items}

    def shifts(self) -> set[int]:
        return {k[0] for k, _ in self.exps.items}

    def render(self, context: VarContext | None = None, sep: str = "*") -> str:
        if self.is_one():
            return "1"
        ctx = _display_context(self.variables(), context)
        return sep.join(_power_text(f"log(E'({ctx.argument(v, m)}))", e) for (m, v), e in self.exps.items)


class HMonomial(_Monomial):
    """Products of ``E_d(v - m)^a``; key ``(d, m, v)``; ordered lexicographically."""

    __slots__ = ()
    kind = "H"

    @classmethod
    def gen(cls, d: int = 0, shift: int = 0, var=0, exp=1) -> "HMonomial":
        return cls({(d, shift, var): as_rational(exp)})

    def variables(self) -> set:
        return {k[2] for k, _ in self.exps.items if k[0] not in SLOW_INDICES}

    def cmp(self, other: "HMonomial") -> int:
        """Return -1, 0 or 1 as ``self`` is less than, equal to or greater than ``other``."""
        a, b = self.exps.items, other.exps.items
        i = j = 0
        while i < len(a) and j < len(b):
            ka, kb = a[i][0], b[j][0]
            if ka == kb:
                ea, eb = a[i][1], b[j][1]
                if ea != eb:
                    return 1 if ea > eb else -1
                i += 1
                j += 1
            elif ka < kb:
                return 1 if a[i][1] > 0 else -1
            else:
                return -1 if b[j][1] > 0 else 1
        if i < len(a):
            return 1 if a[i][1] > 0 else -1
        if j < len(b):
            return -1 if b[j][1] > 0 else 1
        return 0

    def __lt__(self, other: "HMonomial") -> bool:
        return self.cmp(other) < 0

    def __gt__(self, other: "HMonomial") -> bool:
        return self.cmp(other) > 0

    def __le__(self, other: "HMonomial") -> bool:
        return self.cmp(other) <= 0

    def __ge__(self, other: "HMonomial") -> bool:
        return self.cmp(other) >= 0

    def restrict(self, var) -> "HMonomial":
        return HMonomial(ExponentMap._trusted(tuple((k, e) for k, e in self.exps.items if k[2] == var and k[0] not in SLOW_INDICES)))

    def e0_part(self) -> "HMonomial":
        return HMonomial(ExponentMap._trusted(tuple((k, e) for k, e in self.exps.items if k[0] == 0)))

    def profile(self) -> tuple:
        """The ``(E_0, E_1)`` exponent profile as a hashable tuple."""
        return tuple((k, e) for k, e in self.exps.items if k[0] <= 1)

    def map_keys(self, fn: Callable[[tuple], tuple]) -> "HMonomial":
        return HMonomial(self.exps.map_keys(fn))

    def render(self, context: VarContext | None = None, sep: str = "*") -> str:
        if self.is_one():
            return "1"
        ctx = _display_context(self.variables(), context)
        parts = []
        for (d, m, v), e in self.exps.items:
            if d in SLOW_INDICES:
                base = _slow_name(d)
            else:
                base = f"E{d}({ctx.argument(v, m)})"
            if e == 1:
                parts.append(base)
            else:
                parts.append(f"{base}^{e}")
        return sep.join(parts)


H_SORT_KEY = cmp_to_key(lambda a, b: a.cmp(b))


def cmp_H(h1: HMonomial, h2: HMonomial, context1: VarContext | None = None, context2: VarContext | None = None) -> Order:
    """Compare two H monomials; contexts, when supplied, must agree."""
    if context1 is not None and context2 is not None and context1 != context2:
        raise ContextMismatch("H monomials come from different variable contexts")
    return Order(h1.cmp(h2))


@dataclass(frozen=True)
class SmallnessProfile:
    """Per-variable exponent sums ``xi_x`` of a G monomial."""

    xi: tuple[tuple[object, Fraction], ...]

    @classmethod
    def of(cls, g: GMonomial) -> "SmallnessProfile":
        sums: dict = {}
        for (d, _m, v), e in g.items():
            if d in SLOW_INDICES:
                continue
            sums[v] = sums.get(v, Fraction(0)) + e
        return cls(tuple(sorted(sums.items())))

    def is_zero(self) -> bool:
        return all(value == 0 for _, value in self.xi)


def is_small(g: GMonomial) -> bool:
    """A G monomial is small when every per-variable exponent sum vanishes."""
    return SmallnessProfile.of(g).is_zero()


def _is_tx_monomial(g: GMonomial, ell: LogMonomial) -> bool:
    if g.is_one() and ell.is_one():
        return False
    if g.has_slow():
        return False
    shifts = g.shifts() | ell.shifts()
    if len(shifts) > 1:
        return False
    for _key, b in ell.items():
        if b.denominator != 1 or b < 0:
            return False
    per_var: dict = {}
    for (d, _m, v), a in g.items():
        per_var.setdefault(v, {})[d] = a
    for v, exps in per_var.items():
        if exps.get(0, 0) != 0:
            return False
        higher = Fraction(0)
        for d, a in exps.items():
            if d >= 2:
                if a.denominator != 1 or a < 0:
                    return False
                higher += a
        if exps.get(1, Fraction(0)) != -higher:
            return False
    # A lone log E'(x) factor is excluded; it exponentiates to E'(x) instead.
    if any(b == 1 for _key, b in ell.items()) and g.is_one():
        return False
    return True


def is_in_TX(s: "LogESum") -> bool:
    """Membership in the additive group generated by the admissible small shapes."""
    return all(_is_tx_monomial(g, ell) for (g, ell) in s.terms)


def log_hat(gl: tuple[GMonomial, LogMonomial]) -> "LogESum":
    """Sum of ``alpha_j E(x_j - 1)`` read from the top ``E_0`` exponents of the rho image."""
    from .rewrite import leading_monomial_of_product
    from .series import LogESum

    g, ell = gl
    shifts = g.shifts() | ell.shifts()
    if len(shifts) > 1:
        raise ValueError("log_hat expects a monomial at a single shift")
    m = next(iter(shifts)) if shifts else 0
    lead = leading_monomial_of_product(g, ell)
    result = LogESum.zero()
    for (d, shift, v), e in lead.items():
        if d == 0 and shift == m:
            result = result + LogESum.monomial(GMonomial.gen(0, m + 1, v), e)
    return result


@dataclass(frozen=True)
class Gamma0Monomial:
    """``g * ell * e_T(t)``: a G part, a log part and the argument of ``e_T``."""

    g: GMonomial
    ell: LogMonomial
    t: "LogESum"

    @classmethod
    def of(cls, g: GMonomial | None = None, ell: LogMonomial | None = None, t: "LogESum | None" = None) -> "Gamma0Monomial":
        from .series import LogESum

        return cls(g or GMonomial.one(), ell or LogMonomial.one(), t if t is not None else LogESum.zero())

    def __mul__(self, other: "Gamma0Monomial") -> "Gamma0Monomial":
        return Gamma0Monomial(self.g * other.g, self.ell * other.ell, self.t + other.t)

    def inverse(self) -> "Gamma0Monomial":
        return Gamma0Monomial(self.g.inverse(), self.ell.inverse(), -self.t)

    def is_small_class(self) -> bool:
        return is_small(self.g) and self.t.is_zero()


def cmp_Gamma0(m1: Gamma0Monomial, m2: Gamma0Monomial) -> Order:
    """Order on ``G Lambda e_T(T)`` decided through the rewrite module."""
    from .rewrite import leading_term_of_series, rho0, leading_monomial_of_product
    from .series import Series

    quotient = m1 * m2.inverse()
    g, ell, t = quotient.g, quotient.ell, quotient.t
    if t.is_zero():
        lead = leading_monomial_of_product(g, ell)
        return Order(lead.cmp(HMonomial.one()))
    # quotient > 1  iff  g*ell > e_T(-t)  iff  loghat(rho(g*ell)) + rho(t) > 0
    hat = log_hat((g, ell))
    hat_terms = {}
    for (hg, _hl), c in hat.terms.items():
        ((_d, shift, v), _e), = hg.items()
        hat_terms[HMonomial.gen(0, shift, v)] = c
    rho_t = rho0(t)
    t_lead = leading_term_of_series(rho_t)
    if t_lead is not None:
        _c, mono = t_lead
        keys = mono.items()
        if len(keys) == 1 and keys[0][0][0] == 0 and keys[0][1] == 1 and mono in hat_terms:
            raise TieError(f"rho(t) leads with {mono.render()}, which log-hat also produces")
    total = Series.finite(hat_terms) + rho_t
    lead = leading_term_of_series(total)
    if lead is None:
        raise TieError("log-hat and rho(t) cancel completely")
    return Order.GREATER if lead[0] > 0 else Order.LESS
